#pragma once

#include <algorithm>
#include <array>
#include <cstring>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include <zlib.h>

#include "curator/curator_index.hpp"
#include "curator/io/binary.hpp"

namespace curator {

/// Private-state bridge used by snapshot serialization.
struct SnapshotAccess {
    using NodeState = CuratorIndex::NodeState;
    static std::vector<NodeState>& nodes(CuratorIndex& idx) noexcept { return idx.nodes_; }
    static const std::vector<NodeState>& nodes(const CuratorIndex& idx) noexcept { return idx.nodes_; }
    static VectorStore& store(CuratorIndex& idx) noexcept { return idx.store_; }
};

namespace io {

inline constexpr std::array<char, 8> kSnapshotMagic = {'C', 'U', 'R', 'S', 'N', 'A', 'P', '1'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

inline std::uint32_t crc32_of(const std::vector<std::uint8_t>& bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = ::crc32(crc, bytes.data() + off, chunk);
        off += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

namespace detail {

inline void write_params(ByteWriter& w, const CuratorParams& p) {
    w.u64(p.gct.branching_factor);
    w.u64(p.gct.max_depth);
    w.u64(p.gct.min_train_points_per_node);
    w.u64(p.gct.kmeans_max_iters);
    w.u64(p.gct.kmeans_n_init);
    w.u64(p.gct.seed);
    w.u64(p.max_shortlist_size);
    w.u64(p.bloom_bits_per_node);
    w.u64(p.bloom_hash_count);
    w.u8(p.bloom_update_batching ? 1 : 0);
    w.u64(p.bloom_batch_interval);
}

inline CuratorParams read_params(ByteReader& r) {
    CuratorParams p;
    p.gct.branching_factor = r.u64();
    p.gct.max_depth = r.u64();
    p.gct.min_train_points_per_node = r.u64();
    p.gct.kmeans_max_iters = r.u64();
    p.gct.kmeans_n_init = r.u64();
    p.gct.seed = r.u64();
    p.max_shortlist_size = r.u64();
    p.bloom_bits_per_node = r.u64();
    p.bloom_hash_count = r.u64();
    p.bloom_update_batching = r.u8() != 0;
    p.bloom_batch_interval = r.u64();
    return p;
}

inline void write_labels(ByteWriter& w, const VectorStore& store, const std::vector<Slot>& slots) {
    w.u64(slots.size());
    for (Slot s : slots) {
        w.u64(to_underlying(store.label(s)));
    }
}

inline std::uint64_t checked_count(ByteReader& r, std::size_t min_item_bytes) {
    const std::uint64_t n = r.u64();
    CURATOR_THROW_IF_NOT(min_item_bytes == 0 || n <= r.remaining() / min_item_bytes, ErrorCode::truncated,
                         "snapshot: element count exceeds remaining bytes");
    return n;
}

}  // namespace detail

/// Serializes an index. Output depends only on logical state: records are
/// written in label order and shortlists in tenant order.
inline std::vector<std::uint8_t> encode_index(const CuratorIndex& index) {
    ByteWriter w;
    detail::write_params(w, index.params());
    const ClusterTree& tree = index.tree();
    w.u64(tree.dim());
    w.u64(tree.size());
    for (const TreeNode& n : tree.nodes()) {
        w.u32(n.parent);
        w.u32(n.depth);
        w.u64(n.children.size());
        for (NodeId c : n.children) {
            w.u32(c);
        }
    }
    for (float f : tree.centroids().data()) {
        w.f32(f);
    }

    const VectorStore& store = index.store();
    const std::vector<Label> labels = store.labels();
    w.u64(labels.size());
    for (Label l : labels) {
        const Slot s = store.slot_of(l);
        w.u64(to_underlying(l));
        w.u32(to_underlying(store.owner(s)));
        w.u32(store.leaf(s));
        for (float f : store.vector(s)) {
            w.f32(f);
        }
        const auto& ts = store.access(s).tenants();
        w.u64(ts.size());
        for (TenantId t : ts) {
            w.u32(to_underlying(t));
        }
    }

    for (const auto& ns : SnapshotAccess::nodes(index)) {
        w.u64(ns.bloom.words().size());
        for (auto word : ns.bloom.words()) {
            w.u64(word);
        }
        w.u32(ns.pending_removals);
        detail::write_labels(w, store, ns.bucket);
        std::vector<TenantId> tenants;
        tenants.reserve(ns.shortlists.size());
        for (const auto& [t, list] : ns.shortlists) {
            tenants.push_back(t);
        }
        std::sort(tenants.begin(), tenants.end());
        w.u64(tenants.size());
        for (TenantId t : tenants) {
            w.u32(to_underlying(t));
            detail::write_labels(w, store, ns.shortlists.at(t));
        }
    }

    const std::vector<std::uint8_t>& payload = w.buffer();
    ByteWriter out;
    out.bytes(kSnapshotMagic.data(), kSnapshotMagic.size());
    out.u32(kSnapshotVersion);
    out.u64(payload.size());
    out.u32(crc32_of(payload));
    out.bytes(payload.data(), payload.size());
    return out.buffer();
}

inline CuratorIndex decode_index(const std::vector<std::uint8_t>& bytes) {
    ByteReader hdr(bytes);
    std::array<char, 8> magic{};
    CURATOR_THROW_IF_NOT(bytes.size() >= 24, ErrorCode::malformed_header, "snapshot: header too short");
    hdr.bytes(magic.data(), magic.size());
    CURATOR_THROW_IF_NOT(magic == kSnapshotMagic, ErrorCode::malformed_header, "snapshot: bad magic");
    const std::uint32_t version = hdr.u32();
    CURATOR_THROW_IF_NOT(version == kSnapshotVersion, ErrorCode::version_mismatch,
                         "snapshot: version " + std::to_string(version) + ", expected " +
                                 std::to_string(kSnapshotVersion));
    const std::uint64_t length = hdr.u64();
    const std::uint32_t crc = hdr.u32();
    CURATOR_THROW_IF_NOT(length <= hdr.remaining(), ErrorCode::truncated, "snapshot: payload truncated");
    CURATOR_THROW_IF_NOT(length == hdr.remaining(), ErrorCode::trailing_data, "snapshot: trailing bytes");
    const std::vector<std::uint8_t> payload(bytes.begin() + static_cast<std::ptrdiff_t>(hdr.position()),
                                            bytes.end());
    CURATOR_THROW_IF_NOT(crc32_of(payload) == crc, ErrorCode::checksum_mismatch, "snapshot: checksum mismatch");

    ByteReader r(payload);
    const CuratorParams params = detail::read_params(r);
    const std::uint64_t dim = r.u64();
    CURATOR_THROW_IF_NOT(dim > 0, ErrorCode::malformed_header, "snapshot: zero dimension");
    const std::uint64_t n_nodes = detail::checked_count(r, 16);
    std::vector<TreeNode> nodes(n_nodes);
    for (std::uint64_t i = 0; i < n_nodes; ++i) {
        TreeNode& n = nodes[i];
        n.id = static_cast<NodeId>(i);
        n.parent = r.u32();
        n.depth = r.u32();
        const std::uint64_t nc = detail::checked_count(r, 4);
        n.children.resize(nc);
        for (auto& c : n.children) {
            c = r.u32();
        }
    }
    CURATOR_THROW_IF_NOT(n_nodes <= r.remaining() / (4 * dim), ErrorCode::truncated, "snapshot: centroids truncated");
    DenseMatrix centroids(n_nodes, dim);
    for (float& f : centroids.data()) {
        f = r.f32();
    }
    CuratorIndex index(ClusterTree(std::move(nodes), std::move(centroids)), params);

    VectorStore& store = SnapshotAccess::store(index);
    const std::uint64_t n_records = detail::checked_count(r, 24 + 4 * dim);
    std::unordered_map<std::uint64_t, Slot> slot_by_label;
    slot_by_label.reserve(n_records);
    VectorData buf(dim);
    for (std::uint64_t i = 0; i < n_records; ++i) {
        const Label label{r.u64()};
        const TenantId owner{r.u32()};
        const NodeId leaf = r.u32();
        CURATOR_THROW_IF_NOT(leaf < index.tree().size() && index.tree().node(leaf).is_leaf(),
                             ErrorCode::validation_error, "snapshot: record leaf is not a tree leaf");
        for (float& f : buf) {
            f = r.f32();
        }
        const Slot s = store.add(label, buf, owner, leaf);
        const std::uint64_t nt = detail::checked_count(r, 4);
        for (std::uint64_t j = 0; j < nt; ++j) {
            store.access(s).insert(TenantId{r.u32()});
        }
        slot_by_label.emplace(to_underlying(label), s);
    }

    auto read_slots = [&](std::vector<Slot>& out) {
        const std::uint64_t n = detail::checked_count(r, 8);
        out.resize(n);
        for (auto& s : out) {
            const auto it = slot_by_label.find(r.u64());
            CURATOR_THROW_IF_NOT(it != slot_by_label.end(), ErrorCode::validation_error,
                                 "snapshot: list references unknown label");
            s = it->second;
        }
    };
    for (auto& ns : SnapshotAccess::nodes(index)) {
        const std::uint64_t nw = detail::checked_count(r, 8);
        CURATOR_THROW_IF_NOT(nw == ns.bloom.words().size(), ErrorCode::validation_error,
                             "snapshot: bloom filter size disagrees with parameters");
        for (auto& word : ns.bloom.words()) {
            word = r.u64();
        }
        ns.pending_removals = r.u32();
        read_slots(ns.bucket);
        const std::uint64_t n_lists = detail::checked_count(r, 12);
        for (std::uint64_t j = 0; j < n_lists; ++j) {
            const TenantId t{r.u32()};
            read_slots(ns.shortlists[t]);
        }
    }
    CURATOR_THROW_IF_NOT(r.at_end(), ErrorCode::trailing_data, "snapshot: unparsed payload bytes");
    return index;
}

inline void save_index(const CuratorIndex& index, const std::filesystem::path& path) {
    write_file_atomic(path, encode_index(index));
}

inline CuratorIndex load_index(const std::filesystem::path& path) { return decode_index(read_file_bytes(path)); }

}  // namespace io
}  // namespace curator
