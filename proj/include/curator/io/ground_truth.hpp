#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "curator/io/binary.hpp"
#include "curator/io/synthetic.hpp"
#include "curator/oracle.hpp"
#include "curator/vector_store.hpp"

namespace curator::io {

inline constexpr std::array<char, 8> kGroundTruthMagic = {'C', 'U', 'R', 'G', 'T', '0', '0', '1'};

/// Exact top-k for each <query vector, tenant> pair.
struct GroundTruth {
    std::size_t k = 0;
    std::vector<TenantId> tenants;
    std::vector<std::vector<Neighbor>> rows;

    friend bool operator==(const GroundTruth& a, const GroundTruth& b) {
        if (a.k != b.k || a.tenants != b.tenants || a.rows.size() != b.rows.size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            if (a.rows[i].size() != b.rows[i].size()) {
                return false;
            }
            for (std::size_t j = 0; j < a.rows[i].size(); ++j) {
                if (a.rows[i][j].label != b.rows[i][j].label || a.rows[i][j].distance != b.rows[i][j].distance) {
                    return false;
                }
            }
        }
        return true;
    }
};

/// Materializes the access matrix of a dataset as a plain store.
inline VectorStore make_store(const DenseMatrix& base, const std::vector<AccessRecord>& access) {
    CURATOR_THROW_IF_NOT(base.rows() == access.size(), ErrorCode::validation_error,
                         "vector and access record counts differ");
    VectorStore store(base.dim());
    for (std::size_t i = 0; i < base.rows(); ++i) {
        const AccessRecord& r = access[i];
        const Slot s = store.add(r.label, base.row(i), r.owner);
        for (TenantId t : r.tenants) {
            store.access(s).insert(t);
        }
    }
    return store;
}

inline GroundTruth compute_ground_truth(const VectorStore& store, const QuerySet& queries, std::size_t k,
                                        WorkerPool& pool) {
    CURATOR_THROW_IF_NOT(k >= 1, ErrorCode::invalid_argument, "ground truth: k must be >= 1");
    GroundTruth gt;
    gt.k = k;
    gt.tenants = queries.tenants;
    gt.rows = exact_filtered_knn_batch(store, queries.vectors, queries.tenants, k, pool);
    return gt;
}

inline std::vector<std::uint8_t> encode_ground_truth(const GroundTruth& gt) {
    ByteWriter w;
    w.bytes(kGroundTruthMagic.data(), kGroundTruthMagic.size());
    w.u64(gt.k);
    w.u64(gt.rows.size());
    for (std::size_t i = 0; i < gt.rows.size(); ++i) {
        w.u32(to_underlying(gt.tenants[i]));
        w.u32(static_cast<std::uint32_t>(gt.rows[i].size()));
        for (const Neighbor& n : gt.rows[i]) {
            w.u64(to_underlying(n.label));
            w.f32(n.distance);
        }
    }
    return w.buffer();
}

inline GroundTruth decode_ground_truth(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    std::array<char, 8> magic{};
    CURATOR_THROW_IF_NOT(bytes.size() >= 24, ErrorCode::malformed_header, "ground truth: header too short");
    r.bytes(magic.data(), magic.size());
    CURATOR_THROW_IF_NOT(magic == kGroundTruthMagic, ErrorCode::malformed_header, "ground truth: bad magic");
    GroundTruth gt;
    gt.k = r.u64();
    const std::uint64_t n = r.u64();
    CURATOR_THROW_IF_NOT(n <= r.remaining() / 8, ErrorCode::truncated, "ground truth: row count exceeds file size");
    gt.tenants.reserve(n);
    gt.rows.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        gt.tenants.push_back(TenantId{r.u32()});
        const std::uint32_t m = r.u32();
        CURATOR_THROW_IF_NOT(m <= gt.k, ErrorCode::validation_error, "ground truth: row longer than k");
        gt.rows[i].resize(m);
        for (auto& nb : gt.rows[i]) {
            nb.label = Label{r.u64()};
            nb.distance = r.f32();
        }
    }
    CURATOR_THROW_IF_NOT(r.at_end(), ErrorCode::trailing_data, "ground truth: trailing bytes");
    return gt;
}

inline void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
    write_file_atomic(path, encode_ground_truth(gt));
}

inline GroundTruth read_ground_truth(const std::filesystem::path& path) {
    return decode_ground_truth(read_file_bytes(path));
}

/// Loads the dataset, computes the table and writes it. Any load error
/// surfaces before the output file is touched.
inline GroundTruth ground_truth_file(const DatasetPaths& dataset, const std::filesystem::path& out, std::size_t k,
                                     WorkerPool& pool) {
    const SyntheticDataset ds = read_dataset(dataset);
    const VectorStore store = make_store(ds.base, ds.base_access);
    const QuerySet qs = make_query_pairs(ds.queries, ds.query_access);
    GroundTruth gt = compute_ground_truth(store, qs, k, pool);
    write_ground_truth(out, gt);
    return gt;
}

}  // namespace curator::io
