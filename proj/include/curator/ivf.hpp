#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "curator/bloom_filter.hpp"
#include "curator/core.hpp"
#include "curator/kmeans.hpp"
#include "curator/multi_tenant_index.hpp"
#include "curator/vector_store.hpp"

namespace curator {

struct IvfParams {
    std::size_t n_clusters = 256;
    std::size_t nprobe = 8;
    KMeansParams kmeans{.n_clusters = 256, .max_iters = 20, .seed = 1234, .n_init = 1};

    void validate() const {
        CURATOR_THROW_IF_NOT(n_clusters >= 1, ErrorCode::invalid_argument, "n_clusters must be >= 1");
        CURATOR_THROW_IF_NOT(nprobe >= 1 && nprobe <= n_clusters, ErrorCode::invalid_argument,
                             "nprobe must be in [1, n_clusters]");
    }
};

/// Flat inverted file: k-means cells with posting lists over a private
/// vector store. The cell of each record is kept in the store's leaf field.
class IvfIndex {
public:
    IvfIndex() = default;
    explicit IvfIndex(DenseMatrix centroids)
            : centroids_(std::move(centroids)), postings_(centroids_.rows()), store_(centroids_.dim()) {}

    static IvfIndex train(const DenseMatrix& training, std::size_t n_clusters, const KMeansParams& km) {
        CURATOR_THROW_IF_NOT(!training.empty(), ErrorCode::insufficient_data, "ivf train: empty training set");
        KMeansParams p = km;
        p.n_clusters = n_clusters;
        return IvfIndex(kmeans(training, p).centroids);
    }

    std::size_t dim() const noexcept { return centroids_.dim(); }
    std::size_t n_cells() const noexcept { return centroids_.rows(); }
    const DenseMatrix& centroids() const noexcept { return centroids_; }
    const VectorStore& store() const noexcept { return store_; }
    VectorStore& store() noexcept { return store_; }
    const std::vector<Slot>& cell(std::size_t c) const noexcept { return postings_[c]; }

    std::size_t assign_cell(const float* x) const noexcept {
        std::size_t best = 0;
        float best_d = std::numeric_limits<float>::infinity();
        for (std::size_t c = 0; c < centroids_.rows(); ++c) {
            const float d = l2_sqr(x, centroids_.row_ptr(c), dim());
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }

    Slot add(VectorView x, Label label, TenantId owner) {
        CURATOR_THROW_IF_NOT(x.size() == dim(), ErrorCode::dimension_mismatch,
                             "ivf insert: dimension " + std::to_string(x.size()) + " != " +
                                     std::to_string(dim()));
        const auto c = static_cast<NodeId>(assign_cell(x.data()));
        const Slot s = store_.add(label, x, owner, c);
        postings_[c].push_back(s);
        return s;
    }

    /// Returns the cell the record lived in.
    std::size_t remove(Label label) {
        const Slot s = store_.slot_of(label);
        const std::size_t c = store_.leaf(s);
        auto& list = postings_[c];
        auto it = std::find(list.begin(), list.end(), s);
        if (it != list.end()) {
            *it = list.back();
            list.pop_back();
        }
        store_.remove(label);
        return c;
    }

    /// All cells ordered by (centroid distance, cell index).
    std::vector<std::pair<float, std::uint32_t>> rank_cells(const float* x, SearchStats* stats) const {
        std::vector<std::pair<float, std::uint32_t>> order(n_cells());
        for (std::size_t c = 0; c < n_cells(); ++c) {
            order[c] = {l2_sqr(x, centroids_.row_ptr(c), dim()), static_cast<std::uint32_t>(c)};
        }
        if (stats != nullptr) {
            stats->distance_computations += n_cells();
        }
        std::sort(order.begin(), order.end());
        return order;
    }

    /// The nprobe nearest cells (partial sort only).
    std::vector<std::uint32_t> probe_cells(const float* x, std::size_t nprobe, SearchStats* stats) const {
        std::vector<std::pair<float, std::uint32_t>> order(n_cells());
        for (std::size_t c = 0; c < n_cells(); ++c) {
            order[c] = {l2_sqr(x, centroids_.row_ptr(c), dim()), static_cast<std::uint32_t>(c)};
        }
        if (stats != nullptr) {
            stats->distance_computations += n_cells();
        }
        const std::size_t n = std::min(nprobe, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end());
        std::vector<std::uint32_t> cells(n);
        for (std::size_t i = 0; i < n; ++i) {
            cells[i] = order[i].second;
        }
        return cells;
    }

    /// Centroids plus posting entries (slot and label per entry).
    MemoryUsage structure_bytes() const noexcept {
        MemoryUsage m;
        m.tree = centroids_.data().size() * sizeof(float);
        for (const auto& p : postings_) {
            m.postings += p.size() * sizeof(Slot);
        }
        return m;
    }

private:
    DenseMatrix centroids_;
    std::vector<std::vector<Slot>> postings_;
    VectorStore store_;
};

namespace detail {

template <typename ScanCell>
std::vector<Neighbor> scan_cells_parallel(const std::vector<std::uint32_t>& cells, const IvfIndex& ivf,
                                          std::size_t k, WorkerPool& pool, ScanCell&& scan_range) {
    struct Chunk {
        std::uint32_t cell;
        std::size_t begin, end;
    };
    constexpr std::size_t kChunk = 16;
    std::vector<Chunk> chunks;
    for (auto c : cells) {
        const std::size_t n = ivf.cell(c).size();
        for (std::size_t b = 0; b < n; b += kChunk) {
            chunks.push_back({c, b, std::min(n, b + kChunk)});
        }
    }
    std::vector<TopKCollector> partial(pool.size(), TopKCollector(k));
    pool.parallel_for(chunks.size(), [&](std::size_t i, std::size_t w) {
        scan_range(chunks[i].cell, chunks[i].begin, chunks[i].end, partial[w]);
    });
    TopKCollector top(k);
    for (const auto& p : partial) {
        top.merge(p);
    }
    return std::move(top).finish();
}

}  // namespace detail

/// Metadata filtering over one shared IVF: every visited vector's access
/// list is checked during the scan of the nprobe nearest cells.
class MfIvfIndex : public MultiTenantIndex {
public:
    MfIvfIndex(const DenseMatrix& training, const IvfParams& params)
            : params_(params), ivf_(IvfIndex::train(training, params.n_clusters, params.kmeans)) {
        params_.validate();
    }

    std::string name() const override { return "mf_ivf"; }
    std::size_t dim() const override { return ivf_.dim(); }
    const IvfIndex& ivf() const noexcept { return ivf_; }
    const IvfParams& params() const noexcept { return params_; }

    void insert_vector(VectorView x, Label label, TenantId owner) override { ivf_.add(x, label, owner); }

    void grant_access(Label label, TenantId t) override {
        const Slot s = ivf_.store().slot_of(label);
        CURATOR_THROW_IF_NOT(ivf_.store().access(s).insert(t), ErrorCode::duplicate_grant,
                             "duplicate grant for label " + std::to_string(to_underlying(label)));
    }

    void revoke_access(Label label, TenantId t) override {
        const Slot s = ivf_.store().slot_of(label);
        CURATOR_THROW_IF_NOT(ivf_.store().access(s).contains(t), ErrorCode::access_not_granted,
                             "tenant has no access to label " + std::to_string(to_underlying(label)));
        CURATOR_THROW_IF_NOT(ivf_.store().owner(s) != t, ErrorCode::owner_revocation,
                             "cannot revoke the owner's access");
        ivf_.store().access(s).erase(t);
    }

    void delete_vector(Label label) override { ivf_.remove(label); }

    bool has_access(Label label, TenantId t) const override { return ivf_.store().has_access(label, t); }

    std::vector<Neighbor> mf_ivf_search(VectorView x, TenantId t, std::size_t k, std::size_t nprobe,
                                        SearchStats* stats = nullptr) const {
        check(x, k, nprobe);
        SearchStats local;
        TopKCollector top(k);
        const auto& store = ivf_.store();
        for (auto c : ivf_.probe_cells(x.data(), nprobe, &local)) {
            ++local.clusters_scanned;
            for (Slot s : ivf_.cell(c)) {
                ++local.predicate_evaluations;
                ++local.access_list_traversals;
                if (!store.access(s).contains(t)) {
                    continue;
                }
                ++local.candidates;
                ++local.distance_computations;
                top.push(store.label(s), l2_sqr(x.data(), store.vector_ptr(s), dim()));
            }
        }
        if (stats != nullptr) {
            *stats += local;
        }
        return std::move(top).finish();
    }

    std::vector<Neighbor> search(VectorView x, TenantId t, const QueryKnobs& q,
                                 SearchStats* stats = nullptr) const override {
        return mf_ivf_search(x, t, q.k, q.nprobe, stats);
    }

    std::vector<Neighbor> search_intra(VectorView x, TenantId t, const QueryKnobs& q, WorkerPool& pool,
                                       SearchStats* stats = nullptr) const override {
        check(x, q.k, q.nprobe);
        const auto cells = ivf_.probe_cells(x.data(), q.nprobe, stats);
        const auto& store = ivf_.store();
        return detail::scan_cells_parallel(cells, ivf_, q.k, pool,
                                           [&](std::uint32_t c, std::size_t b, std::size_t e, TopKCollector& top) {
                                               const auto& list = ivf_.cell(c);
                                               for (std::size_t i = b; i < e; ++i) {
                                                   const Slot s = list[i];
                                                   if (store.access(s).contains(t)) {
                                                       top.push(store.label(s),
                                                                l2_sqr(x.data(), store.vector_ptr(s), dim()));
                                                   }
                                               }
                                           });
    }

    MemoryUsage memory_usage() const override {
        MemoryUsage m = ivf_.structure_bytes();
        m.vector_data = ivf_.store().vector_bytes();
        m.access_lists = ivf_.store().access_list_bytes();
        return m;
    }

private:
    void check(VectorView x, std::size_t k, std::size_t nprobe) const {
        CURATOR_THROW_IF_NOT(x.size() == dim(), ErrorCode::dimension_mismatch,
                             "search: query dimension " + std::to_string(x.size()) + " != " +
                                     std::to_string(dim()));
        CURATOR_THROW_IF_NOT(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
        CURATOR_THROW_IF_NOT(nprobe >= 1, ErrorCode::invalid_argument, "nprobe must be >= 1");
    }

    IvfParams params_;
    IvfIndex ivf_;
};

/// Ablation variants on the shared flat IVF. Each cell carries a Bloom
/// filter over the tenants present in it; cells whose filter rejects the
/// tenant are skipped and do not count toward nprobe. With shortlists, each
/// cell also keeps one label list per tenant and scans it directly, so the
/// search never touches an access list.
class FlatIvfBfIndex : public MultiTenantIndex {
public:
    FlatIvfBfIndex(const DenseMatrix& training, const IvfParams& params, bool with_shortlists,
                   std::size_t bloom_bits = 1024, std::size_t bloom_hashes = 4)
            : params_(params),
              with_shortlists_(with_shortlists),
              bloom_bits_(bloom_bits),
              bloom_hashes_(bloom_hashes),
              ivf_(IvfIndex::train(training, params.n_clusters, params.kmeans)) {
        params_.validate();
        cells_.resize(ivf_.n_cells());
        for (auto& c : cells_) {
            c.bloom = TenantBloomFilter(bloom_bits_, bloom_hashes_);
        }
    }

    std::string name() const override { return with_shortlists_ ? "flat_ivf_bf_sl" : "flat_ivf_bf"; }
    std::size_t dim() const override { return ivf_.dim(); }
    bool with_shortlists() const noexcept { return with_shortlists_; }
    const IvfIndex& ivf() const noexcept { return ivf_; }

    void insert_vector(VectorView x, Label label, TenantId owner) override {
        const Slot s = ivf_.add(x, label, owner);
        on_grant(s, owner);
    }

    void grant_access(Label label, TenantId t) override {
        const Slot s = ivf_.store().slot_of(label);
        CURATOR_THROW_IF_NOT(ivf_.store().access(s).insert(t), ErrorCode::duplicate_grant,
                             "duplicate grant for label " + std::to_string(to_underlying(label)));
        on_grant(s, t);
    }

    void revoke_access(Label label, TenantId t) override {
        const Slot s = ivf_.store().slot_of(label);
        CURATOR_THROW_IF_NOT(ivf_.store().access(s).contains(t), ErrorCode::access_not_granted,
                             "tenant has no access to label " + std::to_string(to_underlying(label)));
        CURATOR_THROW_IF_NOT(ivf_.store().owner(s) != t, ErrorCode::owner_revocation,
                             "cannot revoke the owner's access");
        ivf_.store().access(s).erase(t);
        const std::size_t c = ivf_.store().leaf(s);
        drop_from_shortlist(c, s, t);
        recompute_bloom(c);
    }

    void delete_vector(Label label) override {
        const Slot s = ivf_.store().slot_of(label);
        const std::size_t c = ivf_.store().leaf(s);
        for (TenantId t : ivf_.store().access(s).tenants()) {
            drop_from_shortlist(c, s, t);
        }
        ivf_.remove(label);
        recompute_bloom(c);
    }

    bool has_access(Label label, TenantId t) const override { return ivf_.store().has_access(label, t); }

    std::vector<Neighbor> search(VectorView x, TenantId t, const QueryKnobs& q,
                                 SearchStats* stats = nullptr) const override {
        check(x, q);
        SearchStats local;
        TopKCollector top(q.k);
        const BloomKey key(t, bloom_bits_, bloom_hashes_);
        const auto& store = ivf_.store();
        std::size_t probed = 0;
        for (const auto& [d, c] : ivf_.rank_cells(x.data(), &local)) {
            if (probed >= q.nprobe) {
                break;
            }
            ++local.bloom_queries;
            if (!cells_[c].bloom.contains(key)) {
                continue;
            }
            ++probed;
            ++local.clusters_scanned;
            if (with_shortlists_) {
                auto it = cells_[c].shortlists.find(t);
                if (it == cells_[c].shortlists.end()) {
                    continue;
                }
                for (Slot s : it->second) {
                    ++local.candidates;
                    ++local.distance_computations;
                    top.push(store.label(s), l2_sqr(x.data(), store.vector_ptr(s), dim()));
                }
            } else {
                for (Slot s : ivf_.cell(c)) {
                    ++local.predicate_evaluations;
                    ++local.access_list_traversals;
                    if (!store.access(s).contains(t)) {
                        continue;
                    }
                    ++local.candidates;
                    ++local.distance_computations;
                    top.push(store.label(s), l2_sqr(x.data(), store.vector_ptr(s), dim()));
                }
            }
        }
        if (stats != nullptr) {
            *stats += local;
        }
        return std::move(top).finish();
    }

    MemoryUsage memory_usage() const override {
        MemoryUsage m = ivf_.structure_bytes();
        m.vector_data = ivf_.store().vector_bytes();
        m.access_lists = ivf_.store().access_list_bytes();
        for (const auto& c : cells_) {
            m.bloom_filters += c.bloom.byte_size();
            for (const auto& [t, list] : c.shortlists) {
                m.shortlists += sizeof(TenantId) + list.size() * sizeof(Slot);
            }
        }
        return m;
    }

private:
    struct CellState {
        TenantBloomFilter bloom;
        std::unordered_map<TenantId, std::vector<Slot>> shortlists;
    };

    void check(VectorView x, const QueryKnobs& q) const {
        CURATOR_THROW_IF_NOT(x.size() == dim(), ErrorCode::dimension_mismatch,
                             "search: query dimension " + std::to_string(x.size()) + " != " +
                                     std::to_string(dim()));
        CURATOR_THROW_IF_NOT(q.k >= 1 && q.nprobe >= 1, ErrorCode::invalid_argument,
                             "k and nprobe must be >= 1");
    }

    void on_grant(Slot s, TenantId t) {
        const std::size_t c = ivf_.store().leaf(s);
        cells_[c].bloom.insert(BloomKey(t, bloom_bits_, bloom_hashes_));
        if (with_shortlists_) {
            cells_[c].shortlists[t].push_back(s);
        }
    }

    void drop_from_shortlist(std::size_t c, Slot s, TenantId t) {
        if (!with_shortlists_) {
            return;
        }
        auto it = cells_[c].shortlists.find(t);
        if (it == cells_[c].shortlists.end()) {
            return;
        }
        auto& list = it->second;
        auto pos = std::find(list.begin(), list.end(), s);
        if (pos != list.end()) {
            *pos = list.back();
            list.pop_back();
        }
        if (list.empty()) {
            cells_[c].shortlists.erase(it);
        }
    }

    // Exact recomputation from the cell's live members.
    void recompute_bloom(std::size_t c) {
        auto& bloom = cells_[c].bloom;
        bloom.clear();
        if (with_shortlists_) {
            for (const auto& [t, list] : cells_[c].shortlists) {
                bloom.insert(BloomKey(t, bloom_bits_, bloom_hashes_));
            }
            return;
        }
        for (Slot s : ivf_.cell(c)) {
            for (TenantId t : ivf_.store().access(s)) {
                bloom.insert(BloomKey(t, bloom_bits_, bloom_hashes_));
            }
        }
    }

    IvfParams params_;
    bool with_shortlists_;
    std::size_t bloom_bits_;
    std::size_t bloom_hashes_;
    IvfIndex ivf_;
    std::vector<CellState> cells_;
};

/// One private IVF per tenant holding its own copy of every vector it can
/// access. Each tenant index is trained on that tenant's vectors with
/// min(n_clusters, round(sqrt(n))) cells.
class PtIvfIndex : public MultiTenantIndex {
public:
    PtIvfIndex(std::size_t dim, const IvfParams& params) : dim_(dim), params_(params) { params_.validate(); }

    std::string name() const override { return "pt_ivf"; }
    std::size_t dim() const override { return dim_; }

    static std::size_t cells_for(std::size_t n_train, std::size_t cap) noexcept {
        const auto root = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n_train))));
        return std::clamp<std::size_t>(root, 1, std::max<std::size_t>(1, std::min(cap, n_train)));
    }

    void create_tenant_index(TenantId t, const DenseMatrix& training) {
        CURATOR_THROW_IF_NOT(!tenants_.count(t), ErrorCode::invalid_argument,
                             "tenant index already exists for tenant " + std::to_string(to_underlying(t)));
        CURATOR_THROW_IF_NOT(!training.empty() && training.dim() == dim_, ErrorCode::insufficient_data,
                             "create_tenant_index: training set empty or of wrong dimension");
        KMeansParams km = params_.kmeans;
        km.seed ^= splitmix64(to_underlying(t));
        tenants_.emplace(t, IvfIndex::train(training, cells_for(training.rows(), params_.n_clusters), km));
    }

    bool has_tenant_index(TenantId t) const noexcept { return tenants_.count(t) != 0; }
    const IvfIndex* tenant_index(TenantId t) const noexcept {
        auto it = tenants_.find(t);
        return it == tenants_.end() ? nullptr : &it->second;
    }
    std::size_t tenant_count() const noexcept { return tenants_.size(); }

    void insert_vector(VectorView x, Label label, TenantId owner) override {
        CURATOR_THROW_IF_NOT(x.size() == dim_, ErrorCode::dimension_mismatch, "insert: dimension mismatch");
        CURATOR_THROW_IF_NOT(!meta_.count(label), ErrorCode::duplicate_label,
                             "label " + std::to_string(to_underlying(label)) + " already exists");
        index_for(owner, x).add(x, label, owner);
        Meta m;
        m.owner = owner;
        m.access.insert(owner);
        meta_.emplace(label, std::move(m));
    }

    void grant_access(Label label, TenantId t) override {
        Meta& m = meta(label);
        CURATOR_THROW_IF_NOT(!m.access.contains(t), ErrorCode::duplicate_grant,
                             "duplicate grant for label " + std::to_string(to_underlying(label)));
        const IvfIndex& src = tenants_.at(m.owner);
        const VectorData copy(src.store().vector(src.store().slot_of(label)).begin(),
                              src.store().vector(src.store().slot_of(label)).end());
        index_for(t, copy).add(copy, label, t);
        m.access.insert(t);
    }

    void revoke_access(Label label, TenantId t) override {
        Meta& m = meta(label);
        CURATOR_THROW_IF_NOT(m.access.contains(t), ErrorCode::access_not_granted,
                             "tenant has no access to label " + std::to_string(to_underlying(label)));
        CURATOR_THROW_IF_NOT(m.owner != t, ErrorCode::owner_revocation, "cannot revoke the owner's access");
        tenants_.at(t).remove(label);
        m.access.erase(t);
    }

    void delete_vector(Label label) override {
        Meta& m = meta(label);
        for (TenantId t : m.access) {
            tenants_.at(t).remove(label);
        }
        meta_.erase(label);
    }

    bool has_access(Label label, TenantId t) const override {
        auto it = meta_.find(label);
        return it != meta_.end() && it->second.access.contains(t);
    }

    std::vector<Neighbor> pt_ivf_search(VectorView x, TenantId t, std::size_t k, std::size_t nprobe,
                                        SearchStats* stats = nullptr) const {
        CURATOR_THROW_IF_NOT(x.size() == dim_, ErrorCode::dimension_mismatch, "search: dimension mismatch");
        CURATOR_THROW_IF_NOT(k >= 1 && nprobe >= 1, ErrorCode::invalid_argument, "k and nprobe must be >= 1");
        auto it = tenants_.find(t);
        if (it == tenants_.end()) {
            return {};
        }
        const IvfIndex& ivf = it->second;
        SearchStats local;
        TopKCollector top(k);
        for (auto c : ivf.probe_cells(x.data(), nprobe, &local)) {
            ++local.clusters_scanned;
            for (Slot s : ivf.cell(c)) {
                ++local.candidates;
                ++local.distance_computations;
                top.push(ivf.store().label(s), l2_sqr(x.data(), ivf.store().vector_ptr(s), dim_));
            }
        }
        if (stats != nullptr) {
            *stats += local;
        }
        return std::move(top).finish();
    }

    std::vector<Neighbor> search(VectorView x, TenantId t, const QueryKnobs& q,
                                 SearchStats* stats = nullptr) const override {
        return pt_ivf_search(x, t, q.k, q.nprobe, stats);
    }

    std::vector<Neighbor> search_intra(VectorView x, TenantId t, const QueryKnobs& q, WorkerPool& pool,
                                       SearchStats* stats = nullptr) const override {
        CURATOR_THROW_IF_NOT(x.size() == dim_, ErrorCode::dimension_mismatch, "search: dimension mismatch");
        auto it = tenants_.find(t);
        if (it == tenants_.end()) {
            return {};
        }
        const IvfIndex& ivf = it->second;
        const auto cells = ivf.probe_cells(x.data(), q.nprobe, stats);
        return detail::scan_cells_parallel(cells, ivf, q.k, pool,
                                           [&](std::uint32_t c, std::size_t b, std::size_t e, TopKCollector& top) {
                                               const auto& list = ivf.cell(c);
                                               for (std::size_t i = b; i < e; ++i) {
                                                   top.push(ivf.store().label(list[i]),
                                                            l2_sqr(x.data(), ivf.store().vector_ptr(list[i]), dim_));
                                               }
                                           });
    }

    MemoryUsage memory_usage() const override {
        MemoryUsage m;
        for (const auto& [t, ivf] : tenants_) {
            m += ivf.structure_bytes();
            m.vector_data += ivf.store().vector_bytes();
            // per-copy id mapping
            m.postings += ivf.store().size() * sizeof(Label);
        }
        for (const auto& [label, meta] : meta_) {
            m.access_lists += sizeof(Label) + sizeof(TenantId) + meta.access.size() * sizeof(TenantId);
        }
        return m;
    }

private:
    struct Meta {
        TenantId owner{};
        AccessList access;
    };

    Meta& meta(Label label) {
        auto it = meta_.find(label);
        CURATOR_THROW_IF_NOT(it != meta_.end(), ErrorCode::unknown_label,
                             "unknown label " + std::to_string(to_underlying(label)));
        return it->second;
    }

    // Tenants first seen through insert or grant get a one-cell index seeded
    // with that vector.
    IvfIndex& index_for(TenantId t, VectorView seed) {
        auto it = tenants_.find(t);
        if (it == tenants_.end()) {
            DenseMatrix m(dim_);
            m.push_back(seed);
            it = tenants_.emplace(t, IvfIndex(std::move(m))).first;
        }
        return it->second;
    }

    std::size_t dim_;
    IvfParams params_;
    std::map<TenantId, IvfIndex> tenants_;
    std::unordered_map<Label, Meta> meta_;
};

}  // namespace curator
