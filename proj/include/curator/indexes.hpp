#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "curator/curator_index.hpp"
#include "curator/ivf.hpp"
#include "curator/multi_tenant_index.hpp"

namespace curator {

enum class IndexType { curator, mf_ivf, pt_ivf, flat_ivf_bf, flat_ivf_bf_sl, curator_no_bfs };

inline std::string_view index_type_name(IndexType t) noexcept {
    switch (t) {
        case IndexType::curator: return "curator";
        case IndexType::mf_ivf: return "mf_ivf";
        case IndexType::pt_ivf: return "pt_ivf";
        case IndexType::flat_ivf_bf: return "flat_ivf_bf";
        case IndexType::flat_ivf_bf_sl: return "flat_ivf_bf_sl";
        case IndexType::curator_no_bfs: return "curator_no_bfs";
    }
    return "unknown";
}

inline std::optional<IndexType> parse_index_type(std::string_view s) noexcept {
    for (auto t : {IndexType::curator, IndexType::mf_ivf, IndexType::pt_ivf, IndexType::flat_ivf_bf,
                   IndexType::flat_ivf_bf_sl, IndexType::curator_no_bfs}) {
        if (index_type_name(t) == s) {
            return t;
        }
    }
    return std::nullopt;
}

inline bool is_curator_family(IndexType t) noexcept {
    return t == IndexType::curator || t == IndexType::curator_no_bfs;
}

/// CuratorIndex behind the common interface. The no-BFS ablation shares the
/// index and only swaps the first-stage traversal.
class CuratorBackend : public MultiTenantIndex {
public:
    CuratorBackend(CuratorIndex index, Traversal traversal = Traversal::best_first)
            : index_(std::move(index)), traversal_(traversal) {}

    std::string name() const override {
        return traversal_ == Traversal::best_first ? "curator" : "curator_no_bfs";
    }
    std::size_t dim() const override { return index_.dim(); }

    CuratorIndex& index() noexcept { return index_; }
    const CuratorIndex& index() const noexcept { return index_; }

    void insert_vector(VectorView x, Label label, TenantId owner) override {
        index_.insert_vector(x, label, owner);
    }
    void grant_access(Label label, TenantId t) override { index_.grant_access(label, t); }
    void revoke_access(Label label, TenantId t) override { index_.revoke_access(label, t); }
    void delete_vector(Label label) override { index_.delete_vector(label); }
    bool has_access(Label label, TenantId t) const override { return index_.has_access(label, t); }

    std::vector<Neighbor> search(VectorView x, TenantId t, const QueryKnobs& q,
                                 SearchStats* stats = nullptr) const override {
        return index_.knn_search(x, t, SearchParams{q.k, q.gamma1, q.gamma2}, stats, traversal_);
    }

    std::vector<Neighbor> search_intra(VectorView x, TenantId t, const QueryKnobs& q, WorkerPool& pool,
                                       SearchStats* stats = nullptr) const override {
        if (traversal_ != Traversal::best_first) {
            return search(x, t, q, stats);
        }
        return index_.knn_search_intra(x, t, SearchParams{q.k, q.gamma1, q.gamma2}, pool, 16, stats);
    }

    MemoryUsage memory_usage() const override { return index_.memory_usage(); }

private:
    CuratorIndex index_;
    Traversal traversal_;
};

}  // namespace curator
