#pragma once

#include <unordered_map>
#include <vector>

#include "curator/core.hpp"
#include "curator/thread_pool.hpp"
#include "curator/vector_store.hpp"

namespace curator {

/// Exact filtered k-NN by linear scan over every record t can access.
inline std::vector<Neighbor> exact_filtered_knn(const VectorStore& store, VectorView x, TenantId t,
                                                std::size_t k) {
    CURATOR_THROW_IF_NOT(x.size() == store.dim() || store.empty(), ErrorCode::dimension_mismatch,
                         "exact_filtered_knn: query dimension " + std::to_string(x.size()) +
                                 " != store dimension " + std::to_string(store.dim()));
    TopKCollector top(k);
    store.for_each([&](Slot s) {
        if (store.access(s).contains(t)) {
            top.push(store.label(s), l2_sqr(x.data(), store.vector_ptr(s), x.size()));
        }
    });
    return std::move(top).finish();
}

/// Batched ground truth. Accessible sets are gathered once per tenant and
/// queries are spread over the pool; output is independent of worker count.
inline std::vector<std::vector<Neighbor>> exact_filtered_knn_batch(const VectorStore& store,
                                                                   const DenseMatrix& queries,
                                                                   std::span<const TenantId> tenants,
                                                                   std::size_t k, WorkerPool& pool) {
    CURATOR_THROW_IF_NOT(queries.rows() == tenants.size(), ErrorCode::invalid_argument,
                         "exact_filtered_knn_batch: one tenant per query required");
    CURATOR_THROW_IF_NOT(queries.empty() || queries.dim() == store.dim() || store.empty(),
                         ErrorCode::dimension_mismatch, "exact_filtered_knn_batch: dimension mismatch");
    std::unordered_map<TenantId, std::vector<Slot>> accessible;
    for (TenantId t : tenants) {
        accessible.try_emplace(t);
    }
    store.for_each([&](Slot s) {
        for (TenantId t : store.access(s)) {
            auto it = accessible.find(t);
            if (it != accessible.end()) {
                it->second.push_back(s);
            }
        }
    });
    std::vector<std::vector<Neighbor>> out(queries.rows());
    pool.parallel_for(queries.rows(), [&](std::size_t i, std::size_t) {
        TopKCollector top(k);
        const float* q = queries.row_ptr(i);
        for (Slot s : accessible.at(tenants[i])) {
            top.push(store.label(s), l2_sqr(q, store.vector_ptr(s), store.dim()));
        }
        out[i] = std::move(top).finish();
    });
    return out;
}

/// |returned ∩ truth| / min(k, |truth|); 1.0 when the tenant has nothing.
inline double recall_at_k(const std::vector<Neighbor>& returned, const std::vector<Neighbor>& truth,
                          std::size_t k) {
    const std::size_t denom = std::min(k, truth.size());
    if (denom == 0) {
        return 1.0;
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, returned.size()); ++i) {
        for (std::size_t j = 0; j < denom; ++j) {
            if (truth[j].label == returned[i].label) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(denom);
}

}  // namespace curator
