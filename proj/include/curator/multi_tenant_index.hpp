#pragma once

#include <string>
#include <vector>

#include "curator/core.hpp"
#include "curator/thread_pool.hpp"

namespace curator {

/// Search knobs understood by every index family. Curator reads k and the
/// gammas; the IVF families read k and nprobe.
struct QueryKnobs {
    std::size_t k = 10;
    std::size_t gamma1 = 1;
    std::size_t gamma2 = 1;
    std::size_t nprobe = 1;
};

/// Common surface used by the benchmark harness to drive any index family
/// through the same workload.
class MultiTenantIndex {
public:
    virtual ~MultiTenantIndex() = default;

    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;

    virtual void insert_vector(VectorView x, Label label, TenantId owner) = 0;
    virtual void grant_access(Label label, TenantId t) = 0;
    virtual void revoke_access(Label label, TenantId t) = 0;
    virtual void delete_vector(Label label) = 0;
    virtual bool has_access(Label label, TenantId t) const = 0;

    virtual std::vector<Neighbor> search(VectorView x, TenantId t, const QueryKnobs& q,
                                         SearchStats* stats = nullptr) const = 0;

    /// Single query with the scan phase spread over the pool.
    virtual std::vector<Neighbor> search_intra(VectorView x, TenantId t, const QueryKnobs& q,
                                               WorkerPool& pool, SearchStats* stats = nullptr) const {
        (void)pool;
        return search(x, t, q, stats);
    }

    virtual MemoryUsage memory_usage() const = 0;
};

}  // namespace curator
