// Minimal use of the library: train, insert, share, search, revoke.
#include <cstdio>
#include <random>

#include "curator/curator_index.hpp"

using namespace curator;

int main() {
    constexpr std::size_t dim = 16;
    std::mt19937_64 rng(7);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    DenseMatrix data(5000, dim);
    for (float& f : data.data()) f = nd(rng);

    CuratorParams params;
    params.gct.branching_factor = 8;
    params.gct.max_depth = 3;
    auto index = CuratorIndex::train_index(data, params);

    // Tenant i % 10 owns vector i; every third vector is shared with tenant 0.
    for (std::size_t i = 0; i < data.rows(); ++i) {
        index.insert_vector(data.row(i), Label{i}, TenantId{static_cast<std::uint32_t>(i % 10)});
        if (i % 3 == 0 && i % 10 != 0) index.grant_access(Label{i}, TenantId{0});
    }

    VectorData query(dim);
    for (float& f : query) f = nd(rng);
    const SearchParams sp{.k = 5, .gamma1 = 8, .gamma2 = 2};
    for (const Neighbor& n : index.knn_search(query, TenantId{0}, sp)) {
        std::printf("label %llu  distance %.4f\n", static_cast<unsigned long long>(n.label), n.distance);
    }

    index.revoke_access(Label{3}, TenantId{0});
    index.delete_vector(Label{4});
    std::printf("vectors %zu  tree nodes %zu\n", index.size(), index.tree().size());
    return 0;
}
