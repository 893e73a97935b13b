#pragma once

#include <random>
#include <vector>

#include "curator/core.hpp"
#include "curator/curator_index.hpp"

namespace curator::fx {

inline DenseMatrix random_matrix(std::size_t n, std::size_t dim, std::uint64_t seed, float scale = 1.0f) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> nd(0.0f, scale);
    DenseMatrix m(n, dim);
    for (float& f : m.data()) {
        f = nd(rng);
    }
    return m;
}

inline VectorData random_vector(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<float> nd(0.0f, 1.0f);
    VectorData v(dim);
    for (float& f : v) {
        f = nd(rng);
    }
    return v;
}

/// Small tree with tiny shortlists so splits and merges happen often.
inline CuratorParams small_params(std::size_t max_shortlist = 4) {
    CuratorParams p;
    p.gct.branching_factor = 3;
    p.gct.max_depth = 3;
    p.gct.min_train_points_per_node = 6;
    p.gct.seed = 7;
    p.max_shortlist_size = max_shortlist;
    p.bloom_bits_per_node = 64;
    p.bloom_hash_count = 2;
    return p;
}

inline bool same_neighbors(const std::vector<Neighbor>& a, const std::vector<Neighbor>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].label != b[i].label || a[i].distance != b[i].distance) {
            return false;
        }
    }
    return true;
}

}  // namespace curator::fx
