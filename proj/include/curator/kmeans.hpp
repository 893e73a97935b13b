#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "curator/core.hpp"

namespace curator {

struct KMeansParams {
    std::size_t n_clusters = 8;
    std::size_t max_iters = 20;
    std::uint64_t seed = 1234;
    /// Independent seeded runs; the lowest final objective wins.
    std::size_t n_init = 3;
};

struct KMeansResult {
    DenseMatrix centroids;
    std::vector<std::uint32_t> assignments;
    /// Objective after seeding, then after every Lloyd iteration.
    std::vector<double> objective_history;
    std::size_t iterations = 0;

    double objective() const noexcept {
        return objective_history.empty() ? 0.0 : objective_history.back();
    }
};

namespace detail {

inline std::uint32_t nearest_row(const DenseMatrix& centroids, const float* x, float* best_out) {
    std::uint32_t best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const float d = l2_sqr(x, centroids.row_ptr(c), centroids.dim());
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(c);
        }
    }
    if (best_out != nullptr) {
        *best_out = best_d;
    }
    return best;
}

// k-means++ seeding. When every remaining point coincides with a chosen
// center the D^2 weights vanish, and a uniform pick yields a coincident
// centroid.
inline DenseMatrix kmeanspp_seed(const DenseMatrix& points, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = points.rows();
    DenseMatrix centroids(points.dim());
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    centroids.push_back(points.row(pick(rng)));

    std::vector<double> min_d(n);
    for (std::size_t i = 0; i < n; ++i) {
        min_d[i] = l2_sqr(points.row_ptr(i), centroids.row_ptr(0), points.dim());
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (centroids.rows() < k) {
        double total = 0.0;
        for (double d : min_d) {
            total += d;
        }
        std::size_t chosen = 0;
        if (total <= 0.0) {
            chosen = pick(rng);
        } else {
            double r = unit(rng) * total;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                r -= min_d[i];
                if (r < 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.push_back(points.row(chosen));
        const float* c = centroids.row_ptr(centroids.rows() - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = l2_sqr(points.row_ptr(i), c, points.dim());
            if (d < min_d[i]) {
                min_d[i] = d;
            }
        }
    }
    return centroids;
}

inline double assignment_objective(const DenseMatrix& points, const DenseMatrix& centroids,
                                   const std::vector<std::uint32_t>& assign) {
    double obj = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        obj += l2_sqr(points.row_ptr(i), centroids.row_ptr(assign[i]), points.dim());
    }
    return obj;
}

inline KMeansResult kmeans_run(const DenseMatrix& points, const KMeansParams& params, std::uint64_t seed) {
    const std::size_t n = points.rows();
    const std::size_t dim = points.dim();
    const std::size_t k = params.n_clusters;
    std::mt19937_64 rng(seed);

    KMeansResult res;
    res.centroids = detail::kmeanspp_seed(points, k, rng);
    res.assignments.assign(n, 0);
    std::vector<float> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        res.assignments[i] = detail::nearest_row(res.centroids, points.row_ptr(i), &dist[i]);
    }
    res.objective_history.push_back(detail::assignment_objective(points, res.centroids, res.assignments));

    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
        // update step
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t c = res.assignments[i];
            ++counts[c];
            const float* x = points.row_ptr(i);
            for (std::size_t j = 0; j < dim; ++j) {
                sums[c * dim + j] += x[j];
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                continue;
            }
            auto row = res.centroids.row(c);
            for (std::size_t j = 0; j < dim; ++j) {
                row[j] = static_cast<float>(sums[c * dim + j] / static_cast<double>(counts[c]));
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            dist[i] = l2_sqr(points.row_ptr(i), res.centroids.row_ptr(res.assignments[i]), dim);
        }
        // empty-cluster repair
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) {
                continue;
            }
            std::size_t far = n;
            float far_d = -1.0f;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[res.assignments[i]] > 1 && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            }
            if (far == n) {
                break;
            }
            --counts[res.assignments[far]];
            res.assignments[far] = static_cast<std::uint32_t>(c);
            counts[c] = 1;
            dist[far] = 0.0f;
            std::copy_n(points.row_ptr(far), dim, res.centroids.row(c).begin());
        }

        // assignment step
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            float d;
            const std::uint32_t c = detail::nearest_row(res.centroids, points.row_ptr(i), &d);
            if (c != res.assignments[i] && d < dist[i]) {
                res.assignments[i] = c;
                changed = true;
            }
        }
        res.iterations = iter + 1;
        res.objective_history.push_back(
                detail::assignment_objective(points, res.centroids, res.assignments));
        if (!changed) {
            break;
        }
    }
    return res;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding. Stops after max_iters or when no
/// assignment changes. Empty clusters take the point farthest from its
/// centroid, so exactly n_clusters centroids are always returned.
/// The best of n_init runs is returned.
inline KMeansResult kmeans(const DenseMatrix& points, const KMeansParams& params) {
    CURATOR_THROW_IF_NOT(params.n_clusters >= 1, ErrorCode::invalid_argument,
                         "kmeans: n_clusters must be positive");
    CURATOR_THROW_IF_NOT(params.max_iters >= 1, ErrorCode::invalid_argument,
                         "kmeans: max_iters must be positive");
    CURATOR_THROW_IF_NOT(params.n_init >= 1, ErrorCode::invalid_argument,
                         "kmeans: n_init must be positive");
    CURATOR_THROW_IF_NOT(!points.empty(), ErrorCode::insufficient_data, "kmeans: empty input");
    CURATOR_THROW_IF_NOT(points.rows() >= params.n_clusters, ErrorCode::insufficient_data,
                         "kmeans: " + std::to_string(points.rows()) + " points for " +
                                 std::to_string(params.n_clusters) + " clusters");
    std::mt19937_64 seeder(params.seed);
    KMeansResult best = detail::kmeans_run(points, params, params.seed);
    for (std::size_t run = 1; run < params.n_init; ++run) {
        KMeansResult r = detail::kmeans_run(points, params, seeder());
        if (r.objective() < best.objective()) {
            best = std::move(r);
        }
    }
    return best;
}

}  // namespace curator
