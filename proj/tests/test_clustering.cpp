#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "curator/cluster_tree.hpp"
#include "curator/kmeans.hpp"
#include "support/fixtures.hpp"

using namespace curator;

namespace {

DenseMatrix square_corners() {
    return DenseMatrix::from_rows({{0.0f, 0.0f}, {2.0f, 0.0f}, {0.0f, 1.0f}, {2.0f, 1.0f}});
}

// Best objective over all 2-partitions of the points.
double brute_force_best_2(const DenseMatrix& pts) {
    const std::size_t n = pts.rows();
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
        double obj = 0.0;
        for (int side = 0; side < 2; ++side) {
            std::vector<double> mean(pts.dim(), 0.0);
            std::size_t cnt = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) == static_cast<std::uint32_t>(side)) {
                    for (std::size_t j = 0; j < pts.dim(); ++j) mean[j] += pts.row(i)[j];
                    ++cnt;
                }
            }
            for (auto& m : mean) m /= static_cast<double>(cnt);
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) == static_cast<std::uint32_t>(side)) {
                    for (std::size_t j = 0; j < pts.dim(); ++j) {
                        const double d = pts.row(i)[j] - mean[j];
                        obj += d * d;
                    }
                }
            }
        }
        best = std::min(best, obj);
    }
    return best;
}

}  // namespace

TEST(KMeans, SquareCornersMatchesBruteForce) {
    const auto pts = square_corners();
    KMeansParams p;
    p.n_clusters = 2;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        p.seed = seed;
        const auto r = kmeans(pts, p);
        ASSERT_EQ(r.centroids.rows(), 2u);
        EXPECT_NEAR(r.objective(), brute_force_best_2(pts), 1e-6) << "seed " << seed;
        // centroids are the midpoints of the two short sides
        std::vector<float> xs{r.centroids.row(0)[0], r.centroids.row(1)[0]};
        std::sort(xs.begin(), xs.end());
        EXPECT_FLOAT_EQ(xs[0], 0.0f);
        EXPECT_FLOAT_EQ(xs[1], 2.0f);
        EXPECT_FLOAT_EQ(r.centroids.row(0)[1], 0.5f);
    }
}

TEST(KMeans, ExactlyKPointsGivesZeroObjective) {
    const auto pts = DenseMatrix::from_rows({{0.0f}, {5.0f}, {9.0f}});
    KMeansParams p;
    p.n_clusters = 3;
    const auto r = kmeans(pts, p);
    EXPECT_EQ(r.objective(), 0.0);
    std::vector<float> c{r.centroids.row(0)[0], r.centroids.row(1)[0], r.centroids.row(2)[0]};
    std::sort(c.begin(), c.end());
    EXPECT_EQ(c, (std::vector<float>{0.0f, 5.0f, 9.0f}));
}

TEST(KMeans, IdenticalPointsGiveCoincidentCentroids) {
    const auto pts = DenseMatrix::from_rows({{1.0f, 1.0f}, {1.0f, 1.0f}, {1.0f, 1.0f}});
    KMeansParams p;
    p.n_clusters = 3;
    const auto r = kmeans(pts, p);
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(r.centroids.row(c)[0], 1.0f);
    }
}

TEST(KMeans, ErrorsOnTooFewOrEmpty) {
    KMeansParams p;
    p.n_clusters = 4;
    EXPECT_THROW(kmeans(DenseMatrix::from_rows({{1.0f}, {2.0f}}), p), Error);
    EXPECT_THROW(kmeans(DenseMatrix(3), p), Error);
}

TEST(KMeans, ObjectiveNonIncreasingAndDeterministic) {
    const auto pts = fx::random_matrix(2000, 8, 5);
    KMeansParams p;
    p.n_clusters = 16;
    p.seed = 99;
    const auto a = kmeans(pts, p);
    const auto b = kmeans(pts, p);
    for (std::size_t i = 1; i < a.objective_history.size(); ++i) {
        EXPECT_LE(a.objective_history[i], a.objective_history[i - 1] * (1 + 1e-9));
    }
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.assignments, b.assignments);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        EXPECT_EQ(a.assignments[i], detail::nearest_row(a.centroids, pts.row_ptr(i), nullptr));
    }
}

TEST(Gct, HandComputableOneDimensional) {
    const auto pts = DenseMatrix::from_rows({{-1.0f}, {-0.9f}, {0.9f}, {1.0f}});
    GctParams g;
    g.branching_factor = 2;
    g.max_depth = 1;
    g.min_train_points_per_node = 2;
    const auto tree = build_gct(pts, g);
    ASSERT_EQ(tree.size(), 3u);
    EXPECT_NEAR(tree.centroid(0)[0], 0.0f, 1e-6);
    std::vector<float> c{tree.centroid(1)[0], tree.centroid(2)[0]};
    std::sort(c.begin(), c.end());
    EXPECT_NEAR(c[0], -0.95f, 1e-6);
    EXPECT_NEAR(c[1], 0.95f, 1e-6);

    const VectorData x{0.5f};
    EXPECT_NEAR(tree.centroid(tree.nearest_child(0, x))[0], 0.95f, 1e-6);
    EXPECT_THROW(tree.nearest_child(1, x), Error);
}

TEST(Gct, NearestChildTieGoesToSmallerId) {
    const auto pts = DenseMatrix::from_rows({{-1.0f}, {-1.0f}, {1.0f}, {1.0f}});
    GctParams g;
    g.branching_factor = 2;
    g.max_depth = 1;
    g.min_train_points_per_node = 2;
    const auto tree = build_gct(pts, g);
    EXPECT_EQ(tree.nearest_child(0, VectorData{0.0f}), 1u);
}

TEST(Gct, DepthOneHasBranchingLeaves) {
    const auto pts = fx::random_matrix(500, 4, 1);
    GctParams g;
    g.branching_factor = 5;
    g.max_depth = 1;
    g.min_train_points_per_node = 10;
    const auto tree = build_gct(pts, g);
    EXPECT_EQ(tree.height(), 1u);
    EXPECT_EQ(tree.leaf_count(), 5u);
}

TEST(Gct, EightGaussiansRecoverMeans) {
    const double sigma = 0.1;
    std::mt19937_64 rng(17);
    std::normal_distribution<float> nd(0.0f, static_cast<float>(sigma));
    std::vector<VectorData> means;
    for (int i = 0; i < 8; ++i) {
        means.push_back({static_cast<float>((i & 1) * 10), static_cast<float>(((i >> 1) & 1) * 10),
                         static_cast<float>(((i >> 2) & 1) * 10)});
    }
    DenseMatrix pts(3);
    for (int rep = 0; rep < 200; ++rep) {
        for (const auto& m : means) {
            pts.push_back(VectorData{m[0] + nd(rng), m[1] + nd(rng), m[2] + nd(rng)});
        }
    }
    GctParams g;
    g.branching_factor = 2;
    g.max_depth = 3;
    g.min_train_points_per_node = 4;
    const auto tree = build_gct(pts, g);
    ASSERT_EQ(tree.leaf_count(), 8u);
    std::vector<bool> used(8, false);
    for (const auto& n : tree.nodes()) {
        if (!n.is_leaf()) continue;
        bool matched = false;
        for (std::size_t m = 0; m < 8; ++m) {
            const double d = std::sqrt(squared_l2(tree.centroid(n.id), means[m]));
            if (!used[m] && d <= 3 * sigma) {
                used[m] = true;
                matched = true;
                break;
            }
        }
        EXPECT_TRUE(matched) << "leaf " << n.id;
    }
}

TEST(Gct, NearestChildMatchesLinearScanAndDeterministic) {
    const auto pts = fx::random_matrix(400, 6, 2);
    GctParams g;
    g.branching_factor = 4;
    g.max_depth = 3;
    g.min_train_points_per_node = 8;
    const auto a = build_gct(pts, g);
    const auto b = build_gct(pts, g);
    EXPECT_TRUE(a == b);
    std::mt19937_64 rng(4);
    for (int q = 0; q < 200; ++q) {
        const auto x = fx::random_vector(6, rng);
        for (const auto& n : a.nodes()) {
            if (n.is_leaf()) continue;
            NodeId best = n.children[0];
            float best_d = squared_l2(a.centroid(best), x);
            for (NodeId c : n.children) {
                const float d = squared_l2(a.centroid(c), x);
                if (d < best_d) {
                    best = c;
                    best_d = d;
                }
            }
            EXPECT_EQ(a.nearest_child(n.id, x), best);
        }
    }
    // every training point lands on a leaf within the depth bound
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        const NodeId leaf = a.descend(pts.row(i));
        EXPECT_TRUE(a.node(leaf).is_leaf());
        EXPECT_LE(a.node(leaf).depth, g.max_depth);
    }
}

TEST(Gct, InsufficientTrainingSetErrors) {
    GctParams g;
    EXPECT_THROW(build_gct(fx::random_matrix(10, 2, 1), g), Error);
    EXPECT_THROW(build_gct(DenseMatrix(2), g), Error);
}
