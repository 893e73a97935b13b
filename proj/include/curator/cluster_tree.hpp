#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "curator/core.hpp"
#include "curator/kmeans.hpp"
#include "curator/vector_store.hpp"

namespace curator {

struct GctParams {
    std::size_t branching_factor = 8;
    std::size_t max_depth = 8;
    std::size_t min_train_points_per_node = 64;
    std::size_t kmeans_max_iters = 20;
    std::size_t kmeans_n_init = 1;
    std::uint64_t seed = 1234;

    void validate() const {
        CURATOR_THROW_IF_NOT(branching_factor >= 2, ErrorCode::invalid_argument,
                             "branching_factor must be >= 2");
        CURATOR_THROW_IF_NOT(max_depth >= 1, ErrorCode::invalid_argument, "max_depth must be >= 1");
        CURATOR_THROW_IF_NOT(min_train_points_per_node >= branching_factor,
                             ErrorCode::invalid_argument,
                             "min_train_points_per_node must be >= branching_factor");
        CURATOR_THROW_IF_NOT(kmeans_max_iters >= 1, ErrorCode::invalid_argument,
                             "kmeans_max_iters must be >= 1");
        CURATOR_THROW_IF_NOT(kmeans_n_init >= 1, ErrorCode::invalid_argument, "kmeans_n_init must be >= 1");
    }
};

struct TreeNode {
    NodeId id = kInvalidNode;
    NodeId parent = kInvalidNode;
    std::uint32_t depth = 0;
    /// Children ids are consecutive, so their centroids are adjacent rows.
    std::vector<NodeId> children;

    bool is_leaf() const noexcept { return children.empty(); }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Hierarchical k-means tree. Structure is fixed once built.
class ClusterTree {
public:
    ClusterTree() = default;
    ClusterTree(std::vector<TreeNode> nodes, DenseMatrix centroids)
            : nodes_(std::move(nodes)), centroids_(std::move(centroids)) {
        validate_structure();
    }

    std::size_t dim() const noexcept { return centroids_.dim(); }
    std::size_t size() const noexcept { return nodes_.size(); }
    NodeId root() const noexcept { return 0; }

    const TreeNode& node(NodeId id) const noexcept { return nodes_[id]; }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    VectorView centroid(NodeId id) const noexcept { return centroids_.row(id); }
    const float* centroid_ptr(NodeId id) const noexcept { return centroids_.row_ptr(id); }
    const DenseMatrix& centroids() const noexcept { return centroids_; }

    std::size_t height() const noexcept {
        std::size_t h = 0;
        for (const auto& n : nodes_) {
            h = std::max<std::size_t>(h, n.depth);
        }
        return h;
    }

    std::size_t leaf_count() const noexcept {
        return static_cast<std::size_t>(
                std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
    }

    /// Child whose centroid is closest to x; ties go to the smaller node id.
    NodeId nearest_child(NodeId id, VectorView x) const {
        CURATOR_THROW_IF_NOT(id < nodes_.size(), ErrorCode::invalid_argument, "nearest_child: bad node id");
        const TreeNode& n = nodes_[id];
        CURATOR_THROW_IF_NOT(!n.is_leaf(), ErrorCode::invalid_argument,
                             "nearest_child called on a leaf node");
        CURATOR_THROW_IF_NOT(x.size() == dim(), ErrorCode::dimension_mismatch,
                             "nearest_child: dimension mismatch");
        return nearest_child_unchecked(n, x.data());
    }

    NodeId nearest_child_unchecked(const TreeNode& n, const float* x) const noexcept {
        NodeId best = n.children.front();
        float best_d = std::numeric_limits<float>::infinity();
        for (NodeId c : n.children) {
            const float d = l2_sqr(x, centroids_.row_ptr(c), dim());
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }

    /// Greedy root-to-leaf descent.
    NodeId descend(VectorView x) const {
        CURATOR_THROW_IF_NOT(x.size() == dim(), ErrorCode::dimension_mismatch,
                             "descend: dimension mismatch");
        NodeId cur = root();
        while (!nodes_[cur].is_leaf()) {
            cur = nearest_child_unchecked(nodes_[cur], x.data());
        }
        return cur;
    }

    /// Node ids from the root down to and including `leaf`.
    std::vector<NodeId> path_to(NodeId leaf) const {
        std::vector<NodeId> path;
        for (NodeId cur = leaf; cur != kInvalidNode; cur = nodes_[cur].parent) {
            path.push_back(cur);
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    /// Child of `ancestor` on the way to `descendant` (which must lie strictly below).
    NodeId child_toward(NodeId ancestor, NodeId descendant) const noexcept {
        NodeId cur = descendant;
        while (nodes_[cur].parent != ancestor) {
            cur = nodes_[cur].parent;
        }
        return cur;
    }

    std::size_t byte_size() const noexcept {
        std::size_t bytes = centroids_.data().size() * sizeof(float);
        for (const auto& n : nodes_) {
            bytes += sizeof(NodeId) * 2 + sizeof(std::uint32_t) + n.children.size() * sizeof(NodeId);
        }
        return bytes;
    }

    friend bool operator==(const ClusterTree&, const ClusterTree&) = default;

private:
    void validate_structure() const {
        CURATOR_THROW_IF_NOT(!nodes_.empty(), ErrorCode::validation_error, "empty tree");
        CURATOR_THROW_IF_NOT(centroids_.rows() == nodes_.size(), ErrorCode::validation_error,
                             "centroid count does not match node count");
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const TreeNode& n = nodes_[i];
            CURATOR_THROW_IF_NOT(n.id == i, ErrorCode::validation_error, "node ids must be dense");
            CURATOR_THROW_IF_NOT((i == 0) == (n.parent == kInvalidNode), ErrorCode::validation_error,
                                 "only the root may lack a parent");
            for (std::size_t j = 0; j < n.children.size(); ++j) {
                const NodeId c = n.children[j];
                CURATOR_THROW_IF_NOT(c < nodes_.size() && c > i && nodes_[c].parent == i,
                                     ErrorCode::validation_error, "inconsistent child link");
                CURATOR_THROW_IF_NOT(j == 0 || c == n.children[j - 1] + 1, ErrorCode::validation_error,
                                     "children must have consecutive ids");
            }
        }
    }

    std::vector<TreeNode> nodes_;
    DenseMatrix centroids_;
};

namespace detail {

struct GctBuilder {
    const DenseMatrix& points;
    const GctParams& params;
    std::vector<TreeNode> nodes;
    DenseMatrix centroids;

    void split(NodeId id, const std::vector<std::uint32_t>& members) {
        if (nodes[id].depth >= params.max_depth || members.size() < params.min_train_points_per_node ||
            members.size() < params.branching_factor) {
            return;
        }
        DenseMatrix sub(points.dim());
        sub.data().reserve(members.size() * points.dim());
        for (auto m : members) {
            sub.push_back(points.row(m));
        }
        KMeansParams kp;
        kp.n_clusters = params.branching_factor;
        kp.max_iters = params.kmeans_max_iters;
        kp.n_init = params.kmeans_n_init;
        kp.seed = params.seed ^ splitmix64(static_cast<std::uint64_t>(id) + 1);
        KMeansResult km = kmeans(sub, kp);

        const NodeId first = static_cast<NodeId>(nodes.size());
        for (std::size_t c = 0; c < params.branching_factor; ++c) {
            TreeNode child;
            child.id = first + static_cast<NodeId>(c);
            child.parent = id;
            child.depth = nodes[id].depth + 1;
            nodes[id].children.push_back(child.id);
            nodes.push_back(std::move(child));
            centroids.push_back(km.centroids.row(c));
        }

        // Route by the final centroids so that greedy descent of a training
        // point agrees with the partition used to train the subtree.
        std::vector<std::vector<std::uint32_t>> parts(params.branching_factor);
        for (std::size_t i = 0; i < members.size(); ++i) {
            const std::uint32_t c = nearest_row(km.centroids, sub.row_ptr(i), nullptr);
            parts[c].push_back(members[i]);
        }
        for (std::size_t c = 0; c < params.branching_factor; ++c) {
            split(first + static_cast<NodeId>(c), parts[c]);
        }
    }
};

}  // namespace detail

/// Trains the global clustering tree by recursive k-means. The root
/// centroid is the training mean; children get consecutive ids.
inline ClusterTree build_gct(const DenseMatrix& training_set, const GctParams& params) {
    params.validate();
    CURATOR_THROW_IF_NOT(!training_set.empty(), ErrorCode::insufficient_data, "build_gct: empty training set");
    CURATOR_THROW_IF_NOT(training_set.rows() >= params.min_train_points_per_node,
                         ErrorCode::insufficient_data,
                         "build_gct: " + std::to_string(training_set.rows()) +
                                 " training points, need at least " +
                                 std::to_string(params.min_train_points_per_node));
    for (std::size_t i = 0; i < training_set.rows(); ++i) {
        CURATOR_THROW_IF_NOT(all_finite(training_set.row(i)), ErrorCode::non_finite_value,
                             "build_gct: non-finite training vector");
    }

    const std::size_t dim = training_set.dim();
    detail::GctBuilder b{training_set, params, {}, DenseMatrix(dim)};
    std::vector<double> mean(dim, 0.0);
    for (std::size_t i = 0; i < training_set.rows(); ++i) {
        const float* x = training_set.row_ptr(i);
        for (std::size_t j = 0; j < dim; ++j) {
            mean[j] += x[j];
        }
    }
    VectorData root_centroid(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        root_centroid[j] = static_cast<float>(mean[j] / static_cast<double>(training_set.rows()));
    }
    TreeNode root;
    root.id = 0;
    b.nodes.push_back(root);
    b.centroids.push_back(root_centroid);

    std::vector<std::uint32_t> all(training_set.rows());
    std::iota(all.begin(), all.end(), 0u);
    b.split(0, all);
    return ClusterTree(std::move(b.nodes), std::move(b.centroids));
}

}  // namespace curator
