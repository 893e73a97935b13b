#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <unordered_map>
#include <vector>

#include "curator/bloom_filter.hpp"
#include "curator/cluster_tree.hpp"
#include "curator/core.hpp"
#include "curator/thread_pool.hpp"
#include "curator/vector_store.hpp"

namespace curator {

struct CuratorParams {
    GctParams gct;
    std::size_t max_shortlist_size = 32;
    std::size_t bloom_bits_per_node = 1024;
    std::size_t bloom_hash_count = 4;
    /// Defer Bloom recomputation after shortlist removal until this many
    /// removals have accumulated at a node.
    bool bloom_update_batching = false;
    std::size_t bloom_batch_interval = 8;

    void validate() const {
        gct.validate();
        CURATOR_THROW_IF_NOT(max_shortlist_size >= 1, ErrorCode::invalid_argument,
                             "max_shortlist_size must be >= 1");
        CURATOR_THROW_IF_NOT(bloom_bits_per_node >= 64 && bloom_bits_per_node % 64 == 0,
                             ErrorCode::invalid_argument,
                             "bloom_bits_per_node must be a positive multiple of 64");
        CURATOR_THROW_IF_NOT(bloom_hash_count >= 1 && bloom_hash_count <= BloomKey::kMaxHashes,
                             ErrorCode::invalid_argument, "bloom_hash_count must be in [1, 16]");
        CURATOR_THROW_IF_NOT(bloom_batch_interval >= 1, ErrorCode::invalid_argument,
                             "bloom_batch_interval must be >= 1");
    }
};

struct SearchParams {
    std::size_t k = 10;
    std::size_t gamma1 = 1;
    std::size_t gamma2 = 1;

    void validate() const {
        CURATOR_THROW_IF_NOT(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
        CURATOR_THROW_IF_NOT(gamma1 >= 1 && gamma2 >= 1, ErrorCode::invalid_argument,
                             "gamma1 and gamma2 must be >= 1");
    }
};

/// How the first search stage walks the tenant's sub-tree.
enum class Traversal {
    best_first,  ///< stop once gamma1*gamma2*k shortlist entries are found
    exhaustive,  ///< visit every node of the tenant's sub-tree
};

/// Multi-tenant index: one shared clustering tree; each tenant's sub-tree is
/// encoded by per-node Bloom filters (internal nodes) and shortlists (leaves).
///
/// Single writer, multiple readers: const member functions may run
/// concurrently with each other, never with a mutation.
class CuratorIndex {
public:
    using Shortlists = std::unordered_map<TenantId, std::vector<Slot>>;

    CuratorIndex(ClusterTree tree, CuratorParams params)
            : params_(std::move(params)), tree_(std::move(tree)), store_(tree_.dim()) {
        params_.validate();
        nodes_.resize(tree_.size());
        for (auto& n : nodes_) {
            n.bloom = TenantBloomFilter(params_.bloom_bits_per_node, params_.bloom_hash_count);
        }
    }

    static CuratorIndex train_index(const DenseMatrix& training_vectors, const CuratorParams& params) {
        params.validate();
        return CuratorIndex(build_gct(training_vectors, params.gct), params);
    }

    std::size_t dim() const noexcept { return tree_.dim(); }
    std::size_t size() const noexcept { return store_.size(); }
    const CuratorParams& params() const noexcept { return params_; }
    const ClusterTree& tree() const noexcept { return tree_; }
    const VectorStore& store() const noexcept { return store_; }

    // -- mutations ---------------------------------------------------------

    void insert_vector(VectorView x, Label label, TenantId owner) {
        CURATOR_THROW_IF_NOT(x.size() == dim(), ErrorCode::dimension_mismatch,
                             "insert_vector: dimension " + std::to_string(x.size()) +
                                     " != index dimension " + std::to_string(dim()));
        const NodeId leaf = tree_.descend(x);
        const Slot slot = store_.add(label, x, owner, leaf);
        nodes_[leaf].bucket.push_back(slot);
        add_to_tenant_tree(slot, owner);
    }

    void grant_access(Label label, TenantId t) {
        const Slot slot = store_.slot_of(label);
        CURATOR_THROW_IF_NOT(store_.access(slot).insert(t), ErrorCode::duplicate_grant,
                             "tenant " + std::to_string(to_underlying(t)) +
                                     " already has access to label " +
                                     std::to_string(to_underlying(label)));
        add_to_tenant_tree(slot, t);
    }

    void revoke_access(Label label, TenantId t) {
        const Slot slot = store_.slot_of(label);
        CURATOR_THROW_IF_NOT(store_.access(slot).contains(t), ErrorCode::access_not_granted,
                             "tenant " + std::to_string(to_underlying(t)) +
                                     " has no access to label " + std::to_string(to_underlying(label)));
        CURATOR_THROW_IF_NOT(store_.owner(slot) != t, ErrorCode::owner_revocation,
                             "cannot revoke the owner's access to label " +
                                     std::to_string(to_underlying(label)));
        store_.access(slot).erase(t);
        remove_from_tenant_tree(slot, t);
    }

    void delete_vector(Label label) {
        const Slot slot = store_.slot_of(label);
        const std::vector<TenantId> tenants = store_.access(slot).tenants();
        for (TenantId t : tenants) {
            store_.access(slot).erase(t);
            remove_from_tenant_tree(slot, t);
        }
        auto& bucket = nodes_[store_.leaf(slot)].bucket;
        auto it = std::find(bucket.begin(), bucket.end(), slot);
        if (it != bucket.end()) {
            *it = bucket.back();
            bucket.pop_back();
        }
        store_.remove(label);
    }

    /// Recomputes every Bloom filter from the shortlists, clearing any
    /// deferred removals (batched mode).
    void flush_bloom_updates() {
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            recompute_bloom(static_cast<NodeId>(i));
            nodes_[i].pending_removals = 0;
        }
    }

    // -- lookups -----------------------------------------------------------

    VectorRecord get_vector(Label label) const { return store_.record(label); }

    bool has_access(Label label, TenantId t) const noexcept { return store_.has_access(label, t); }

    bool has_ownership(Label label, TenantId t) const noexcept {
        const Slot s = store_.find_slot(label);
        return s != kInvalidSlot && store_.owner(s) == t;
    }

    // -- search ------------------------------------------------------------

    std::vector<Neighbor> knn_search(VectorView x, TenantId t, const SearchParams& sp,
                                     SearchStats* stats = nullptr,
                                     Traversal traversal = Traversal::best_first) const {
        check_query(x, sp);
        SearchStats local;
        const auto clusters = find_candidate_clusters(x, t, sp, traversal, local);
        TopKCollector top(sp.k);
        const std::size_t want = sp.gamma1 * sp.k;
        std::size_t gathered = 0;
        for (const auto& c : clusters) {
            const auto& list = *c.list;
            for (Slot s : list) {
                top.push(store_.label(s), l2_sqr(x.data(), store_.vector_ptr(s), dim()));
            }
            gathered += list.size();
            local.clusters_scanned += 1;
            local.distance_computations += list.size();
            if (gathered >= want) {
                break;
            }
        }
        local.candidates = gathered;
        if (stats != nullptr) {
            *stats += local;
        }
        return std::move(top).finish();
    }

    /// Intra-query parallel search: the shortlists chosen by the second stage
    /// are cut into chunks of `chunk_size` labels and scanned by the pool.
    /// The first stage stays sequential. Results equal knn_search exactly.
    std::vector<Neighbor> knn_search_intra(VectorView x, TenantId t, const SearchParams& sp,
                                           WorkerPool& pool, std::size_t chunk_size = 16,
                                           SearchStats* stats = nullptr) const {
        check_query(x, sp);
        CURATOR_THROW_IF_NOT(chunk_size >= 1, ErrorCode::invalid_argument, "chunk_size must be >= 1");
        SearchStats local;
        const auto clusters = find_candidate_clusters(x, t, sp, Traversal::best_first, local);

        struct Chunk {
            const std::vector<Slot>* list;
            std::size_t begin, end;
        };
        std::vector<Chunk> chunks;
        const std::size_t want = sp.gamma1 * sp.k;
        std::size_t gathered = 0;
        for (const auto& c : clusters) {
            const std::size_t n = c.list->size();
            for (std::size_t b = 0; b < n; b += chunk_size) {
                chunks.push_back({c.list, b, std::min(n, b + chunk_size)});
            }
            gathered += n;
            local.clusters_scanned += 1;
            local.distance_computations += n;
            if (gathered >= want) {
                break;
            }
        }
        local.candidates = gathered;

        std::vector<TopKCollector> partial(pool.size(), TopKCollector(sp.k));
        pool.parallel_for(chunks.size(), [&](std::size_t i, std::size_t worker) {
            const Chunk& ch = chunks[i];
            for (std::size_t j = ch.begin; j < ch.end; ++j) {
                const Slot s = (*ch.list)[j];
                partial[worker].push(store_.label(s), l2_sqr(x.data(), store_.vector_ptr(s), dim()));
            }
        });
        TopKCollector top(sp.k);
        for (const auto& p : partial) {
            top.merge(p);
        }
        if (stats != nullptr) {
            *stats += local;
        }
        return std::move(top).finish();
    }

    /// Inter-query parallel search over a batch; queries are scheduled
    /// first-come-first-serve across the pool.
    std::vector<std::vector<Neighbor>> search_batch(const DenseMatrix& queries,
                                                    std::span<const TenantId> tenants,
                                                    const SearchParams& sp, WorkerPool& pool) const {
        CURATOR_THROW_IF_NOT(queries.rows() == tenants.size(), ErrorCode::invalid_argument,
                             "search_batch: one tenant per query required");
        std::vector<std::vector<Neighbor>> out(queries.rows());
        pool.parallel_for(queries.rows(), [&](std::size_t i, std::size_t) {
            out[i] = knn_search(queries.row(i), tenants[i], sp);
        });
        return out;
    }

    // -- accounting and introspection ---------------------------------------

    MemoryUsage memory_usage() const noexcept {
        MemoryUsage m;
        m.vector_data = store_.vector_bytes();
        m.access_lists = store_.access_list_bytes();
        m.tree = tree_.byte_size();
        for (const auto& n : nodes_) {
            m.tree += n.bucket.size() * sizeof(Slot);
            m.bloom_filters += n.bloom.byte_size();
            for (const auto& [t, list] : n.shortlists) {
                m.shortlists += sizeof(TenantId) + list.size() * sizeof(Slot);
            }
        }
        return m;
    }

    const Shortlists& shortlists_at(NodeId n) const noexcept { return nodes_[n].shortlists; }

    const std::vector<Slot>* shortlist(NodeId n, TenantId t) const noexcept {
        auto it = nodes_[n].shortlists.find(t);
        return it == nodes_[n].shortlists.end() ? nullptr : &it->second;
    }

    const TenantBloomFilter& bloom_at(NodeId n) const noexcept { return nodes_[n].bloom; }
    const std::vector<Slot>& bucket_at(NodeId n) const noexcept { return nodes_[n].bucket; }
    std::uint32_t pending_bloom_removals(NodeId n) const noexcept { return nodes_[n].pending_removals; }

    /// True when t has a shortlist at n or anywhere below it.
    bool subtree_has_shortlist(NodeId n, TenantId t) const {
        return subtree_has_shortlist(n, t, key_for(t));
    }

    /// Merge criterion: p holds no shortlist for t, none of its children is
    /// internal for t, and its children's shortlists for t are non-empty and
    /// total fewer than max_shortlist_size entries.
    bool merge_applicable(NodeId p, TenantId t) const {
        const BloomKey key = key_for(t);
        const auto state = child_merge_state(p, t, key);
        return !nodes_[p].shortlists.count(t) && !tree_.node(p).is_leaf() && !state.any_internal &&
               state.total > 0 && state.total < params_.max_shortlist_size;
    }

    BloomKey key_for(TenantId t) const {
        return BloomKey(t, params_.bloom_bits_per_node, params_.bloom_hash_count);
    }

private:
    friend struct SnapshotAccess;

    struct NodeState {
        TenantBloomFilter bloom;
        Shortlists shortlists;
        std::vector<Slot> bucket;
        std::uint32_t pending_removals = 0;
    };

    struct CandidateCluster {
        float distance;
        NodeId node;
        const std::vector<Slot>* list;
    };

    void check_query(VectorView x, const SearchParams& sp) const {
        CURATOR_THROW_IF_NOT(x.size() == dim(), ErrorCode::dimension_mismatch,
                             "knn_search: query dimension " + std::to_string(x.size()) +
                                     " != index dimension " + std::to_string(dim()));
        sp.validate();
    }

    // Stage 1: best-first walk over the tenant's sub-tree, ordered by
    // (centroid distance, node id). Returns the leaves found, sorted the same way.
    std::vector<CandidateCluster> find_candidate_clusters(VectorView x, TenantId t, const SearchParams& sp,
                                                          Traversal traversal, SearchStats& stats) const {
        using Entry = std::pair<float, NodeId>;
        auto greater = [](const Entry& a, const Entry& b) {
            return a.first != b.first ? a.first > b.first : a.second > b.second;
        };
        std::priority_queue<Entry, std::vector<Entry>, decltype(greater)> frontier(greater);
        std::vector<CandidateCluster> clusters;
        if (store_.empty()) {
            return clusters;
        }
        const BloomKey key = key_for(t);
        const std::size_t target = sp.gamma1 * sp.gamma2 * sp.k;
        std::size_t n_vecs = 0;
        frontier.emplace(0.0f, tree_.root());
        while (!frontier.empty() && (traversal == Traversal::exhaustive || n_vecs < target)) {
            const auto [d, id] = frontier.top();
            frontier.pop();
            ++stats.nodes_visited;
            const NodeState& ns = nodes_[id];
            ++stats.bloom_queries;
            if (!ns.bloom.contains(key)) {
                continue;  // outside the tenant's tree
            }
            auto it = ns.shortlists.find(t);
            if (it != ns.shortlists.end()) {
                clusters.push_back({d, id, &it->second});
                n_vecs += it->second.size();
                continue;
            }
            for (NodeId c : tree_.node(id).children) {
                frontier.emplace(l2_sqr(x.data(), tree_.centroid_ptr(c), dim()), c);
                ++stats.distance_computations;
            }
        }
        std::sort(clusters.begin(), clusters.end(), [](const CandidateCluster& a, const CandidateCluster& b) {
            return a.distance != b.distance ? a.distance < b.distance : a.node < b.node;
        });
        return clusters;
    }

    // Descends the root-to-leaf(v) path. The first node that either holds a
    // shortlist for t or lies outside t's tree receives v.
    void add_to_tenant_tree(Slot slot, TenantId t) {
        const BloomKey key = key_for(t);
        const std::vector<NodeId> path = tree_.path_to(store_.leaf(slot));
        for (std::size_t i = 0; i < path.size(); ++i) {
            const NodeId n = path[i];
            NodeState& ns = nodes_[n];
            auto it = ns.shortlists.find(t);
            if (it != ns.shortlists.end()) {
                it->second.push_back(slot);
                if (it->second.size() > params_.max_shortlist_size && !tree_.node(n).is_leaf()) {
                    split_shortlist(n, t, key);
                }
                return;
            }
            if (!ns.bloom.contains(key) || tree_.node(n).is_leaf()) {
                ns.shortlists.emplace(t, std::vector<Slot>{slot});
                for (std::size_t j = 0; j <= i; ++j) {
                    nodes_[path[j]].bloom.insert(key);
                }
                // A Bloom false positive above n may have led the descent
                // past the true boundary; merging restores the tree shape.
                merge_upward(tree_.node(n).parent, t, key);
                return;
            }
        }
    }

    // Distributes an overfull shortlist among the children by each vector's
    // path; children that end up overfull are split again.
    void split_shortlist(NodeId n, TenantId t, const BloomKey& key) {
        std::vector<Slot> list = std::move(nodes_[n].shortlists.at(t));
        nodes_[n].shortlists.erase(t);
        std::vector<NodeId> touched;
        for (Slot s : list) {
            const NodeId c = tree_.child_toward(n, store_.leaf(s));
            auto& child_list = nodes_[c].shortlists[t];
            if (child_list.empty()) {
                touched.push_back(c);
            }
            child_list.push_back(s);
        }
        std::sort(touched.begin(), touched.end());
        for (NodeId c : touched) {
            nodes_[c].bloom.insert(key);
        }
        for (NodeId c : touched) {
            if (nodes_[c].shortlists.at(t).size() > params_.max_shortlist_size && !tree_.node(c).is_leaf()) {
                split_shortlist(c, t, key);
            }
        }
    }

    void remove_from_tenant_tree(Slot slot, TenantId t) {
        const BloomKey key = key_for(t);
        const std::vector<NodeId> path = tree_.path_to(store_.leaf(slot));
        for (NodeId n : path) {
            auto it = nodes_[n].shortlists.find(t);
            if (it == nodes_[n].shortlists.end()) {
                continue;
            }
            auto& list = it->second;
            auto pos = std::find(list.begin(), list.end(), slot);
            CURATOR_THROW_IF_NOT(pos != list.end(), ErrorCode::validation_error,
                                 "shortlist layout corrupted: vector missing from its tenant shortlist");
            *pos = list.back();
            list.pop_back();
            if (list.empty()) {
                nodes_[n].shortlists.erase(it);
                on_shortlist_removed(n);
            }
            merge_upward(tree_.node(n).parent, t, key);
            return;
        }
        throw Error(ErrorCode::validation_error, "shortlist layout corrupted: no shortlist holds the vector");
    }

    struct ChildMergeState {
        std::size_t total = 0;
        bool any_internal = false;
    };

    ChildMergeState child_merge_state(NodeId p, TenantId t, const BloomKey& key) const {
        ChildMergeState st;
        for (NodeId c : tree_.node(p).children) {
            auto it = nodes_[c].shortlists.find(t);
            if (it != nodes_[c].shortlists.end()) {
                st.total += it->second.size();
                continue;
            }
            if (!nodes_[c].bloom.contains(key)) {
                continue;
            }
            for (NodeId g : tree_.node(c).children) {
                if (subtree_has_shortlist(g, t, key)) {
                    st.any_internal = true;
                    return st;
                }
            }
        }
        return st;
    }

    // Bloom bits only prune here; the answer itself is exact.
    bool subtree_has_shortlist(NodeId n, TenantId t, const BloomKey& key) const {
        if (nodes_[n].shortlists.count(t)) {
            return true;
        }
        if (!nodes_[n].bloom.contains(key)) {
            return false;
        }
        for (NodeId c : tree_.node(n).children) {
            if (subtree_has_shortlist(c, t, key)) {
                return true;
            }
        }
        return false;
    }

    // Walks upward from p, folding children's shortlists into their parent
    // while the merge criterion holds.
    void merge_upward(NodeId p, TenantId t, const BloomKey& key) {
        for (; p != kInvalidNode; p = tree_.node(p).parent) {
            if (nodes_[p].shortlists.count(t)) {
                break;
            }
            const ChildMergeState st = child_merge_state(p, t, key);
            if (st.any_internal || st.total >= params_.max_shortlist_size) {
                break;
            }
            if (st.total == 0) {
                continue;  // p is outside t's tree now
            }
            std::vector<Slot> merged;
            merged.reserve(st.total);
            for (NodeId c : tree_.node(p).children) {
                auto it = nodes_[c].shortlists.find(t);
                if (it == nodes_[c].shortlists.end()) {
                    continue;
                }
                merged.insert(merged.end(), it->second.begin(), it->second.end());
                nodes_[c].shortlists.erase(it);
            }
            nodes_[p].shortlists.emplace(t, std::move(merged));
            for (NodeId a = p; a != kInvalidNode; a = tree_.node(a).parent) {
                nodes_[a].bloom.insert(key);
            }
            for (NodeId c : tree_.node(p).children) {
                if (!nodes_[c].bloom.contains(key)) {
                    continue;
                }
                on_shortlist_removed(c);
            }
        }
    }

    void on_shortlist_removed(NodeId n) {
        if (params_.bloom_update_batching) {
            if (++nodes_[n].pending_removals < params_.bloom_batch_interval) {
                return;
            }
        }
        propagate_bloom_recompute(n);
    }

    // Recomputes n, then its ancestors, stopping at the first filter that
    // does not change.
    void propagate_bloom_recompute(NodeId n) {
        for (; n != kInvalidNode; n = tree_.node(n).parent) {
            nodes_[n].pending_removals = 0;
            if (!recompute_bloom(n)) {
                break;
            }
        }
    }

    /// BF(n) = union of children's filters plus tenants holding a shortlist at n.
    /// Returns true when the filter changed.
    bool recompute_bloom(NodeId n) {
        TenantBloomFilter fresh(params_.bloom_bits_per_node, params_.bloom_hash_count);
        for (NodeId c : tree_.node(n).children) {
            fresh |= nodes_[c].bloom;
        }
        for (const auto& [tenant, list] : nodes_[n].shortlists) {
            fresh.insert(key_for(tenant));
        }
        if (fresh == nodes_[n].bloom) {
            return false;
        }
        nodes_[n].bloom = std::move(fresh);
        return true;
    }

    CuratorParams params_;
    ClusterTree tree_;
    VectorStore store_;
    std::vector<NodeState> nodes_;
};

}  // namespace curator
