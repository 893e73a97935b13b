#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "curator/indexes.hpp"
#include "curator/io/ground_truth.hpp"
#include "curator/io/synthetic.hpp"
#include "curator/oracle.hpp"

namespace curator::bench {

using ordered_json = nlohmann::ordered_json;

enum class Parallelism { none, inter, intra };

inline std::string_view parallelism_name(Parallelism p) noexcept {
    switch (p) {
        case Parallelism::none: return "none";
        case Parallelism::inter: return "inter";
        case Parallelism::intra: return "intra";
    }
    return "none";
}

inline Parallelism parse_parallelism(std::string_view s) {
    if (s == "none") return Parallelism::none;
    if (s == "inter") return Parallelism::inter;
    if (s == "intra") return Parallelism::intra;
    throw Error(ErrorCode::invalid_argument, "unknown parallelism mode '" + std::string(s) + "'");
}

inline std::string_view sharing_mode_name(io::SharingMode m) noexcept {
    return m == io::SharingMode::distribution ? "distribution" : "per_tenant";
}

/// Declarative description of one benchmark run.
struct BenchConfig {
    IndexType index_type = IndexType::curator;
    /// Directory holding base.fvecs, base_access.jsonl, queries.fvecs and
    /// queries_access.jsonl. When empty the synthetic spec is generated in memory.
    std::string dataset_dir;
    /// Optional precomputed ground-truth file; recomputed when absent.
    std::string ground_truth_path;
    io::SyntheticSpec synthetic;

    /// Training sample size for clustering; 0 trains on every base vector.
    std::size_t train_size = 0;
    /// Cap on <query vector, tenant> pairs; 0 keeps them all.
    std::size_t max_queries = 0;
    std::size_t k = 10;

    std::vector<std::size_t> gamma1_grid = {1, 2, 4, 8, 16};
    std::vector<std::size_t> gamma2_grid = {1, 2, 4, 8};
    std::vector<std::size_t> nprobe_grid = {1, 2, 4, 8, 16, 32, 64, 128, 256};

    CuratorParams curator;
    IvfParams ivf;
    /// Upper bound on cells of one per-tenant index.
    std::size_t pt_max_cells = 256;

    std::vector<std::size_t> threads = {1, 2, 4, 8};
    Parallelism parallelism = Parallelism::none;
    double recall_floor = 0.9;
    std::uint64_t seed = 42;

    std::size_t revoke_ops = 1000;
    std::size_t delete_ops = 1000;
    /// Timed repetitions of each grid point; a query's latency is its fastest pass.
    std::size_t query_passes = 3;

    void validate() const {
        CURATOR_THROW_IF_NOT(recall_floor >= 0.0 && recall_floor <= 1.0, ErrorCode::invalid_argument,
                             "recall_floor must lie in [0, 1]");
        CURATOR_THROW_IF_NOT(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
        CURATOR_THROW_IF_NOT(!gamma1_grid.empty() && !gamma2_grid.empty() && !nprobe_grid.empty(),
                             ErrorCode::invalid_argument, "parameter grids must be non-empty");
        for (auto v : gamma1_grid) CURATOR_THROW_IF_NOT(v >= 1, ErrorCode::invalid_argument, "gamma1 must be >= 1");
        for (auto v : gamma2_grid) CURATOR_THROW_IF_NOT(v >= 1, ErrorCode::invalid_argument, "gamma2 must be >= 1");
        for (auto v : nprobe_grid) CURATOR_THROW_IF_NOT(v >= 1, ErrorCode::invalid_argument, "nprobe must be >= 1");
        for (auto v : threads) CURATOR_THROW_IF_NOT(v >= 1, ErrorCode::invalid_argument, "thread counts must be >= 1");
        curator.validate();
        CURATOR_THROW_IF_NOT(ivf.n_clusters >= 1, ErrorCode::invalid_argument, "ivf.n_clusters must be >= 1");
        CURATOR_THROW_IF_NOT(pt_max_cells >= 1, ErrorCode::invalid_argument, "pt_max_cells must be >= 1");
        CURATOR_THROW_IF_NOT(query_passes >= 1, ErrorCode::invalid_argument, "query_passes must be >= 1");
        if (dataset_dir.empty()) {
            synthetic.validate();
        }
    }
};

// -- JSON -------------------------------------------------------------------

inline ordered_json synthetic_to_json(const io::SyntheticSpec& s) {
    ordered_json j;
    j["n_vectors"] = s.n_vectors;
    j["n_queries"] = s.n_queries;
    j["dimension"] = s.dimension;
    j["n_tenants"] = s.n_tenants;
    j["mode"] = sharing_mode_name(s.mode);
    j["mean_sharing"] = s.mean_sharing;
    j["zipf_exponent"] = s.zipf_exponent;
    j["per_tenant_count"] = s.per_tenant_count;
    j["n_gaussians"] = s.n_gaussians;
    j["gaussian_stddev"] = s.gaussian_stddev;
    j["seed"] = s.seed;
    return j;
}

inline ordered_json config_to_json(const BenchConfig& c) {
    ordered_json j;
    j["index_type"] = index_type_name(c.index_type);
    j["dataset_dir"] = c.dataset_dir;
    j["ground_truth_path"] = c.ground_truth_path;
    j["synthetic"] = synthetic_to_json(c.synthetic);
    j["train_size"] = c.train_size;
    j["max_queries"] = c.max_queries;
    j["k"] = c.k;
    j["gamma1_grid"] = c.gamma1_grid;
    j["gamma2_grid"] = c.gamma2_grid;
    j["nprobe_grid"] = c.nprobe_grid;
    j["curator"] = {{"branching_factor", c.curator.gct.branching_factor},
                    {"max_depth", c.curator.gct.max_depth},
                    {"min_train_points_per_node", c.curator.gct.min_train_points_per_node},
                    {"kmeans_max_iters", c.curator.gct.kmeans_max_iters},
                    {"kmeans_n_init", c.curator.gct.kmeans_n_init},
                    {"seed", c.curator.gct.seed},
                    {"max_shortlist_size", c.curator.max_shortlist_size},
                    {"bloom_bits_per_node", c.curator.bloom_bits_per_node},
                    {"bloom_hash_count", c.curator.bloom_hash_count},
                    {"bloom_update_batching", c.curator.bloom_update_batching},
                    {"bloom_batch_interval", c.curator.bloom_batch_interval}};
    j["ivf"] = {{"n_clusters", c.ivf.n_clusters},
                {"kmeans_max_iters", c.ivf.kmeans.max_iters},
                {"kmeans_n_init", c.ivf.kmeans.n_init},
                {"seed", c.ivf.kmeans.seed}};
    j["pt_max_cells"] = c.pt_max_cells;
    j["threads"] = c.threads;
    j["parallelism"] = parallelism_name(c.parallelism);
    j["recall_floor"] = c.recall_floor;
    j["seed"] = c.seed;
    j["revoke_ops"] = c.revoke_ops;
    j["delete_ops"] = c.delete_ops;
    j["query_passes"] = c.query_passes;
    return j;
}

namespace detail {

template <typename T>
void take(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::parse_error, std::string("config field '") + key + "': " + e.what());
        }
    }
}

inline void reject_unknown(const ordered_json& j, std::initializer_list<const char*> known, const std::string& where) {
    CURATOR_THROW_IF_NOT(j.is_object(), ErrorCode::parse_error, where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
        CURATOR_THROW_IF_NOT(ok, ErrorCode::parse_error, "unknown config field '" + key + "' in " + where);
    }
}

}  // namespace detail

inline BenchConfig config_from_json(const ordered_json& j) {
    using detail::take;
    detail::reject_unknown(j,
                           {"index_type", "dataset_dir", "ground_truth_path", "synthetic", "train_size",
                            "max_queries", "k", "gamma1_grid", "gamma2_grid", "nprobe_grid", "curator", "ivf",
                            "pt_max_cells", "threads", "parallelism", "recall_floor", "seed", "revoke_ops",
                            "delete_ops", "query_passes"},
                           "config");
    BenchConfig c;
    if (j.contains("index_type")) {
        const auto name = j.at("index_type").get<std::string>();
        const auto t = parse_index_type(name);
        CURATOR_THROW_IF_NOT(t.has_value(), ErrorCode::parse_error, "unknown index_type '" + name + "'");
        c.index_type = *t;
    }
    take(j, "dataset_dir", c.dataset_dir);
    take(j, "ground_truth_path", c.ground_truth_path);
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        detail::reject_unknown(s,
                               {"n_vectors", "n_queries", "dimension", "n_tenants", "mode", "mean_sharing",
                                "zipf_exponent", "per_tenant_count", "n_gaussians", "gaussian_stddev", "seed"},
                               "synthetic");
        take(s, "n_vectors", c.synthetic.n_vectors);
        take(s, "n_queries", c.synthetic.n_queries);
        take(s, "dimension", c.synthetic.dimension);
        take(s, "n_tenants", c.synthetic.n_tenants);
        if (s.contains("mode")) {
            const auto m = s.at("mode").get<std::string>();
            CURATOR_THROW_IF_NOT(m == "distribution" || m == "per_tenant", ErrorCode::parse_error,
                                 "synthetic.mode must be 'distribution' or 'per_tenant'");
            c.synthetic.mode = m == "distribution" ? io::SharingMode::distribution : io::SharingMode::per_tenant;
        }
        take(s, "mean_sharing", c.synthetic.mean_sharing);
        take(s, "zipf_exponent", c.synthetic.zipf_exponent);
        take(s, "per_tenant_count", c.synthetic.per_tenant_count);
        take(s, "n_gaussians", c.synthetic.n_gaussians);
        take(s, "gaussian_stddev", c.synthetic.gaussian_stddev);
        take(s, "seed", c.synthetic.seed);
    }
    take(j, "train_size", c.train_size);
    take(j, "max_queries", c.max_queries);
    take(j, "k", c.k);
    take(j, "gamma1_grid", c.gamma1_grid);
    take(j, "gamma2_grid", c.gamma2_grid);
    take(j, "nprobe_grid", c.nprobe_grid);
    if (j.contains("curator")) {
        const auto& p = j.at("curator");
        detail::reject_unknown(p,
                               {"branching_factor", "max_depth", "min_train_points_per_node", "kmeans_max_iters", "kmeans_n_init",
                                "seed", "max_shortlist_size", "bloom_bits_per_node", "bloom_hash_count",
                                "bloom_update_batching", "bloom_batch_interval"},
                               "curator");
        take(p, "branching_factor", c.curator.gct.branching_factor);
        take(p, "max_depth", c.curator.gct.max_depth);
        take(p, "min_train_points_per_node", c.curator.gct.min_train_points_per_node);
        take(p, "kmeans_max_iters", c.curator.gct.kmeans_max_iters);
        take(p, "kmeans_n_init", c.curator.gct.kmeans_n_init);
        take(p, "seed", c.curator.gct.seed);
        take(p, "max_shortlist_size", c.curator.max_shortlist_size);
        take(p, "bloom_bits_per_node", c.curator.bloom_bits_per_node);
        take(p, "bloom_hash_count", c.curator.bloom_hash_count);
        take(p, "bloom_update_batching", c.curator.bloom_update_batching);
        take(p, "bloom_batch_interval", c.curator.bloom_batch_interval);
    }
    if (j.contains("ivf")) {
        const auto& p = j.at("ivf");
        detail::reject_unknown(p, {"n_clusters", "kmeans_max_iters", "kmeans_n_init", "seed"}, "ivf");
        take(p, "n_clusters", c.ivf.n_clusters);
        take(p, "kmeans_max_iters", c.ivf.kmeans.max_iters);
        take(p, "kmeans_n_init", c.ivf.kmeans.n_init);
        take(p, "seed", c.ivf.kmeans.seed);
    }
    take(j, "pt_max_cells", c.pt_max_cells);
    take(j, "threads", c.threads);
    if (j.contains("parallelism")) {
        c.parallelism = parse_parallelism(j.at("parallelism").get<std::string>());
    }
    take(j, "recall_floor", c.recall_floor);
    take(j, "seed", c.seed);
    take(j, "revoke_ops", c.revoke_ops);
    take(j, "delete_ops", c.delete_ops);
    take(j, "query_passes", c.query_passes);
    c.validate();
    return c;
}

inline BenchConfig load_config(const std::filesystem::path& path) {
    const auto bytes = io::read_file_bytes(path);
    ordered_json j;
    try {
        j = ordered_json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a over the canonical JSON form.
inline std::uint64_t config_hash(const BenchConfig& c) {
    const std::string s = config_to_json(c).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

// -- workload ---------------------------------------------------------------

/// Dataset, query pairs and exact answers, prepared before any timing.
struct Workload {
    io::SyntheticDataset data;
    io::QuerySet queries;
    io::GroundTruth truth;
    /// Fraction of base vectors each query tenant can read, averaged over queries.
    double mean_selectivity = 0.0;
};

inline double mean_query_selectivity(const io::SyntheticDataset& ds, const io::QuerySet& qs) {
    if (qs.size() == 0 || ds.base_access.empty()) {
        return 0.0;
    }
    std::unordered_map<TenantId, std::size_t> counts;
    for (const auto& r : ds.base_access) {
        for (TenantId t : r.tenants) {
            ++counts[t];
        }
    }
    double total = 0.0;
    for (TenantId t : qs.tenants) {
        auto it = counts.find(t);
        total += it == counts.end() ? 0.0 : static_cast<double>(it->second);
    }
    return total / static_cast<double>(qs.size()) / static_cast<double>(ds.base_access.size());
}

inline Workload prepare_workload(io::SyntheticDataset data, const BenchConfig& c, WorkerPool& pool) {
    Workload w;
    w.data = std::move(data);
    w.queries = io::make_query_pairs(w.data.queries, w.data.query_access,
                                     c.max_queries == 0 ? std::numeric_limits<std::size_t>::max() : c.max_queries);
    bool loaded = false;
    if (!c.ground_truth_path.empty() && std::filesystem::exists(c.ground_truth_path)) {
        w.truth = io::read_ground_truth(c.ground_truth_path);
        loaded = w.truth.k >= c.k && w.truth.rows.size() >= w.queries.size() &&
                 std::equal(w.queries.tenants.begin(), w.queries.tenants.end(), w.truth.tenants.begin());
        if (loaded) {
            w.truth.rows.resize(w.queries.size());
            w.truth.tenants.resize(w.queries.size());
        }
    }
    if (!loaded) {
        const VectorStore store = io::make_store(w.data.base, w.data.base_access);
        w.truth = io::compute_ground_truth(store, w.queries, c.k, pool);
    }
    w.mean_selectivity = mean_query_selectivity(w.data, w.queries);
    return w;
}

inline Workload load_workload(const BenchConfig& c, WorkerPool& pool) {
    c.validate();
    io::SyntheticDataset ds = c.dataset_dir.empty()
                                      ? io::gen_synthetic(c.synthetic)
                                      : io::read_dataset(io::DatasetPaths::in_directory(c.dataset_dir));
    CURATOR_THROW_IF_NOT(!ds.base.empty(), ErrorCode::insufficient_data, "dataset has no base vectors");
    return prepare_workload(std::move(ds), c, pool);
}

// -- index construction -----------------------------------------------------

inline DenseMatrix training_sample(const DenseMatrix& base, std::size_t n, std::uint64_t seed) {
    if (n == 0 || n >= base.rows()) {
        return base;
    }
    std::vector<std::size_t> idx(base.rows());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    DenseMatrix out(base.dim());
    for (auto i : idx) {
        out.push_back(base.row(i));
    }
    return out;
}

/// Builds (trains) an empty index of the configured type.
inline std::unique_ptr<MultiTenantIndex> make_index(const BenchConfig& c, const io::SyntheticDataset& ds) {
    const DenseMatrix training = training_sample(ds.base, c.train_size, c.seed);
    IvfParams ivf = c.ivf;
    ivf.n_clusters = std::min(ivf.n_clusters, training.rows());
    ivf.nprobe = 1;
    switch (c.index_type) {
        case IndexType::curator:
        case IndexType::curator_no_bfs: {
            auto idx = CuratorIndex::train_index(training, c.curator);
            return std::make_unique<CuratorBackend>(std::move(idx), c.index_type == IndexType::curator
                                                                             ? Traversal::best_first
                                                                             : Traversal::exhaustive);
        }
        case IndexType::mf_ivf: return std::make_unique<MfIvfIndex>(training, ivf);
        case IndexType::flat_ivf_bf: return std::make_unique<FlatIvfBfIndex>(training, ivf, false);
        case IndexType::flat_ivf_bf_sl: return std::make_unique<FlatIvfBfIndex>(training, ivf, true);
        case IndexType::pt_ivf: {
            IvfParams pt = c.ivf;
            pt.n_clusters = c.pt_max_cells;
            pt.nprobe = 1;
            auto idx = std::make_unique<PtIvfIndex>(ds.base.dim(), pt);
            std::map<TenantId, DenseMatrix> per_tenant;
            for (std::size_t i = 0; i < ds.base.rows(); ++i) {
                for (TenantId t : ds.base_access[i].tenants) {
                    auto [it, fresh] = per_tenant.try_emplace(t, ds.base.dim());
                    it->second.push_back(ds.base.row(i));
                }
            }
            for (const auto& [t, vecs] : per_tenant) {
                idx->create_tenant_index(t, vecs);
            }
            return idx;
        }
    }
    throw Error(ErrorCode::invalid_argument, "unsupported index type");
}

/// Search knobs visited by the grid for this index family.
inline std::vector<QueryKnobs> grid_points(const BenchConfig& c) {
    std::vector<QueryKnobs> out;
    if (is_curator_family(c.index_type)) {
        for (auto g1 : c.gamma1_grid) {
            for (auto g2 : c.gamma2_grid) {
                out.push_back(QueryKnobs{c.k, g1, g2, 1});
            }
        }
    } else {
        for (auto np : c.nprobe_grid) {
            out.push_back(QueryKnobs{c.k, 1, 1, np});
        }
    }
    return out;
}

// -- measurement ------------------------------------------------------------

using Clock = std::chrono::steady_clock;

inline double elapsed_us(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::micro>(b - a).count();
}

struct LatencySummary {
    std::size_t count = 0;
    double mean_us = 0.0;
    double p99_us = 0.0;
};

/// Mean and nearest-rank P99.
inline LatencySummary summarize(std::vector<double> samples) {
    LatencySummary s;
    s.count = samples.size();
    if (samples.empty()) {
        return s;
    }
    s.mean_us = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    std::sort(samples.begin(), samples.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(samples.size())));
    s.p99_us = samples[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

struct QueryRow {
    QueryKnobs knobs;
    double recall = 0.0;
    LatencySummary search;
    double throughput_qps = 0.0;
    /// Per-query means of the traversal counters.
    double nodes_visited = 0.0;
    double bloom_queries = 0.0;
    double distance_computations = 0.0;
    double predicate_evaluations = 0.0;
    double access_list_traversals = 0.0;
    double clusters_scanned = 0.0;
};

struct BenchResult {
    std::string index_name;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::size_t n_vectors = 0;
    std::size_t n_queries = 0;
    double realized_sharing = 0.0;
    double mean_selectivity = 0.0;
    double train_seconds = 0.0;
    LatencySummary insert;
    LatencySummary grant;
    /// One insert plus all grants of that vector.
    LatencySummary insert_with_grants;
    LatencySummary revoke;
    LatencySummary del;
    MemoryUsage memory;
    std::vector<QueryRow> rows;
};

namespace detail {

struct PassTiming {
    std::vector<double> latency_us;  // fastest pass per item
    double wall_us = 0.0;            // fastest whole pass
};

/// Calls `one(i, first_pass)` for every item, `passes` times, across `inter`
/// when given. Timing keeps the minimum per item and per pass.
template <typename F>
PassTiming timed_passes(std::size_t n, std::size_t passes, WorkerPool* inter, F&& one) {
    CURATOR_THROW_IF_NOT(passes >= 1, ErrorCode::invalid_argument, "query passes must be >= 1");
    PassTiming t{std::vector<double>(n, std::numeric_limits<double>::infinity()),
                 std::numeric_limits<double>::infinity()};
    for (std::size_t pass = 0; pass < passes; ++pass) {
        auto timed = [&](std::size_t i) {
            const auto a = Clock::now();
            one(i, pass == 0);
            t.latency_us[i] = std::min(t.latency_us[i], elapsed_us(a, Clock::now()));
        };
        const auto start = Clock::now();
        if (inter != nullptr) {
            inter->parallel_for(n, [&](std::size_t i, std::size_t) { timed(i); });
        } else {
            for (std::size_t i = 0; i < n; ++i) timed(i);
        }
        t.wall_us = std::min(t.wall_us, elapsed_us(start, Clock::now()));
    }
    return t;
}

}  // namespace detail

/// Runs every query pair at one knob setting. With several passes each
/// query's latency is its fastest pass and throughput uses the fastest wall
/// time; results and counters come from the first pass.
inline QueryRow run_queries(const MultiTenantIndex& index, const Workload& w, const QueryKnobs& knobs,
                            Parallelism mode, WorkerPool* pool,
                            std::vector<std::vector<Neighbor>>* results_out = nullptr, std::size_t passes = 1) {
    const std::size_t n = w.queries.size();
    std::vector<std::vector<Neighbor>> results(n);
    std::vector<SearchStats> stats(n);
    QueryRow row;
    row.knobs = knobs;
    auto timing = detail::timed_passes(
            n, passes, mode == Parallelism::inter ? pool : nullptr, [&](std::size_t i, bool first) {
                SearchStats s;
                auto r = mode == Parallelism::intra && pool != nullptr
                                 ? index.search_intra(w.queries.vectors.row(i), w.queries.tenants[i], knobs, *pool, &s)
                                 : index.search(w.queries.vectors.row(i), w.queries.tenants[i], knobs, &s);
                if (first) {
                    results[i] = std::move(r);
                    stats[i] = s;
                }
            });
    auto& lat = timing.latency_us;
    const double wall = timing.wall_us;
    row.throughput_qps = wall > 0.0 ? static_cast<double>(n) / (wall * 1e-6) : 0.0;
    double recall = 0.0;
    SearchStats total;
    for (std::size_t i = 0; i < n; ++i) {
        recall += recall_at_k(results[i], w.truth.rows[i], knobs.k);
        total += stats[i];
    }
    const double dn = n == 0 ? 1.0 : static_cast<double>(n);
    row.recall = n == 0 ? 1.0 : recall / dn;
    row.search = summarize(std::move(lat));
    row.nodes_visited = static_cast<double>(total.nodes_visited) / dn;
    row.bloom_queries = static_cast<double>(total.bloom_queries) / dn;
    row.distance_computations = static_cast<double>(total.distance_computations) / dn;
    row.predicate_evaluations = static_cast<double>(total.predicate_evaluations) / dn;
    row.access_list_traversals = static_cast<double>(total.access_list_traversals) / dn;
    row.clusters_scanned = static_cast<double>(total.clusters_scanned) / dn;
    if (results_out != nullptr) {
        *results_out = std::move(results);
    }
    return row;
}

/// Sequential inserts, each followed by the grants of its access list.
inline void load_index(MultiTenantIndex& index, const io::SyntheticDataset& ds, BenchResult* r) {
    std::vector<double> ins, gr, both;
    ins.reserve(ds.base.rows());
    both.reserve(ds.base.rows());
    for (std::size_t i = 0; i < ds.base.rows(); ++i) {
        const io::AccessRecord& rec = ds.base_access[i];
        const auto a = Clock::now();
        index.insert_vector(ds.base.row(i), rec.label, rec.owner);
        auto b = Clock::now();
        ins.push_back(elapsed_us(a, b));
        for (TenantId t : rec.tenants) {
            if (t == rec.owner) {
                continue;
            }
            const auto g0 = Clock::now();
            index.grant_access(rec.label, t);
            b = Clock::now();
            gr.push_back(elapsed_us(g0, b));
        }
        both.push_back(elapsed_us(a, b));
    }
    if (r != nullptr) {
        r->insert = summarize(std::move(ins));
        r->grant = summarize(std::move(gr));
        r->insert_with_grants = summarize(std::move(both));
    }
}

/// Full protocol: train, insert with grants, query every grid point,
/// then timed revokes and deletes on a deterministic sample.
inline BenchResult run_bench(const BenchConfig& c, const Workload& w, WorkerPool* pool = nullptr) {
    c.validate();
    BenchResult r;
    r.config_hash = config_hash(c);
    r.seed = c.seed;
    r.n_vectors = w.data.base.rows();
    r.n_queries = w.queries.size();
    r.realized_sharing = w.data.realized_sharing;
    r.mean_selectivity = w.mean_selectivity;
    CURATOR_THROW_IF_NOT(w.truth.rows.size() == w.queries.size() && w.truth.k >= c.k, ErrorCode::validation_error,
                         "ground truth does not cover the query set");

    const auto t0 = Clock::now();
    auto index = make_index(c, w.data);
    r.train_seconds = elapsed_us(t0, Clock::now()) * 1e-6;
    r.index_name = index->name();
    load_index(*index, w.data, &r);
    r.memory = index->memory_usage();

    for (const QueryKnobs& q : grid_points(c)) {
        r.rows.push_back(run_queries(*index, w, q, c.parallelism, pool, nullptr, c.query_passes));
    }

    std::mt19937_64 rng(c.seed);
    std::vector<std::pair<Label, TenantId>> grants;
    for (const auto& rec : w.data.base_access) {
        for (TenantId t : rec.tenants) {
            if (t != rec.owner) {
                grants.emplace_back(rec.label, t);
            }
        }
    }
    std::shuffle(grants.begin(), grants.end(), rng);
    grants.resize(std::min(grants.size(), c.revoke_ops));
    std::vector<double> rv;
    for (const auto& [label, t] : grants) {
        const auto a = Clock::now();
        index->revoke_access(label, t);
        rv.push_back(elapsed_us(a, Clock::now()));
    }
    r.revoke = summarize(std::move(rv));

    std::vector<Label> labels;
    for (const auto& rec : w.data.base_access) {
        labels.push_back(rec.label);
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    labels.resize(std::min(labels.size(), c.delete_ops));
    std::vector<double> dl;
    for (Label l : labels) {
        const auto a = Clock::now();
        index->delete_vector(l);
        dl.push_back(elapsed_us(a, Clock::now()));
    }
    r.del = summarize(std::move(dl));
    return r;
}

// -- grid search ------------------------------------------------------------

struct GridOutcome {
    bool feasible = false;
    /// Index into BenchResult::rows of the fastest point meeting the floor,
    /// or of the highest-recall point when infeasible.
    std::size_t best = 0;
    double best_recall = 0.0;
    BenchResult result;

    const QueryRow& best_row() const { return result.rows.at(best); }
};

inline GridOutcome select_best(BenchResult result, double recall_floor) {
    GridOutcome g;
    g.result = std::move(result);
    const auto& rows = g.result.rows;
    CURATOR_THROW_IF_NOT(!rows.empty(), ErrorCode::invalid_argument, "grid search over an empty grid");
    std::size_t best_recall_idx = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].recall > rows[best_recall_idx].recall) {
            best_recall_idx = i;
        }
        if (rows[i].recall >= recall_floor &&
            (!g.feasible || rows[i].search.mean_us < rows[g.best].search.mean_us)) {
            g.feasible = true;
            g.best = i;
        }
    }
    g.best_recall = rows[best_recall_idx].recall;
    if (!g.feasible) {
        g.best = best_recall_idx;
    }
    return g;
}

/// Mean latency at exactly `target` recall, read off the recall-vs-latency
/// Pareto frontier by linear interpolation between the two frontier points
/// around it. Empty when no grid point reaches `target`.
inline std::optional<double> latency_at_recall(const BenchResult& r, double target) {
    std::vector<std::pair<double, double>> pts;  // (recall, latency)
    for (const auto& q : r.rows) pts.emplace_back(q.recall, q.search.mean_us);
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    // Walking down in recall, keep points strictly faster than every point above them.
    std::vector<std::pair<double, double>> frontier;
    for (const auto& p : pts) {
        if (frontier.empty() || p.second < frontier.back().second) frontier.push_back(p);
    }
    std::optional<std::pair<double, double>> hi, lo;
    for (const auto& p : frontier) {
        if (p.first >= target) {
            hi = p;
        } else {
            lo = p;
            break;
        }
    }
    if (!hi) return std::nullopt;
    if (!lo || hi->first == target) return hi->second;
    const double f = (target - lo->first) / (hi->first - lo->first);
    return lo->second + f * (hi->second - lo->second);
}

inline GridOutcome grid_search(const BenchConfig& c, const Workload& w, WorkerPool* pool = nullptr) {
    return select_best(run_bench(c, w, pool), c.recall_floor);
}

// -- sweeps -----------------------------------------------------------------

enum class SweepKind { selectivity, tenants };

struct SweepSpec {
    SweepKind kind = SweepKind::selectivity;
    /// Selectivity sweep: total vector counts. Tenant sweep: tenant counts.
    std::vector<std::size_t> values;
    std::vector<IndexType> index_types = {IndexType::curator, IndexType::mf_ivf};
};

struct SweepRow {
    SweepKind kind;
    std::size_t value = 0;
    GridOutcome outcome;
};

/// Selectivity sweep keeps tenants and per-tenant counts fixed while the
/// total grows; tenant sweep keeps totals and per-tenant counts fixed while
/// tenants (and hence the sharing degree) grow.
inline std::vector<SweepRow> sweep(const BenchConfig& base, const SweepSpec& spec, WorkerPool& pool) {
    CURATOR_THROW_IF_NOT(!spec.values.empty(), ErrorCode::invalid_argument, "sweep needs at least one point");
    CURATOR_THROW_IF_NOT(base.dataset_dir.empty(), ErrorCode::invalid_argument,
                         "sweeps generate their own synthetic datasets");
    std::vector<SweepRow> rows;
    for (std::size_t v : spec.values) {
        BenchConfig c = base;
        c.ground_truth_path.clear();
        if (spec.kind == SweepKind::selectivity) {
            c.synthetic.n_vectors = v;
        } else {
            c.synthetic.n_tenants = v;
        }
        const Workload w = load_workload(c, pool);
        for (IndexType t : spec.index_types) {
            c.index_type = t;
            rows.push_back(SweepRow{spec.kind, v, grid_search(c, w)});
        }
    }
    return rows;
}

// -- thread scaling ---------------------------------------------------------

struct ThreadRow {
    Parallelism mode = Parallelism::inter;
    std::size_t workers = 1;
    double throughput_qps = 0.0;
    double mean_latency_us = 0.0;
    /// Mean latency over queries scanning at least 16 clusters.
    double mean_latency_wide_us = 0.0;
    std::size_t wide_queries = 0;
    bool identical_to_single = true;
};

struct ThreadScaling {
    QueryKnobs knobs;
    std::vector<ThreadRow> rows;
};

inline bool same_results(const std::vector<std::vector<Neighbor>>& a, const std::vector<std::vector<Neighbor>>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) {
            return false;
        }
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            if (a[i][j].label != b[i][j].label ||
                std::bit_cast<std::uint32_t>(a[i][j].distance) != std::bit_cast<std::uint32_t>(b[i][j].distance)) {
                return false;
            }
        }
    }
    return true;
}

/// Throughput (inter) or per-query latency (intra) against worker count at
/// fixed knobs, checking every run against the single-worker result sets.
inline ThreadScaling threads_scaling(const BenchConfig& c, const Workload& w, const QueryKnobs& knobs) {
    c.validate();
    CURATOR_THROW_IF_NOT(c.parallelism != Parallelism::none, ErrorCode::invalid_argument,
                         "threads scaling needs parallelism 'inter' or 'intra'");
    auto index = make_index(c, w.data);
    load_index(*index, w.data, nullptr);
    ThreadScaling out;
    out.knobs = knobs;

    std::vector<std::vector<Neighbor>> reference;
    std::vector<std::uint8_t> wide(w.queries.size(), 0);
    for (std::size_t i = 0; i < w.queries.size(); ++i) {
        SearchStats s;
        reference.push_back(index->search(w.queries.vectors.row(i), w.queries.tenants[i], knobs, &s));
        wide[i] = s.clusters_scanned >= 16 ? 1 : 0;
    }

    for (std::size_t workers : c.threads) {
        WorkerPool pool(workers);
        ThreadRow row;
        row.mode = c.parallelism;
        row.workers = workers;
        std::vector<std::vector<Neighbor>> results(w.queries.size());
        const bool inter = c.parallelism == Parallelism::inter;
        const auto timing = detail::timed_passes(
                w.queries.size(), c.query_passes, inter ? &pool : nullptr, [&](std::size_t i, bool first) {
                    auto r = inter ? index->search(w.queries.vectors.row(i), w.queries.tenants[i], knobs)
                                   : index->search_intra(w.queries.vectors.row(i), w.queries.tenants[i], knobs, pool);
                    if (first) results[i] = std::move(r);
                });
        const auto& lat = timing.latency_us;
        const double wall = timing.wall_us;
        row.throughput_qps = wall > 0.0 ? static_cast<double>(w.queries.size()) / (wall * 1e-6) : 0.0;
        double sum = 0.0, wide_sum = 0.0;
        for (std::size_t i = 0; i < lat.size(); ++i) {
            sum += lat[i];
            if (wide[i]) {
                wide_sum += lat[i];
                ++row.wide_queries;
            }
        }
        row.mean_latency_us = lat.empty() ? 0.0 : sum / static_cast<double>(lat.size());
        row.mean_latency_wide_us = row.wide_queries == 0 ? 0.0 : wide_sum / static_cast<double>(row.wide_queries);
        row.identical_to_single = same_results(results, reference);
        out.rows.push_back(row);
    }
    return out;
}

// -- CSV --------------------------------------------------------------------

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

inline std::string query_csv_header() {
    return "config_hash,seed,index,n_vectors,n_queries,sharing,selectivity,k,gamma1,gamma2,nprobe,recall,"
           "search_mean_us,search_p99_us,throughput_qps,nodes_visited,bloom_queries,distance_computations,"
           "predicate_evaluations,access_list_traversals,clusters_scanned,insert_mean_us,insert_p99_us,"
           "grant_mean_us,grant_p99_us,insert_grant_mean_us,revoke_mean_us,revoke_p99_us,delete_mean_us,"
           "delete_p99_us,mem_vector,mem_tree,mem_bloom,mem_shortlists,mem_access_lists,mem_postings,mem_total";
}

inline std::string query_csv_row(const BenchResult& r, const QueryRow& q) {
    std::ostringstream os;
    os << hex64(r.config_hash) << ',' << r.seed << ',' << r.index_name << ',' << r.n_vectors << ','
       << r.n_queries << ',' << fmt(r.realized_sharing) << ',' << fmt(r.mean_selectivity) << ',' << q.knobs.k
       << ',' << q.knobs.gamma1 << ',' << q.knobs.gamma2 << ',' << q.knobs.nprobe << ',' << fmt(q.recall) << ','
       << fmt(q.search.mean_us) << ',' << fmt(q.search.p99_us) << ',' << fmt(q.throughput_qps) << ','
       << fmt(q.nodes_visited) << ',' << fmt(q.bloom_queries) << ',' << fmt(q.distance_computations) << ','
       << fmt(q.predicate_evaluations) << ',' << fmt(q.access_list_traversals) << ',' << fmt(q.clusters_scanned)
       << ',' << fmt(r.insert.mean_us) << ',' << fmt(r.insert.p99_us) << ',' << fmt(r.grant.mean_us) << ','
       << fmt(r.grant.p99_us) << ',' << fmt(r.insert_with_grants.mean_us) << ',' << fmt(r.revoke.mean_us) << ','
       << fmt(r.revoke.p99_us) << ',' << fmt(r.del.mean_us) << ',' << fmt(r.del.p99_us) << ','
       << r.memory.vector_data << ',' << r.memory.tree << ',' << r.memory.bloom_filters << ','
       << r.memory.shortlists << ',' << r.memory.access_lists << ',' << r.memory.postings << ','
       << r.memory.total();
    return os.str();
}

inline std::string bench_csv(const BenchResult& r) {
    std::string s = query_csv_header() + "\n";
    for (const auto& q : r.rows) {
        s += query_csv_row(r, q) + "\n";
    }
    return s;
}

/// Every grid point (the recall-vs-latency frontier); `selected` marks the chosen one.
inline std::string grid_csv(const GridOutcome& g) {
    std::string s = "selected,feasible,best_recall," + query_csv_header() + "\n";
    const std::string prefix = std::string(g.feasible ? "1" : "0") + "," + fmt(g.best_recall) + ",";
    for (std::size_t i = 0; i < g.result.rows.size(); ++i) {
        s += std::string(i == g.best ? "1," : "0,") + prefix + query_csv_row(g.result, g.result.rows[i]) + "\n";
    }
    return s;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string s = "sweep,value,feasible,best_recall," + query_csv_header() + "\n";
    for (const auto& r : rows) {
        s += std::string(r.kind == SweepKind::selectivity ? "selectivity" : "tenants") + "," +
             std::to_string(r.value) + "," + (r.outcome.feasible ? "1" : "0") + "," + fmt(r.outcome.best_recall) +
             "," + query_csv_row(r.outcome.result, r.outcome.best_row()) + "\n";
    }
    return s;
}

inline std::string threads_csv(const BenchConfig& c, const ThreadScaling& t) {
    std::ostringstream os;
    os << "config_hash,seed,index,mode,workers,gamma1,gamma2,nprobe,throughput_qps,mean_latency_us,"
          "mean_latency_wide_us,wide_queries,identical\n";
    for (const auto& r : t.rows) {
        os << hex64(config_hash(c)) << ',' << c.seed << ',' << index_type_name(c.index_type) << ','
           << parallelism_name(r.mode) << ',' << r.workers << ',' << t.knobs.gamma1 << ',' << t.knobs.gamma2 << ','
           << t.knobs.nprobe << ',' << fmt(r.throughput_qps) << ',' << fmt(r.mean_latency_us) << ','
           << fmt(r.mean_latency_wide_us) << ',' << r.wide_queries << ',' << (r.identical_to_single ? 1 : 0)
           << '\n';
    }
    return os.str();
}

}  // namespace curator::bench
