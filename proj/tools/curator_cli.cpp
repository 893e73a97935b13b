// Benchmark and data-preparation command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "curator/bench.hpp"
#include "curator/io/ground_truth.hpp"
#include "curator/io/snapshot.hpp"
#include "curator/io/synthetic.hpp"

namespace {

using namespace curator;
namespace fs = std::filesystem;

std::string default_data_dir() {
    const char* env = std::getenv("CURATOR_DATA_DIR");
    return env != nullptr ? std::string(env) : std::string();
}

struct CommonOptions {
    std::string config_path;
    std::string data_dir = default_data_dir();
    std::string gt_path;
    std::string index = "curator";
    std::size_t k = 0;
    std::vector<std::size_t> gamma1, gamma2, nprobe, threads;
    std::string parallelism;
    double recall_floor = -1.0;
    std::int64_t seed = -1;
    std::int64_t train_size = -1;
    std::int64_t max_queries = -1;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (flags override it)");
    cmd->add_option("--data-dir", o.data_dir, "dataset directory (default: $CURATOR_DATA_DIR)");
    cmd->add_option("--gt", o.gt_path, "ground-truth file");
    cmd->add_option("--index", o.index, "curator|mf_ivf|pt_ivf|flat_ivf_bf|flat_ivf_bf_sl|curator_no_bfs");
    cmd->add_option("--k", o.k, "neighbors per query");
    cmd->add_option("--gamma1", o.gamma1, "gamma1 grid")->delimiter(',');
    cmd->add_option("--gamma2", o.gamma2, "gamma2 grid")->delimiter(',');
    cmd->add_option("--nprobe", o.nprobe, "nprobe grid")->delimiter(',');
    cmd->add_option("--threads", o.threads, "worker counts")->delimiter(',');
    cmd->add_option("--parallelism", o.parallelism, "none|inter|intra");
    cmd->add_option("--recall-floor", o.recall_floor, "minimum recall for grid selection");
    cmd->add_option("--seed", o.seed, "benchmark seed");
    cmd->add_option("--train-size", o.train_size, "training sample size (0 = all)");
    cmd->add_option("--max-queries", o.max_queries, "cap on query pairs (0 = all)");
    cmd->add_option("--out", o.out, "output path (default: stdout)");
}

bench::BenchConfig resolve(const CommonOptions& o) {
    bench::BenchConfig c = o.config_path.empty() ? bench::BenchConfig{} : bench::load_config(o.config_path);
    if (!o.data_dir.empty()) c.dataset_dir = o.data_dir;
    if (!o.gt_path.empty()) c.ground_truth_path = o.gt_path;
    if (o.index != "curator" || o.config_path.empty()) {
        const auto t = parse_index_type(o.index);
        CURATOR_THROW_IF_NOT(t.has_value(), ErrorCode::invalid_argument, "unknown index type '" + o.index + "'");
        c.index_type = *t;
    }
    if (o.k != 0) c.k = o.k;
    if (!o.gamma1.empty()) c.gamma1_grid = o.gamma1;
    if (!o.gamma2.empty()) c.gamma2_grid = o.gamma2;
    if (!o.nprobe.empty()) c.nprobe_grid = o.nprobe;
    if (!o.threads.empty()) c.threads = o.threads;
    if (!o.parallelism.empty()) c.parallelism = bench::parse_parallelism(o.parallelism);
    if (o.recall_floor >= 0.0) c.recall_floor = o.recall_floor;
    if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
    if (o.train_size >= 0) c.train_size = static_cast<std::size_t>(o.train_size);
    if (o.max_queries >= 0) c.max_queries = static_cast<std::size_t>(o.max_queries);
    c.validate();
    return c;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    io::write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

int run(int argc, char** argv) {
    CLI::App app{"multi-tenant vector index benchmark"};
    app.require_subcommand(1);

    // gen
    io::SyntheticSpec spec;
    std::string gen_out = default_data_dir();
    std::string mode = "distribution";
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->add_option("--out", gen_out, "output directory (default: $CURATOR_DATA_DIR)");
    gen->add_option("--n-vectors", spec.n_vectors);
    gen->add_option("--n-queries", spec.n_queries);
    gen->add_option("--dim", spec.dimension);
    gen->add_option("--tenants", spec.n_tenants);
    gen->add_option("--mode", mode, "distribution|per_tenant");
    gen->add_option("--mean-sharing", spec.mean_sharing);
    gen->add_option("--zipf", spec.zipf_exponent);
    gen->add_option("--per-tenant", spec.per_tenant_count);
    gen->add_option("--gaussians", spec.n_gaussians);
    gen->add_option("--stddev", spec.gaussian_stddev);
    gen->add_option("--seed", spec.seed);

    // gt
    std::string gt_dir = default_data_dir(), gt_out;
    std::size_t gt_k = 10, gt_workers = 1;
    auto* gt = app.add_subcommand("gt", "compute exact filtered ground truth");
    gt->add_option("--data-dir", gt_dir);
    gt->add_option("--out", gt_out)->required();
    gt->add_option("--k", gt_k);
    gt->add_option("--workers", gt_workers);

    // train
    CommonOptions train_o;
    auto* train = app.add_subcommand("train", "build a curator index from a dataset and save a snapshot");
    add_common(train, train_o);

    CommonOptions bench_o, grid_o, threads_o, sweep_o;
    auto* bench_cmd = app.add_subcommand("bench", "run the benchmark protocol over the full grid");
    add_common(bench_cmd, bench_o);
    auto* grid = app.add_subcommand("grid", "grid search for the fastest setting meeting the recall floor");
    add_common(grid, grid_o);
    auto* threads = app.add_subcommand("threads", "throughput and latency against worker count");
    add_common(threads, threads_o);
    std::size_t t_g1 = 1, t_g2 = 1, t_np = 8;
    threads->add_option("--at-gamma1", t_g1);
    threads->add_option("--at-gamma2", t_g2);
    threads->add_option("--at-nprobe", t_np);

    auto* sw = app.add_subcommand("sweep", "selectivity or tenant-count sweep over synthetic data");
    add_common(sw, sweep_o);
    std::string sweep_kind = "selectivity";
    std::vector<std::size_t> sweep_values;
    std::vector<std::string> sweep_indexes = {"curator", "mf_ivf"};
    sw->add_option("--kind", sweep_kind, "selectivity|tenants");
    sw->add_option("--values", sweep_values, "total vectors or tenant counts")->delimiter(',')->required();
    sw->add_option("--indexes", sweep_indexes)->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        CURATOR_THROW_IF_NOT(!gen_out.empty(), ErrorCode::invalid_argument, "gen: --out or CURATOR_DATA_DIR required");
        CURATOR_THROW_IF_NOT(mode == "distribution" || mode == "per_tenant", ErrorCode::invalid_argument,
                             "gen: --mode must be distribution or per_tenant");
        spec.mode = mode == "distribution" ? io::SharingMode::distribution : io::SharingMode::per_tenant;
        const auto ds = io::gen_synthetic(spec);
        fs::create_directories(gen_out);
        io::write_dataset(ds, io::DatasetPaths::in_directory(gen_out));
        std::cout << "vectors," << ds.base.rows() << "\nqueries," << ds.queries.rows() << "\nsharing_degree,"
                  << bench::fmt(ds.realized_sharing) << "\n";
        return 0;
    }
    if (gt->parsed()) {
        CURATOR_THROW_IF_NOT(!gt_dir.empty(), ErrorCode::invalid_argument, "gt: --data-dir or CURATOR_DATA_DIR required");
        WorkerPool pool(gt_workers);
        const auto table = io::ground_truth_file(io::DatasetPaths::in_directory(gt_dir), gt_out, gt_k, pool);
        std::cout << "query_pairs," << table.rows.size() << "\n";
        return 0;
    }
    if (train->parsed()) {
        auto c = resolve(train_o);
        CURATOR_THROW_IF_NOT(!train_o.out.empty(), ErrorCode::invalid_argument, "train: --out snapshot path required");
        CURATOR_THROW_IF_NOT(!c.dataset_dir.empty(), ErrorCode::invalid_argument, "train: dataset directory required");
        const auto ds = io::read_dataset(io::DatasetPaths::in_directory(c.dataset_dir));
        auto idx = CuratorIndex::train_index(bench::training_sample(ds.base, c.train_size, c.seed), c.curator);
        CuratorBackend backend(std::move(idx));
        bench::load_index(backend, ds, nullptr);
        io::save_index(backend.index(), train_o.out);
        std::cout << "vectors," << backend.index().size() << "\nnodes," << backend.index().tree().size() << "\n";
        return 0;
    }
    if (bench_cmd->parsed() || grid->parsed()) {
        const auto& o = bench_cmd->parsed() ? bench_o : grid_o;
        const auto c = resolve(o);
        WorkerPool pool(c.threads.empty() ? 1 : c.threads.back());
        const auto w = bench::load_workload(c, pool);
        WorkerPool* run_pool = c.parallelism == bench::Parallelism::none ? nullptr : &pool;
        if (bench_cmd->parsed()) {
            emit(o.out, bench::bench_csv(bench::run_bench(c, w, run_pool)));
        } else {
            emit(o.out, bench::grid_csv(bench::grid_search(c, w, run_pool)));
        }
        return 0;
    }
    if (threads->parsed()) {
        auto c = resolve(threads_o);
        if (c.parallelism == bench::Parallelism::none) {
            c.parallelism = bench::Parallelism::inter;
        }
        WorkerPool pool(1);
        const auto w = bench::load_workload(c, pool);
        const auto t = bench::threads_scaling(c, w, QueryKnobs{c.k, t_g1, t_g2, t_np});
        emit(threads_o.out, bench::threads_csv(c, t));
        return 0;
    }
    if (sw->parsed()) {
        sweep_o.data_dir.clear();
        const auto c = resolve(sweep_o);
        bench::SweepSpec s;
        CURATOR_THROW_IF_NOT(sweep_kind == "selectivity" || sweep_kind == "tenants", ErrorCode::invalid_argument,
                             "sweep: --kind must be selectivity or tenants");
        s.kind = sweep_kind == "selectivity" ? bench::SweepKind::selectivity : bench::SweepKind::tenants;
        s.values = sweep_values;
        s.index_types.clear();
        for (const auto& name : sweep_indexes) {
            const auto t = parse_index_type(name);
            CURATOR_THROW_IF_NOT(t.has_value(), ErrorCode::invalid_argument, "unknown index type '" + name + "'");
            s.index_types.push_back(*t);
        }
        WorkerPool pool(1);
        emit(sweep_o.out, bench::sweep_csv(bench::sweep(c, s, pool)));
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const curator::Error& e) {
        std::cerr << "error,code=" << curator::error_code_name(e.code()) << ",message=\"" << e.what() << "\"\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error,code=internal,message=\"" << e.what() << "\"\n";
        return 3;
    }
}
