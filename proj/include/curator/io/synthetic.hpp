#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <vector>

#include "curator/core.hpp"
#include "curator/io/access_jsonl.hpp"
#include "curator/io/fvecs.hpp"

namespace curator::io {

/// How tenants are attached to vectors.
enum class SharingMode {
    /// Per-vector sharing degree 1 + Poisson(mean - 1); tenants drawn with
    /// Zipf-distributed popularity.
    distribution,
    /// Every tenant can read exactly per_tenant_count vectors; every vector
    /// has at least one tenant.
    per_tenant,
};

struct SyntheticSpec {
    std::size_t n_vectors = 10000;
    std::size_t n_queries = 1000;
    std::size_t dimension = 32;
    std::size_t n_tenants = 50;
    SharingMode mode = SharingMode::distribution;
    double mean_sharing = 2.0;
    double zipf_exponent = 0.0;
    std::size_t per_tenant_count = 0;
    /// Vectors are drawn from a mixture of isotropic Gaussians.
    std::size_t n_gaussians = 64;
    double gaussian_stddev = 0.5;
    std::uint64_t seed = 42;

    void validate() const {
        CURATOR_THROW_IF_NOT(n_vectors > 0 && dimension > 0 && n_tenants > 0 && n_gaussians > 0,
                             ErrorCode::infeasible, "synthetic spec: counts must be positive");
        CURATOR_THROW_IF_NOT(gaussian_stddev >= 0.0, ErrorCode::infeasible,
                             "synthetic spec: negative standard deviation");
        if (mode == SharingMode::distribution) {
            CURATOR_THROW_IF_NOT(mean_sharing >= 1.0 && mean_sharing <= static_cast<double>(n_tenants),
                                 ErrorCode::infeasible, "synthetic spec: mean_sharing must lie in [1, n_tenants]");
            CURATOR_THROW_IF_NOT(zipf_exponent >= 0.0, ErrorCode::infeasible,
                                 "synthetic spec: zipf_exponent must be >= 0");
        } else {
            CURATOR_THROW_IF_NOT(per_tenant_count > 0 && per_tenant_count <= n_vectors, ErrorCode::infeasible,
                                 "synthetic spec: per_tenant_count must lie in [1, n_vectors]");
            CURATOR_THROW_IF_NOT(per_tenant_count * n_tenants >= n_vectors, ErrorCode::infeasible,
                                 "synthetic spec: per_tenant_count * n_tenants must cover every vector");
        }
    }
};

struct SyntheticDataset {
    DenseMatrix base;
    std::vector<AccessRecord> base_access;
    DenseMatrix queries;
    std::vector<AccessRecord> query_access;
    double realized_sharing = 0.0;
};

inline double average_sharing_degree(const std::vector<AccessRecord>& records) {
    if (records.empty()) {
        return 0.0;
    }
    std::size_t total = 0;
    for (const auto& r : records) {
        total += r.tenants.size();
    }
    return static_cast<double>(total) / static_cast<double>(records.size());
}

namespace detail {

inline DenseMatrix gaussian_mixture(std::size_t n, const DenseMatrix& centers, double stddev, std::mt19937_64& rng) {
    DenseMatrix out(n, centers.dim());
    std::uniform_int_distribution<std::size_t> which(0, centers.rows() - 1);
    std::normal_distribution<float> noise(0.0f, static_cast<float>(stddev));
    for (std::size_t i = 0; i < n; ++i) {
        const float* c = centers.row_ptr(which(rng));
        auto row = out.row(i);
        for (std::size_t j = 0; j < centers.dim(); ++j) {
            row[j] = c[j] + noise(rng);
        }
    }
    return out;
}

// Sharing degree 1 + Poisson(mean - 1) clipped to n_tenants; distinct
// tenants drawn by Zipf weight. The first draw owns the vector.
inline std::vector<AccessRecord> assign_by_distribution(std::size_t n, const SyntheticSpec& spec,
                                                        std::mt19937_64& rng) {
    std::vector<double> weights(spec.n_tenants);
    for (std::size_t t = 0; t < spec.n_tenants; ++t) {
        weights[t] = 1.0 / std::pow(static_cast<double>(t + 1), spec.zipf_exponent);
    }
    std::poisson_distribution<std::size_t> extra(spec.mean_sharing - 1.0);
    std::vector<AccessRecord> out(n);
    std::vector<double> w;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t degree = std::min(spec.n_tenants, 1 + (spec.mean_sharing > 1.0 ? extra(rng) : 0));
        w = weights;
        AccessRecord& r = out[i];
        r.label = Label{i};
        for (std::size_t d = 0; d < degree; ++d) {
            std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
            const std::size_t t = pick(rng);
            w[t] = 0.0;
            r.tenants.push_back(TenantId{static_cast<std::uint32_t>(t)});
        }
        r.owner = r.tenants.front();
        std::sort(r.tenants.begin(), r.tenants.end());
    }
    return out;
}

// Round-robin ownership over a shuffled order, then each tenant tops up to
// exactly per_tenant_count distinct vectors.
inline std::vector<AccessRecord> assign_per_tenant(std::size_t n, const SyntheticSpec& spec, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<AccessRecord> out(n);
    std::vector<std::vector<std::size_t>> owned(spec.n_tenants);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t v = order[i];
        const auto t = static_cast<std::uint32_t>(i % spec.n_tenants);
        out[v].label = Label{v};
        out[v].owner = TenantId{t};
        out[v].tenants.push_back(TenantId{t});
        owned[t].push_back(v);
    }
    std::uniform_int_distribution<std::size_t> any(0, n - 1);
    std::vector<std::uint8_t> has(n);
    for (std::size_t t = 0; t < spec.n_tenants; ++t) {
        std::fill(has.begin(), has.end(), 0);
        for (auto v : owned[t]) {
            has[v] = 1;
        }
        std::size_t count = owned[t].size();
        while (count < spec.per_tenant_count) {
            const std::size_t v = any(rng);
            if (has[v]) {
                continue;
            }
            has[v] = 1;
            out[v].tenants.push_back(TenantId{static_cast<std::uint32_t>(t)});
            ++count;
        }
    }
    for (auto& r : out) {
        std::sort(r.tenants.begin(), r.tenants.end());
    }
    return out;
}

}  // namespace detail

/// Deterministic synthetic workload: base vectors with access lists, plus a
/// query set whose access lists define the <vector, tenant> query pairs.
inline SyntheticDataset gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    DenseMatrix centers(spec.n_gaussians, spec.dimension);
    std::normal_distribution<float> unit(0.0f, 1.0f);
    for (float& f : centers.data()) {
        f = unit(rng);
    }
    SyntheticDataset ds;
    ds.base = detail::gaussian_mixture(spec.n_vectors, centers, spec.gaussian_stddev, rng);
    ds.queries = detail::gaussian_mixture(spec.n_queries, centers, spec.gaussian_stddev, rng);
    if (spec.mode == SharingMode::distribution) {
        ds.base_access = detail::assign_by_distribution(spec.n_vectors, spec, rng);
        ds.query_access = detail::assign_by_distribution(spec.n_queries, spec, rng);
    } else {
        ds.base_access = detail::assign_per_tenant(spec.n_vectors, spec, rng);
        // one uniformly chosen tenant per query
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(spec.n_tenants - 1));
        ds.query_access.resize(spec.n_queries);
        for (std::size_t i = 0; i < spec.n_queries; ++i) {
            const TenantId t{pick(rng)};
            ds.query_access[i] = AccessRecord{Label{i}, t, {t}};
        }
    }
    ds.realized_sharing = average_sharing_degree(ds.base_access);
    return ds;
}

struct DatasetPaths {
    std::filesystem::path base_vectors;
    std::filesystem::path base_access;
    std::filesystem::path query_vectors;
    std::filesystem::path query_access;

    static DatasetPaths in_directory(const std::filesystem::path& dir) {
        return {dir / "base.fvecs", dir / "base_access.jsonl", dir / "queries.fvecs", dir / "queries_access.jsonl"};
    }
};

inline void write_dataset(const SyntheticDataset& ds, const DatasetPaths& paths) {
    write_fvecs(paths.base_vectors, ds.base);
    write_access_jsonl(paths.base_access, ds.base_access);
    write_fvecs(paths.query_vectors, ds.queries);
    write_access_jsonl(paths.query_access, ds.query_access);
}

/// Loads a dataset and checks that vectors and access records line up.
inline SyntheticDataset read_dataset(const DatasetPaths& paths) {
    SyntheticDataset ds;
    ds.base = read_fvecs(paths.base_vectors);
    ds.base_access = read_access_jsonl(paths.base_access);
    ds.queries = read_fvecs(paths.query_vectors);
    ds.query_access = read_access_jsonl(paths.query_access);
    CURATOR_THROW_IF_NOT(ds.base.rows() == ds.base_access.size(), ErrorCode::validation_error,
                         "base vectors (" + std::to_string(ds.base.rows()) + ") and access records (" +
                                 std::to_string(ds.base_access.size()) + ") differ in count");
    CURATOR_THROW_IF_NOT(ds.queries.rows() == ds.query_access.size(), ErrorCode::validation_error,
                         "query vectors and query access records differ in count");
    CURATOR_THROW_IF_NOT(ds.queries.empty() || ds.base.empty() || ds.queries.dim() == ds.base.dim(),
                         ErrorCode::inconsistent_dimension, "query and base dimensions differ");
    ds.realized_sharing = average_sharing_degree(ds.base_access);
    return ds;
}

/// One search per <query vector, tenant> pair, in file order.
struct QuerySet {
    DenseMatrix vectors;
    std::vector<TenantId> tenants;
    std::vector<std::uint32_t> source;

    std::size_t size() const noexcept { return tenants.size(); }
};

inline QuerySet make_query_pairs(const DenseMatrix& queries, const std::vector<AccessRecord>& access,
                                 std::size_t limit = std::numeric_limits<std::size_t>::max()) {
    QuerySet qs;
    qs.vectors = DenseMatrix(queries.dim());
    for (std::size_t i = 0; i < queries.rows() && qs.size() < limit; ++i) {
        for (TenantId t : access[i].tenants) {
            if (qs.size() >= limit) {
                break;
            }
            qs.vectors.push_back(queries.row(i));
            qs.tenants.push_back(t);
            qs.source.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return qs;
}

}  // namespace curator::io
