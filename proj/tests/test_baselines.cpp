#include <gtest/gtest.h>

#include <random>

#include "curator/bench.hpp"
#include "curator/indexes.hpp"
#include "curator/io/ground_truth.hpp"
#include "curator/io/synthetic.hpp"
#include "curator/ivf.hpp"
#include "curator/oracle.hpp"
#include "support/fixtures.hpp"

using namespace curator;

namespace {

constexpr IndexType kAllTypes[] = {IndexType::curator,     IndexType::curator_no_bfs, IndexType::mf_ivf,
                                   IndexType::flat_ivf_bf, IndexType::flat_ivf_bf_sl, IndexType::pt_ivf};

bench::BenchConfig small_config(std::uint64_t seed) {
    bench::BenchConfig c;
    c.synthetic.n_vectors = 1500;
    c.synthetic.n_queries = 60;
    c.synthetic.dimension = 8;
    c.synthetic.n_tenants = 12;
    c.synthetic.mean_sharing = 2.5;
    c.synthetic.n_gaussians = 8;
    c.synthetic.seed = seed;
    c.seed = seed;
    c.ivf.n_clusters = 16;
    c.pt_max_cells = 16;
    c.curator.gct.branching_factor = 4;
    c.curator.gct.max_depth = 3;
    c.curator.gct.min_train_points_per_node = 8;
    c.curator.max_shortlist_size = 8;
    return c;
}

QueryKnobs exhaustive_knobs(std::size_t k) { return QueryKnobs{k, 1u << 20, 1u << 10, 1u << 20}; }

// Applies the same revokes and deletes to an index and to a reference store.
void mutate(MultiTenantIndex& index, VectorStore& ref, const io::SyntheticDataset& ds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.2);
    for (const auto& rec : ds.base_access) {
        if (coin(rng)) {
            index.delete_vector(rec.label);
            ref.remove(rec.label);
            continue;
        }
        for (TenantId t : rec.tenants) {
            if (t != rec.owner && coin(rng)) {
                index.revoke_access(rec.label, t);
                ref.access(ref.slot_of(rec.label)).erase(t);
            }
        }
    }
}

}  // namespace

TEST(Baselines, AllVariantsAgreeWithOracleAtExhaustiveSettings) {
    for (std::uint64_t seed : {1u, 2u}) {
        auto c = small_config(seed);
        const auto ds = io::gen_synthetic(c.synthetic);
        for (IndexType type : kAllTypes) {
            c.index_type = type;
            auto index = bench::make_index(c, ds);
            bench::load_index(*index, ds, nullptr);
            VectorStore ref = io::make_store(ds.base, ds.base_access);
            mutate(*index, ref, ds, seed + 10);
            for (std::size_t q = 0; q < ds.queries.rows(); ++q) {
                for (std::uint32_t t = 0; t < 3; ++t) {
                    const TenantId tenant{(static_cast<std::uint32_t>(q) + t) % 12};
                    const auto truth = exact_filtered_knn(ref, ds.queries.row(q), tenant, 10);
                    const auto got = index->search(ds.queries.row(q), tenant, exhaustive_knobs(10));
                    EXPECT_TRUE(fx::same_neighbors(got, truth))
                            << index->name() << " seed " << seed << " query " << q;
                }
            }
        }
    }
}

TEST(Baselines, AccessSafetyAtSmallBudgets) {
    auto c = small_config(5);
    const auto ds = io::gen_synthetic(c.synthetic);
    for (IndexType type : kAllTypes) {
        c.index_type = type;
        auto index = bench::make_index(c, ds);
        bench::load_index(*index, ds, nullptr);
        VectorStore ref = io::make_store(ds.base, ds.base_access);
        mutate(*index, ref, ds, 77);
        for (std::size_t q = 0; q < ds.queries.rows(); ++q) {
            for (std::uint32_t t = 0; t < 12; ++t) {
                for (const auto& n : index->search(ds.queries.row(q), TenantId{t}, QueryKnobs{10, 1, 1, 2})) {
                    EXPECT_TRUE(ref.has_access(n.label, TenantId{t})) << index->name();
                    EXPECT_TRUE(index->has_access(n.label, TenantId{t})) << index->name();
                }
            }
        }
    }
}

TEST(Baselines, ShortlistVariantsNeverTouchAccessLists) {
    auto c = small_config(3);
    const auto ds = io::gen_synthetic(c.synthetic);
    for (IndexType type : {IndexType::flat_ivf_bf_sl, IndexType::curator, IndexType::mf_ivf}) {
        c.index_type = type;
        auto index = bench::make_index(c, ds);
        bench::load_index(*index, ds, nullptr);
        SearchStats s;
        for (std::size_t q = 0; q < ds.queries.rows(); ++q) {
            index->search(ds.queries.row(q), ds.query_access[q].owner, QueryKnobs{10, 4, 2, 4}, &s);
        }
        if (type == IndexType::mf_ivf) {
            EXPECT_GT(s.access_list_traversals, 0u);
        } else {
            EXPECT_EQ(s.access_list_traversals, 0u) << index->name();
        }
    }
}

TEST(Baselines, MfIvfPredicateEvaluationsDominateAtLowSelectivity) {
    // 100 tenants with one vector each in ten: about 1% selectivity
    auto c = small_config(4);
    c.synthetic.n_tenants = 100;
    c.synthetic.mean_sharing = 1.0;
    c.synthetic.n_vectors = 4000;
    c.index_type = IndexType::mf_ivf;
    const auto ds = io::gen_synthetic(c.synthetic);
    auto index = bench::make_index(c, ds);
    bench::load_index(*index, ds, nullptr);
    SearchStats s;
    const std::size_t n_q = 20;
    for (std::size_t q = 0; q < n_q; ++q) {
        index->search(ds.queries.row(q), ds.query_access[q].owner, QueryKnobs{10, 1, 1, 4}, &s);
    }
    EXPECT_GT(s.predicate_evaluations / n_q, 10u * 10u);
}

TEST(Baselines, EmptyAndUnknownTenants) {
    auto c = small_config(6);
    const auto ds = io::gen_synthetic(c.synthetic);
    for (IndexType type : kAllTypes) {
        c.index_type = type;
        auto index = bench::make_index(c, ds);
        bench::load_index(*index, ds, nullptr);
        EXPECT_TRUE(index->search(ds.queries.row(0), TenantId{999}, QueryKnobs{10, 4, 4, 4}).empty())
                << index->name();
    }
}

TEST(Baselines, DimensionMismatchThrows) {
    auto c = small_config(6);
    const auto ds = io::gen_synthetic(c.synthetic);
    for (IndexType type : kAllTypes) {
        c.index_type = type;
        auto index = bench::make_index(c, ds);
        bench::load_index(*index, ds, nullptr);
        try {
            index->search(VectorData(3, 0.0f), TenantId{0}, QueryKnobs{});
            ADD_FAILURE() << index->name();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch) << index->name();
        }
    }
}

TEST(Baselines, PerTenantIvfEqualsMfIvfForSingleTenant) {
    const std::size_t n = 900;
    const auto data = fx::random_matrix(n, 6, 21);
    const TenantId t{3};
    IvfParams p;
    p.n_clusters = 64;
    p.kmeans.seed = 99;
    PtIvfIndex pt(6, p);
    pt.create_tenant_index(t, data);

    IvfParams mp = p;
    mp.n_clusters = PtIvfIndex::cells_for(n, p.n_clusters);
    mp.kmeans.seed = p.kmeans.seed ^ splitmix64(to_underlying(t));
    MfIvfIndex mf(data, mp);
    for (std::size_t i = 0; i < n; ++i) {
        pt.insert_vector(data.row(i), Label{i}, t);
        mf.insert_vector(data.row(i), Label{i}, t);
    }
    EXPECT_EQ(pt.tenant_index(t)->n_cells(), mf.ivf().n_cells());
    std::mt19937_64 rng(8);
    for (int q = 0; q < 100; ++q) {
        const auto x = fx::random_vector(6, rng);
        for (std::size_t np : {1u, 3u, 30u}) {
            EXPECT_TRUE(fx::same_neighbors(pt.pt_ivf_search(x, t, 10, np), mf.mf_ivf_search(x, t, 10, np)));
        }
    }
}

TEST(Baselines, PerTenantVectorBytesScaleWithSharingDegree) {
    for (double sharing : {1.0, 3.0, 6.0}) {
        auto c = small_config(9);
        c.synthetic.mean_sharing = sharing;
        const auto ds = io::gen_synthetic(c.synthetic);
        c.index_type = IndexType::pt_ivf;
        auto pt = bench::make_index(c, ds);
        bench::load_index(*pt, ds, nullptr);
        c.index_type = IndexType::mf_ivf;
        auto mf = bench::make_index(c, ds);
        bench::load_index(*mf, ds, nullptr);
        const double ratio = static_cast<double>(pt->memory_usage().vector_data) /
                             static_cast<double>(mf->memory_usage().vector_data);
        EXPECT_NEAR(ratio, ds.realized_sharing, 1e-9 * ds.realized_sharing) << "sharing " << sharing;
    }
}

TEST(Baselines, BloomSkippedCellsDoNotCountTowardNprobe) {
    // Tenant 1 lives only in the cell farthest from the query.
    DenseMatrix train = DenseMatrix::from_rows({{0.0f}, {10.0f}, {20.0f}, {30.0f}});
    IvfParams p;
    p.n_clusters = 4;
    p.nprobe = 1;
    FlatIvfBfIndex bf(train, p, false);
    FlatIvfBfIndex sl(train, p, true);
    MfIvfIndex mf(train, p);
    for (MultiTenantIndex* idx : std::initializer_list<MultiTenantIndex*>{&bf, &sl, &mf}) {
        idx->insert_vector(VectorData{0.0f}, Label{1}, TenantId{0});
        idx->insert_vector(VectorData{10.0f}, Label{2}, TenantId{0});
        idx->insert_vector(VectorData{30.0f}, Label{3}, TenantId{1});
    }
    const VectorData x{0.0f};
    const QueryKnobs one{1, 1, 1, 1};
    EXPECT_TRUE(mf.search(x, TenantId{1}, one).empty());
    for (const FlatIvfBfIndex* idx : {&bf, &sl}) {
        SearchStats s;
        const auto r = idx->search(x, TenantId{1}, one, &s);
        ASSERT_EQ(r.size(), 1u);
        EXPECT_EQ(r[0].label, Label{3});
        EXPECT_EQ(s.clusters_scanned, 1u);
    }

    // After revocation and deletion the filters forget the tenant.
    bf.grant_access(Label{1}, TenantId{2});
    sl.grant_access(Label{1}, TenantId{2});
    EXPECT_EQ(bf.search(x, TenantId{2}, one).size(), 1u);
    bf.revoke_access(Label{1}, TenantId{2});
    sl.revoke_access(Label{1}, TenantId{2});
    EXPECT_TRUE(bf.search(x, TenantId{2}, one).empty());
    EXPECT_TRUE(sl.search(x, TenantId{2}, one).empty());
    bf.delete_vector(Label{3});
    sl.delete_vector(Label{3});
    EXPECT_TRUE(bf.search(x, TenantId{1}, exhaustive_knobs(5)).empty());
    EXPECT_TRUE(sl.search(x, TenantId{1}, exhaustive_knobs(5)).empty());
}

TEST(Baselines, MutationErrorsMatchAcrossFamilies) {
    auto c = small_config(6);
    const auto ds = io::gen_synthetic(c.synthetic);
    for (IndexType type : kAllTypes) {
        c.index_type = type;
        auto index = bench::make_index(c, ds);
        bench::load_index(*index, ds, nullptr);
        const auto& rec = ds.base_access[0];
        auto code_of = [&](auto&& fn) {
            try {
                fn();
            } catch (const Error& e) {
                return e.code();
            }
            return ErrorCode::invalid_argument;
        };
        EXPECT_EQ(code_of([&] { index->grant_access(rec.label, rec.owner); }), ErrorCode::duplicate_grant)
                << index->name();
        EXPECT_EQ(code_of([&] { index->revoke_access(rec.label, rec.owner); }), ErrorCode::owner_revocation)
                << index->name();
        EXPECT_EQ(code_of([&] { index->revoke_access(rec.label, TenantId{500}); }), ErrorCode::access_not_granted)
                << index->name();
        EXPECT_EQ(code_of([&] { index->grant_access(Label{1u << 30}, TenantId{0}); }), ErrorCode::unknown_label)
                << index->name();
    }
}

TEST(Baselines, BestFirstVisitsNoMoreNodesThanExhaustiveTraversal) {
    auto c = small_config(12);
    const auto ds = io::gen_synthetic(c.synthetic);
    c.index_type = IndexType::curator;
    auto bfs = bench::make_index(c, ds);
    bench::load_index(*bfs, ds, nullptr);
    c.index_type = IndexType::curator_no_bfs;
    auto full = bench::make_index(c, ds);
    bench::load_index(*full, ds, nullptr);
    for (std::size_t q = 0; q < ds.queries.rows(); ++q) {
        for (std::size_t g1 : {1u, 4u, 16u}) {
            SearchStats a, b;
            const QueryKnobs k{10, g1, 2, 1};
            bfs->search(ds.queries.row(q), ds.query_access[q].owner, k, &a);
            full->search(ds.queries.row(q), ds.query_access[q].owner, k, &b);
            EXPECT_LE(a.nodes_visited, b.nodes_visited);
        }
    }
}
