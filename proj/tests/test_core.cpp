#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "curator/bloom_filter.hpp"
#include "curator/core.hpp"
#include "curator/vector_store.hpp"

using namespace curator;

TEST(SquaredL2, IdentityIsZero) {
    const VectorData a{0.0f, 0.0f};
    EXPECT_EQ(squared_l2(a, a), 0.0f);
}

TEST(SquaredL2, OrthogonalUnitVectors) {
    const VectorData a{1.0f, 0.0f}, b{0.0f, 1.0f};
    EXPECT_EQ(squared_l2(a, b), 2.0f);
}

TEST(SquaredL2, MatchesNaiveLoopOn192Dims) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (int trial = 0; trial < 100; ++trial) {
        VectorData a(192), b(192);
        for (std::size_t i = 0; i < 192; ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
        }
        double naive = 0.0;
        for (std::size_t i = 0; i < 192; ++i) {
            naive += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
        }
        EXPECT_NEAR(squared_l2(a, b), naive, 1e-4 * naive);
        EXPECT_EQ(squared_l2(a, b), squared_l2(b, a));
    }
}

TEST(SquaredL2, DimensionMismatchThrows) {
    const VectorData a{1.0f}, b{1.0f, 2.0f};
    try {
        squared_l2(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    }
}

TEST(TopK, EmptyInput) { EXPECT_TRUE(top_k_by_distance({}, 5).empty()); }

TEST(TopK, OrdersByDistance) {
    auto r = top_k_by_distance({{Label{7}, 2.0f}, {Label{3}, 1.0f}}, 1);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].label, Label{3});
    EXPECT_EQ(r[0].distance, 1.0f);
}

TEST(TopK, TieBreaksBySmallerLabel) {
    auto r = top_k_by_distance({{Label{2}, 1.0f}, {Label{1}, 1.0f}}, 1);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].label, Label{1});
}

TEST(TopK, IsPrefixOfFullSortAndCollectorAgrees) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> d(0, 20);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Neighbor> c;
        const std::size_t n = static_cast<std::size_t>(d(rng));
        for (std::size_t i = 0; i < n; ++i) {
            c.push_back({Label{i}, static_cast<float>(d(rng) % 5)});
        }
        const std::size_t k = 1 + static_cast<std::size_t>(d(rng) % 8);
        auto full = c;
        std::sort(full.begin(), full.end(), neighbor_less);
        const auto top = top_k_by_distance(c, k);
        ASSERT_EQ(top.size(), std::min(k, n));
        TopKCollector col(k);
        for (const auto& nb : c) {
            col.push(nb.label, nb.distance);
        }
        const auto via = std::move(col).finish();
        ASSERT_EQ(via.size(), top.size());
        for (std::size_t i = 0; i < top.size(); ++i) {
            EXPECT_EQ(top[i].label, full[i].label);
            EXPECT_EQ(via[i].label, full[i].label);
        }
    }
}

TEST(VectorStore, AddLookupRemove) {
    VectorStore s(2);
    const VectorData v{1.0f, 2.0f};
    const Slot slot = s.add(Label{5}, v, TenantId{1});
    EXPECT_TRUE(s.has_access(Label{5}, TenantId{1}));
    EXPECT_FALSE(s.has_access(Label{5}, TenantId{2}));
    EXPECT_FALSE(s.has_access(Label{6}, TenantId{1}));
    const auto rec = s.record(Label{5});
    EXPECT_EQ(rec.data, v);
    EXPECT_EQ(rec.owner, TenantId{1});
    EXPECT_EQ(s.vector_bytes(), 8u);
    s.remove(Label{5});
    EXPECT_FALSE(s.contains(Label{5}));
    EXPECT_EQ(s.add(Label{6}, v, TenantId{1}), slot);
}

TEST(VectorStore, RejectsBadInput) {
    VectorStore s(2);
    const VectorData v{1.0f, 2.0f};
    s.add(Label{1}, v, TenantId{0});
    auto code_of = [&](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::invalid_argument;
    };
    EXPECT_EQ(code_of([&] { s.add(Label{1}, v, TenantId{0}); }), ErrorCode::duplicate_label);
    EXPECT_EQ(code_of([&] { s.add(Label{2}, VectorData{1.0f}, TenantId{0}); }), ErrorCode::dimension_mismatch);
    EXPECT_EQ(code_of([&] { s.add(Label{3}, VectorData{NAN, 1.0f}, TenantId{0}); }), ErrorCode::non_finite_value);
    EXPECT_EQ(code_of([&] { s.record(Label{9}); }), ErrorCode::unknown_label);
}

TEST(BloomFilter, NoFalseNegatives) {
    TenantBloomFilter bf(1024, 4);
    for (std::uint32_t t = 0; t < 200; t += 3) {
        bf.insert(bf.key(TenantId{t}));
    }
    for (std::uint32_t t = 0; t < 200; t += 3) {
        EXPECT_TRUE(bf.contains(bf.key(TenantId{t})));
    }
}

TEST(BloomFilter, FalsePositiveRateAtDeskCapacity) {
    // 1024 bits and 4 hashes with ~50 distinct tenants
    TenantBloomFilter bf(1024, 4);
    for (std::uint32_t t = 0; t < 50; ++t) {
        bf.insert(bf.key(TenantId{t}));
    }
    std::size_t fp = 0;
    const std::size_t probes = 100000;
    for (std::uint32_t t = 1000; t < 1000 + probes; ++t) {
        fp += bf.contains(bf.key(TenantId{t})) ? 1 : 0;
    }
    EXPECT_LT(static_cast<double>(fp) / probes, 0.01);
}

TEST(BloomFilter, UnionAndClear) {
    TenantBloomFilter a(64, 2), b(64, 2);
    a.insert(a.key(TenantId{1}));
    b.insert(b.key(TenantId{2}));
    a |= b;
    EXPECT_TRUE(a.contains(a.key(TenantId{1})));
    EXPECT_TRUE(a.contains(a.key(TenantId{2})));
    a.clear();
    EXPECT_TRUE(a.empty());
}
