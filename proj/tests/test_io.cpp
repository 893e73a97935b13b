#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>

#include "curator/io/access_jsonl.hpp"
#include "curator/io/fvecs.hpp"
#include "curator/io/ground_truth.hpp"
#include "curator/io/snapshot.hpp"
#include "curator/io/synthetic.hpp"
#include "curator/oracle.hpp"
#include "support/fixtures.hpp"
#include "support/invariants.hpp"

using namespace curator;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("curator_io_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::invalid_argument;
}

std::string message_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

// Resident set size in kB.
std::size_t rss_kb() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmRSS:", 0) == 0) {
            return std::stoul(line.substr(6));
        }
    }
    return 0;
}

CuratorIndex populated_index(std::uint64_t seed) {
    auto idx = CuratorIndex::train_index(fx::random_matrix(300, 6, seed), fx::small_params(5));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> tenant(0, 7);
    for (std::uint64_t i = 0; i < 500; ++i) {
        idx.insert_vector(fx::random_vector(6, rng), Label{i * 7}, TenantId{tenant(rng)});
        for (int g = 0; g < 2; ++g) {
            const TenantId t{tenant(rng)};
            if (!idx.has_access(Label{i * 7}, t)) idx.grant_access(Label{i * 7}, t);
        }
    }
    for (std::uint64_t i = 0; i < 500; i += 5) {
        idx.delete_vector(Label{i * 7});
    }
    return idx;
}

}  // namespace

// -- fvecs -------------------------------------------------------------------

TEST(Fvecs, RoundTripIsExact) {
    const auto dir = scratch_dir("fvecs_rt");
    const auto m = fx::random_matrix(123, 17, 4, 100.0f);
    io::write_fvecs(dir / "a.fvecs", m);
    EXPECT_EQ(std::filesystem::file_size(dir / "a.fvecs"), 123u * (4 + 17 * 4));
    EXPECT_EQ(io::read_fvecs(dir / "a.fvecs"), m);
}

TEST(Fvecs, LayoutIsLittleEndianDimensionThenFloats) {
    const auto bytes = io::encode_fvecs(DenseMatrix::from_rows({{1.0f, -2.0f}}));
    const std::vector<std::uint8_t> expected{2, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
    EXPECT_EQ(bytes, expected);
}

TEST(Fvecs, EmptyFileIsEmptySet) {
    const auto dir = scratch_dir("fvecs_empty");
    write_text(dir / "e.fvecs", "");
    EXPECT_TRUE(io::read_fvecs(dir / "e.fvecs").empty());
}

TEST(Fvecs, DistinctErrors) {
    auto bytes = io::encode_fvecs(fx::random_matrix(3, 4, 1));
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_EQ(code_of([&] { io::parse_fvecs(truncated); }), ErrorCode::truncated);

    auto partial_header = bytes;
    partial_header.insert(partial_header.end(), {4, 0});
    EXPECT_EQ(code_of([&] { io::parse_fvecs(partial_header); }), ErrorCode::malformed_header);

    auto negative = bytes;
    negative[0] = 0xff;
    negative[1] = 0xff;
    negative[2] = 0xff;
    negative[3] = 0xff;
    EXPECT_EQ(code_of([&] { io::parse_fvecs(negative); }), ErrorCode::malformed_header);

    auto mixed = bytes;
    const auto other = io::encode_fvecs(fx::random_matrix(1, 5, 2));
    mixed.insert(mixed.end(), other.begin(), other.end());
    EXPECT_EQ(code_of([&] { io::parse_fvecs(mixed); }), ErrorCode::inconsistent_dimension);

    EXPECT_EQ(code_of([] { io::read_fvecs("/nonexistent/dir/x.fvecs"); }), ErrorCode::io_error);
}

// -- access jsonl -------------------------------------------------------------

TEST(AccessJsonl, RoundTripAndStableFieldOrder) {
    const auto dir = scratch_dir("jsonl_rt");
    const std::vector<io::AccessRecord> recs{
            {Label{1}, TenantId{2}, {TenantId{2}, TenantId{5}}},
            {Label{9000000000ull}, TenantId{0}, {TenantId{0}}},
    };
    io::write_access_jsonl(dir / "a.jsonl", recs);
    EXPECT_EQ(io::read_access_jsonl(dir / "a.jsonl"), recs);
    const auto bytes = io::read_file_bytes(dir / "a.jsonl");
    EXPECT_EQ(std::string(bytes.begin(), bytes.end()),
              "{\"label\":1,\"owner\":2,\"tenants\":[2,5]}\n{\"label\":9000000000,\"owner\":0,\"tenants\":[0]}\n");
}

TEST(AccessJsonl, ErrorsNameTheLine) {
    const auto dir = scratch_dir("jsonl_err");
    const std::string good = "{\"label\":1,\"owner\":2,\"tenants\":[2]}\n";
    write_text(dir / "dup.jsonl", good + good + "{\"label\":3,\"owner\":2,\"tenants\":[2,4,2]}\n");
    EXPECT_EQ(code_of([&] { io::read_access_jsonl(dir / "dup.jsonl"); }), ErrorCode::validation_error);
    EXPECT_NE(message_of([&] { io::read_access_jsonl(dir / "dup.jsonl"); }).find("line 3"), std::string::npos);

    write_text(dir / "bad.jsonl", good + "{\"label\":2,\"owner\":\n");
    EXPECT_EQ(code_of([&] { io::read_access_jsonl(dir / "bad.jsonl"); }), ErrorCode::parse_error);
    EXPECT_NE(message_of([&] { io::read_access_jsonl(dir / "bad.jsonl"); }).find("line 2"), std::string::npos);

    write_text(dir / "owner.jsonl", "{\"label\":1,\"owner\":2,\"tenants\":[3]}\n");
    EXPECT_EQ(code_of([&] { io::read_access_jsonl(dir / "owner.jsonl"); }), ErrorCode::validation_error);

    write_text(dir / "extra.jsonl", "{\"label\":1,\"owner\":2,\"tenants\":[2],\"x\":1}\n");
    EXPECT_EQ(code_of([&] { io::read_access_jsonl(dir / "extra.jsonl"); }), ErrorCode::parse_error);

    write_text(dir / "gap.jsonl", good + "\n" + good);
    EXPECT_EQ(code_of([&] { io::read_access_jsonl(dir / "gap.jsonl"); }), ErrorCode::parse_error);
}

TEST(AccessJsonl, MillionRecordsStreamWithBoundedMemory) {
    const auto dir = scratch_dir("jsonl_stream");
    const auto path = dir / "big.jsonl";
    const std::size_t n = 1000000;
    {
        std::ofstream out(path, std::ios::binary);
        for (std::size_t i = 0; i < n; ++i) {
            const auto t = i % 1000;
            out << "{\"label\":" << i << ",\"owner\":" << t << ",\"tenants\":[" << t << "," << (t + 1) << "," << (t + 2)
                << "]}\n";
        }
    }
    const auto file_kb = std::filesystem::file_size(path) / 1024;
    const std::size_t base = rss_kb();
    std::size_t peak = base;
    std::size_t count = 0;
    io::AccessJsonlReader reader(path);
    while (auto r = reader.next()) {
        if (++count % 50000 == 0) {
            peak = std::max(peak, rss_kb());
        }
    }
    EXPECT_EQ(count, n);
    EXPECT_LT(peak - base, file_kb / 10) << "file " << file_kb << " kB";
    std::filesystem::remove_all(dir);
}

// -- synthetic ----------------------------------------------------------------

TEST(Synthetic, SharingDegreeMatchesTargetAtFullShape) {
    io::SyntheticSpec spec;
    spec.n_vectors = 100000;
    spec.n_queries = 100;
    spec.dimension = 192;
    spec.n_tenants = 100;
    spec.mean_sharing = 13.37;
    const auto ds = io::gen_synthetic(spec);
    EXPECT_NEAR(ds.realized_sharing, 13.37, 0.05 * 13.37);
    EXPECT_DOUBLE_EQ(ds.realized_sharing, io::average_sharing_degree(ds.base_access));
    EXPECT_EQ(ds.base.rows(), 100000u);
    EXPECT_EQ(ds.base.dim(), 192u);
}

TEST(Synthetic, SharingOneGivesDisjointTenants) {
    io::SyntheticSpec spec;
    spec.n_vectors = 2000;
    spec.dimension = 4;
    spec.n_tenants = 20;
    spec.mean_sharing = 1.0;
    const auto ds = io::gen_synthetic(spec);
    for (const auto& r : ds.base_access) {
        ASSERT_EQ(r.tenants.size(), 1u);
        EXPECT_EQ(r.tenants[0], r.owner);
    }
    EXPECT_DOUBLE_EQ(ds.realized_sharing, 1.0);
}

TEST(Synthetic, PerTenantModeGivesExactCounts) {
    io::SyntheticSpec spec;
    spec.n_vectors = 1000;
    spec.dimension = 4;
    spec.n_tenants = 10;
    spec.mode = io::SharingMode::per_tenant;
    spec.per_tenant_count = 250;
    const auto ds = io::gen_synthetic(spec);
    std::vector<std::size_t> counts(10, 0);
    for (const auto& r : ds.base_access) {
        EXPECT_FALSE(r.tenants.empty());
        for (TenantId t : r.tenants) ++counts[to_underlying(t)];
    }
    for (auto c : counts) EXPECT_EQ(c, 250u);
    EXPECT_DOUBLE_EQ(ds.realized_sharing, 2.5);
    for (const auto& q : ds.query_access) EXPECT_EQ(q.tenants.size(), 1u);
}

TEST(Synthetic, SameSeedGivesIdenticalFiles) {
    io::SyntheticSpec spec;
    spec.n_vectors = 500;
    spec.n_queries = 20;
    spec.dimension = 8;
    spec.zipf_exponent = 1.0;
    spec.mean_sharing = 3.0;
    const auto a = scratch_dir("syn_a");
    const auto b = scratch_dir("syn_b");
    io::write_dataset(io::gen_synthetic(spec), io::DatasetPaths::in_directory(a));
    io::write_dataset(io::gen_synthetic(spec), io::DatasetPaths::in_directory(b));
    for (const char* f : {"base.fvecs", "base_access.jsonl", "queries.fvecs", "queries_access.jsonl"}) {
        EXPECT_EQ(io::read_file_bytes(a / f), io::read_file_bytes(b / f)) << f;
    }
    const auto back = io::read_dataset(io::DatasetPaths::in_directory(a));
    EXPECT_EQ(back.base, io::gen_synthetic(spec).base);
    spec.seed += 1;
    EXPECT_NE(io::gen_synthetic(spec).base, back.base);
}

TEST(Synthetic, InfeasibleSpecsAreRejected) {
    io::SyntheticSpec spec;
    spec.mode = io::SharingMode::per_tenant;
    spec.per_tenant_count = spec.n_vectors + 1;
    EXPECT_EQ(code_of([&] { io::gen_synthetic(spec); }), ErrorCode::infeasible);
    spec.per_tenant_count = 1;
    EXPECT_EQ(code_of([&] { io::gen_synthetic(spec); }), ErrorCode::infeasible);
    io::SyntheticSpec d;
    d.mean_sharing = static_cast<double>(d.n_tenants) + 1.0;
    EXPECT_EQ(code_of([&] { io::gen_synthetic(d); }), ErrorCode::infeasible);
    d = io::SyntheticSpec{};
    d.n_vectors = 0;
    EXPECT_EQ(code_of([&] { io::gen_synthetic(d); }), ErrorCode::infeasible);
}

TEST(QueryPairs, OneSearchPerVectorTenantPair) {
    const auto qv = DenseMatrix::from_rows({{1.0f}, {2.0f}});
    const std::vector<io::AccessRecord> acc{{Label{0}, TenantId{1}, {TenantId{1}, TenantId{4}}},
                                            {Label{1}, TenantId{2}, {TenantId{2}}}};
    const auto qs = io::make_query_pairs(qv, acc);
    ASSERT_EQ(qs.size(), 3u);
    EXPECT_EQ(qs.tenants, (std::vector<TenantId>{TenantId{1}, TenantId{4}, TenantId{2}}));
    EXPECT_EQ(qs.vectors.row(2)[0], 2.0f);
    EXPECT_EQ(io::make_query_pairs(qv, acc, 2).size(), 2u);
}

// -- snapshot -----------------------------------------------------------------

TEST(Snapshot, RoundTripIsSearchEquivalentAndKeepsEvolvingIdentically) {
    const auto dir = scratch_dir("snap_rt");
    auto a = populated_index(3);
    io::save_index(a, dir / "idx.snap");
    auto b = io::load_index(dir / "idx.snap");
    EXPECT_EQ(io::encode_index(a), io::encode_index(b));
    EXPECT_TRUE(fx::check_invariants(b).empty());

    std::mt19937_64 rng(5);
    auto compare = [&] {
        for (int q = 0; q < 100; ++q) {
            const auto x = fx::random_vector(6, rng);
            const TenantId t{static_cast<std::uint32_t>(q % 8)};
            for (const SearchParams& p : {SearchParams{10, 1u << 20, 1u << 10}, SearchParams{10, 2, 2}}) {
                EXPECT_TRUE(fx::same_neighbors(a.knn_search(x, t, p), b.knn_search(x, t, p)));
            }
        }
    };
    compare();
    Label shared{};
    TenantId other{};
    a.store().for_each([&](Slot slot) {
        for (TenantId t : a.store().access(slot)) {
            if (t != a.store().owner(slot)) {
                shared = a.store().label(slot);
                other = t;
            }
        }
    });
    for (auto* idx : {&a, &b}) {
        idx->revoke_access(shared, other);
        idx->insert_vector(VectorData(6, 0.25f), Label{100000}, TenantId{3});
        idx->grant_access(Label{100000}, TenantId{6});
    }
    EXPECT_EQ(io::encode_index(a), io::encode_index(b));
    compare();
}

TEST(Snapshot, CorruptionAndVersionErrors) {
    const auto bytes = io::encode_index(populated_index(4));
    auto flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x10;
    EXPECT_EQ(code_of([&] { io::decode_index(flipped); }), ErrorCode::checksum_mismatch);

    auto version = bytes;
    version[8] = 2;
    EXPECT_EQ(code_of([&] { io::decode_index(version); }), ErrorCode::version_mismatch);

    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_EQ(code_of([&] { io::decode_index(magic); }), ErrorCode::malformed_header);

    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_EQ(code_of([&] { io::decode_index(trailing); }), ErrorCode::trailing_data);

    auto shorter = bytes;
    shorter.resize(bytes.size() - 3);
    EXPECT_EQ(code_of([&] { io::decode_index(shorter); }), ErrorCode::truncated);
}

TEST(Snapshot, WrongDimensionQueryAfterLoadErrors) {
    const auto b = io::decode_index(io::encode_index(populated_index(6)));
    EXPECT_EQ(code_of([&] { b.knn_search(VectorData(5, 0.0f), TenantId{0}, SearchParams{}); }),
              ErrorCode::dimension_mismatch);
}

// -- ground truth file ----------------------------------------------------------

TEST(GroundTruthCodec, RoundTripAndTrailingBytes) {
    io::GroundTruth gt;
    gt.k = 3;
    gt.tenants = {TenantId{1}, TenantId{7}};
    gt.rows = {{{Label{4}, 0.5f}, {Label{2}, 1.5f}}, {}};
    const auto bytes = io::encode_ground_truth(gt);
    EXPECT_EQ(io::decode_ground_truth(bytes), gt);
    auto extra = bytes;
    extra.push_back(1);
    EXPECT_EQ(code_of([&] { io::decode_ground_truth(extra); }), ErrorCode::trailing_data);
}
