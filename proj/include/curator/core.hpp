#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace curator {

/// Caller-chosen identifier of a stored vector. Unique among live vectors.
enum class Label : std::uint64_t {};

/// Opaque tenant identifier; equality and hashing only.
enum class TenantId : std::uint32_t {};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <typename E>
constexpr auto to_underlying(E e) noexcept {
    return static_cast<std::underlying_type_t<E>>(e);
}

using VectorData = std::vector<float>;
using VectorView = std::span<const float>;

enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    non_finite_value,
    insufficient_data,
    duplicate_label,
    unknown_label,
    duplicate_grant,
    access_not_granted,
    owner_revocation,
    io_error,
    malformed_header,
    inconsistent_dimension,
    truncated,
    trailing_data,
    parse_error,
    validation_error,
    version_mismatch,
    checksum_mismatch,
    infeasible,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::non_finite_value: return "non_finite_value";
        case ErrorCode::insufficient_data: return "insufficient_data";
        case ErrorCode::duplicate_label: return "duplicate_label";
        case ErrorCode::unknown_label: return "unknown_label";
        case ErrorCode::duplicate_grant: return "duplicate_grant";
        case ErrorCode::access_not_granted: return "access_not_granted";
        case ErrorCode::owner_revocation: return "owner_revocation";
        case ErrorCode::io_error: return "io_error";
        case ErrorCode::malformed_header: return "malformed_header";
        case ErrorCode::inconsistent_dimension: return "inconsistent_dimension";
        case ErrorCode::truncated: return "truncated";
        case ErrorCode::trailing_data: return "trailing_data";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::validation_error: return "validation_error";
        case ErrorCode::version_mismatch: return "version_mismatch";
        case ErrorCode::checksum_mismatch: return "checksum_mismatch";
        case ErrorCode::infeasible: return "infeasible";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
            : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

#define CURATOR_THROW_IF_NOT(cond, code, msg)          \
    do {                                               \
        if (!(cond)) {                                 \
            throw ::curator::Error((code), (msg));     \
        }                                              \
    } while (false)

/// Unchecked kernel; callers guarantee equal lengths.
inline float l2_sqr(const float* a, const float* b, std::size_t dim) noexcept {
    float acc0 = 0.0f, acc1 = 0.0f, acc2 = 0.0f, acc3 = 0.0f;
    std::size_t i = 0;
    for (; i + 4 <= dim; i += 4) {
        const float d0 = a[i] - b[i];
        const float d1 = a[i + 1] - b[i + 1];
        const float d2 = a[i + 2] - b[i + 2];
        const float d3 = a[i + 3] - b[i + 3];
        acc0 += d0 * d0;
        acc1 += d1 * d1;
        acc2 += d2 * d2;
        acc3 += d3 * d3;
    }
    for (; i < dim; ++i) {
        const float d = a[i] - b[i];
        acc0 += d * d;
    }
    return (acc0 + acc1) + (acc2 + acc3);
}

inline float squared_l2(VectorView a, VectorView b) {
    CURATOR_THROW_IF_NOT(a.size() == b.size(), ErrorCode::dimension_mismatch,
                         "squared_l2: dimension mismatch (" + std::to_string(a.size()) +
                                 " vs " + std::to_string(b.size()) + ")");
    return l2_sqr(a.data(), b.data(), a.size());
}

inline bool all_finite(VectorView v) noexcept {
    return std::all_of(v.begin(), v.end(), [](float f) { return std::isfinite(f); });
}

struct Neighbor {
    Label label;
    float distance;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Strict (distance, label) order used for every ranking in the library.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) noexcept {
    if (a.distance != b.distance) {
        return a.distance < b.distance;
    }
    return to_underlying(a.label) < to_underlying(b.label);
}

inline std::vector<Neighbor> top_k_by_distance(std::vector<Neighbor> candidates, std::size_t k) {
    const std::size_t n = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n),
                      candidates.end(), neighbor_less);
    candidates.resize(n);
    return candidates;
}

/// Bounded max-heap keeping the k best neighbors under (distance, label) order.
class TopKCollector {
public:
    explicit TopKCollector(std::size_t k) : k_(k) { heap_.reserve(k); }

    void push(Label label, float distance) {
        if (k_ == 0) {
            return;
        }
        Neighbor n{label, distance};
        if (heap_.size() < k_) {
            heap_.push_back(n);
            std::push_heap(heap_.begin(), heap_.end(), neighbor_less);
        } else if (neighbor_less(n, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), neighbor_less);
            heap_.back() = n;
            std::push_heap(heap_.begin(), heap_.end(), neighbor_less);
        }
    }

    void merge(const TopKCollector& other) {
        for (const auto& n : other.heap_) {
            push(n.label, n.distance);
        }
    }

    std::size_t size() const noexcept { return heap_.size(); }

    std::vector<Neighbor> finish() && {
        std::sort_heap(heap_.begin(), heap_.end(), neighbor_less);
        return std::move(heap_);
    }

private:
    std::size_t k_;
    std::vector<Neighbor> heap_;
};

/// Row-major dense matrix of float vectors sharing one dimension.
class DenseMatrix {
public:
    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t dim) : dim_(dim) {}
    DenseMatrix(std::size_t rows, std::size_t dim) : dim_(dim), data_(rows * dim, 0.0f) {}

    static DenseMatrix from_rows(const std::vector<VectorData>& rows) {
        CURATOR_THROW_IF_NOT(!rows.empty(), ErrorCode::insufficient_data, "no rows");
        DenseMatrix m(rows.front().size());
        m.data_.reserve(rows.size() * m.dim_);
        for (const auto& r : rows) {
            m.push_back(r);
        }
        return m;
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
    bool empty() const noexcept { return data_.empty(); }

    VectorView row(std::size_t i) const noexcept { return {data_.data() + i * dim_, dim_}; }
    std::span<float> row(std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }
    const float* row_ptr(std::size_t i) const noexcept { return data_.data() + i * dim_; }

    void push_back(VectorView v) {
        CURATOR_THROW_IF_NOT(v.size() == dim_, ErrorCode::dimension_mismatch,
                             "row dimension " + std::to_string(v.size()) + " != " +
                                     std::to_string(dim_));
        data_.insert(data_.end(), v.begin(), v.end());
    }

    std::vector<VectorData> to_rows() const {
        std::vector<VectorData> out;
        out.reserve(rows());
        for (std::size_t i = 0; i < rows(); ++i) {
            out.emplace_back(row(i).begin(), row(i).end());
        }
        return out;
    }

    const std::vector<float>& data() const noexcept { return data_; }
    std::vector<float>& data() noexcept { return data_; }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<float> data_;
};

/// Bytes held by live index structures, broken down by category.
struct MemoryUsage {
    std::size_t vector_data = 0;
    std::size_t tree = 0;
    std::size_t bloom_filters = 0;
    std::size_t shortlists = 0;
    std::size_t access_lists = 0;
    std::size_t postings = 0;

    std::size_t total() const noexcept {
        return vector_data + tree + bloom_filters + shortlists + access_lists + postings;
    }

    MemoryUsage& operator+=(const MemoryUsage& o) noexcept {
        vector_data += o.vector_data;
        tree += o.tree;
        bloom_filters += o.bloom_filters;
        shortlists += o.shortlists;
        access_lists += o.access_lists;
        postings += o.postings;
        return *this;
    }
};

/// Operation counters collected by searches; all fields are additive.
struct SearchStats {
    std::size_t nodes_visited = 0;
    std::size_t bloom_queries = 0;
    std::size_t distance_computations = 0;
    std::size_t predicate_evaluations = 0;
    std::size_t access_list_traversals = 0;
    std::size_t clusters_scanned = 0;
    std::size_t candidates = 0;

    SearchStats& operator+=(const SearchStats& o) noexcept {
        nodes_visited += o.nodes_visited;
        bloom_queries += o.bloom_queries;
        distance_computations += o.distance_computations;
        predicate_evaluations += o.predicate_evaluations;
        access_list_traversals += o.access_list_traversals;
        clusters_scanned += o.clusters_scanned;
        candidates += o.candidates;
        return *this;
    }
};

}  // namespace curator
