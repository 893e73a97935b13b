#pragma once

#include <filesystem>
#include <vector>

#include "curator/core.hpp"
#include "curator/io/binary.hpp"

namespace curator::io {

/// Parses fvecs bytes: per vector a little-endian int32 dimension followed by
/// that many little-endian IEEE-754 floats. An empty buffer is an empty set
/// (dimension 0).
inline DenseMatrix parse_fvecs(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    DenseMatrix out;
    std::size_t index = 0;
    while (!r.at_end()) {
        CURATOR_THROW_IF_NOT(r.remaining() >= 4, ErrorCode::malformed_header,
                             "fvecs: partial dimension header for vector " + std::to_string(index));
        const std::int32_t d = r.i32();
        CURATOR_THROW_IF_NOT(d > 0, ErrorCode::malformed_header,
                             "fvecs: non-positive dimension " + std::to_string(d) + " for vector " +
                                     std::to_string(index));
        if (index == 0) {
            out = DenseMatrix(static_cast<std::size_t>(d));
            out.data().reserve(bytes.size() / 4);
        }
        CURATOR_THROW_IF_NOT(static_cast<std::size_t>(d) == out.dim(), ErrorCode::inconsistent_dimension,
                             "fvecs: vector " + std::to_string(index) + " has dimension " +
                                     std::to_string(d) + ", expected " + std::to_string(out.dim()));
        CURATOR_THROW_IF_NOT(r.remaining() >= static_cast<std::size_t>(d) * 4, ErrorCode::truncated,
                             "fvecs: payload of vector " + std::to_string(index) + " is truncated");
        auto& data = out.data();
        for (std::int32_t j = 0; j < d; ++j) {
            data.push_back(r.f32());
        }
        ++index;
    }
    return out;
}

inline DenseMatrix read_fvecs(const std::filesystem::path& path) { return parse_fvecs(read_file_bytes(path)); }

inline std::vector<std::uint8_t> encode_fvecs(const DenseMatrix& vectors) {
    ByteWriter w;
    w.buffer().reserve(vectors.rows() * (4 + 4 * vectors.dim()));
    for (std::size_t i = 0; i < vectors.rows(); ++i) {
        w.i32(static_cast<std::int32_t>(vectors.dim()));
        for (float f : vectors.row(i)) {
            w.f32(f);
        }
    }
    return w.buffer();
}

inline void write_fvecs(const std::filesystem::path& path, const DenseMatrix& vectors) {
    write_file_atomic(path, encode_fvecs(vectors));
}

}  // namespace curator::io
