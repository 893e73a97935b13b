#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "curator/core.hpp"

namespace curator {

/// Bit positions of one tenant in a filter of a given geometry. Computing
/// them once per query avoids rehashing at every tree node.
class BloomKey {
public:
    static constexpr std::size_t kMaxHashes = 16;

    BloomKey(TenantId t, std::size_t n_bits, std::size_t n_hashes) : n_hashes_(n_hashes) {
        CURATOR_THROW_IF_NOT(n_hashes >= 1 && n_hashes <= kMaxHashes, ErrorCode::invalid_argument,
                             "bloom hash count must be in [1, 16]");
        CURATOR_THROW_IF_NOT(n_bits >= 64 && n_bits % 64 == 0, ErrorCode::invalid_argument,
                             "bloom bit count must be a positive multiple of 64");
        // double hashing: h1 + i * h2
        const std::uint64_t h1 = splitmix64(to_underlying(t));
        const std::uint64_t h2 = splitmix64(h1) | 1ULL;
        for (std::size_t i = 0; i < n_hashes; ++i) {
            positions_[i] = static_cast<std::uint32_t>((h1 + i * h2) % n_bits);
        }
    }

    std::size_t hash_count() const noexcept { return n_hashes_; }
    std::uint32_t position(std::size_t i) const noexcept { return positions_[i]; }

private:
    std::array<std::uint32_t, kMaxHashes> positions_{};
    std::size_t n_hashes_;
};

/// Fixed-size Bloom filter over tenant ids. Supports insertion, union and
/// clearing; removal happens by recomputation from exact sources.
class TenantBloomFilter {
public:
    TenantBloomFilter() = default;
    TenantBloomFilter(std::size_t n_bits, std::size_t n_hashes)
            : words_(n_bits / 64, 0), n_hashes_(n_hashes) {
        CURATOR_THROW_IF_NOT(n_bits >= 64 && n_bits % 64 == 0, ErrorCode::invalid_argument,
                             "bloom bit count must be a positive multiple of 64");
        CURATOR_THROW_IF_NOT(n_hashes >= 1 && n_hashes <= BloomKey::kMaxHashes,
                             ErrorCode::invalid_argument, "bloom hash count must be in [1, 16]");
    }

    std::size_t bit_count() const noexcept { return words_.size() * 64; }
    std::size_t hash_count() const noexcept { return n_hashes_; }
    std::size_t byte_size() const noexcept { return words_.size() * sizeof(std::uint64_t); }

    BloomKey key(TenantId t) const { return BloomKey(t, bit_count(), n_hashes_); }

    void insert(const BloomKey& k) noexcept {
        for (std::size_t i = 0; i < k.hash_count(); ++i) {
            const auto p = k.position(i);
            words_[p >> 6] |= (1ULL << (p & 63));
        }
    }
    void insert(TenantId t) { insert(key(t)); }

    bool contains(const BloomKey& k) const noexcept {
        for (std::size_t i = 0; i < k.hash_count(); ++i) {
            const auto p = k.position(i);
            if ((words_[p >> 6] & (1ULL << (p & 63))) == 0) {
                return false;
            }
        }
        return true;
    }
    bool contains(TenantId t) const { return contains(key(t)); }

    TenantBloomFilter& operator|=(const TenantBloomFilter& other) noexcept {
        for (std::size_t i = 0; i < words_.size(); ++i) {
            words_[i] |= other.words_[i];
        }
        return *this;
    }

    void clear() noexcept { std::fill(words_.begin(), words_.end(), 0); }

    bool empty() const noexcept {
        return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
    }

    std::size_t popcount() const noexcept {
        std::size_t n = 0;
        for (auto w : words_) {
            n += static_cast<std::size_t>(std::popcount(w));
        }
        return n;
    }

    const std::vector<std::uint64_t>& words() const noexcept { return words_; }
    std::vector<std::uint64_t>& words() noexcept { return words_; }

    friend bool operator==(const TenantBloomFilter&, const TenantBloomFilter&) = default;

private:
    std::vector<std::uint64_t> words_;
    std::size_t n_hashes_ = 1;
};

}  // namespace curator
