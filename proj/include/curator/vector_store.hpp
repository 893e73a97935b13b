#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "curator/core.hpp"

namespace curator {

/// Dense slot index of a live record. Shortlists and posting lists store
/// these instead of 64-bit labels.
using Slot = std::uint32_t;
inline constexpr Slot kInvalidSlot = std::numeric_limits<Slot>::max();

using NodeId = std::uint32_t;
inline constexpr NodeId kInvalidNode = std::numeric_limits<NodeId>::max();

/// Sorted, duplicate-free list of tenants with access to one vector.
class AccessList {
public:
    AccessList() = default;

    bool contains(TenantId t) const noexcept {
        return std::binary_search(tenants_.begin(), tenants_.end(), t);
    }

    /// Returns false when already present.
    bool insert(TenantId t) {
        auto it = std::lower_bound(tenants_.begin(), tenants_.end(), t);
        if (it != tenants_.end() && *it == t) {
            return false;
        }
        tenants_.insert(it, t);
        return true;
    }

    bool erase(TenantId t) {
        auto it = std::lower_bound(tenants_.begin(), tenants_.end(), t);
        if (it == tenants_.end() || *it != t) {
            return false;
        }
        tenants_.erase(it);
        return true;
    }

    std::size_t size() const noexcept { return tenants_.size(); }
    bool empty() const noexcept { return tenants_.empty(); }
    auto begin() const noexcept { return tenants_.begin(); }
    auto end() const noexcept { return tenants_.end(); }
    const std::vector<TenantId>& tenants() const noexcept { return tenants_; }

    friend bool operator==(const AccessList&, const AccessList&) = default;

private:
    std::vector<TenantId> tenants_;
};

/// Snapshot of one stored vector as returned by lookups.
struct VectorRecord {
    Label label{};
    VectorData data;
    TenantId owner{};
    AccessList access_list;
    NodeId assigned_leaf = kInvalidNode;
};

/// Global store of vectors keyed by label. Vector data lives in one
/// contiguous slab addressed by slot; freed slots are reused smallest-first.
class VectorStore {
public:
    VectorStore() = default;
    explicit VectorStore(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return by_label_.size(); }
    bool empty() const noexcept { return by_label_.empty(); }
    std::size_t slot_capacity() const noexcept { return slots_.size(); }

    bool contains(Label label) const noexcept { return by_label_.count(label) != 0; }

    Slot add(Label label, VectorView data, TenantId owner, NodeId leaf = kInvalidNode) {
        CURATOR_THROW_IF_NOT(data.size() == dim_, ErrorCode::dimension_mismatch,
                             "vector dimension " + std::to_string(data.size()) +
                                     " does not match index dimension " + std::to_string(dim_));
        CURATOR_THROW_IF_NOT(all_finite(data), ErrorCode::non_finite_value,
                             "vector contains non-finite components");
        CURATOR_THROW_IF_NOT(!contains(label), ErrorCode::duplicate_label,
                             "label " + std::to_string(to_underlying(label)) + " already exists");
        Slot slot;
        if (!free_slots_.empty()) {
            std::pop_heap(free_slots_.begin(), free_slots_.end(), std::greater<>{});
            slot = free_slots_.back();
            free_slots_.pop_back();
        } else {
            slot = static_cast<Slot>(slots_.size());
            slots_.emplace_back();
            data_.resize(data_.size() + dim_);
        }
        std::copy(data.begin(), data.end(), data_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
        SlotEntry& e = slots_[slot];
        e.label = label;
        e.owner = owner;
        e.access = AccessList{};
        e.access.insert(owner);
        e.leaf = leaf;
        e.live = true;
        by_label_.emplace(label, slot);
        return slot;
    }

    void remove(Label label) {
        const Slot slot = slot_of(label);
        by_label_.erase(label);
        SlotEntry& e = slots_[slot];
        e.live = false;
        e.access = AccessList{};
        std::fill_n(data_.begin() + static_cast<std::ptrdiff_t>(slot * dim_), dim_, 0.0f);
        free_slots_.push_back(slot);
        std::push_heap(free_slots_.begin(), free_slots_.end(), std::greater<>{});
    }

    Slot slot_of(Label label) const {
        auto it = by_label_.find(label);
        CURATOR_THROW_IF_NOT(it != by_label_.end(), ErrorCode::unknown_label,
                             "unknown label " + std::to_string(to_underlying(label)));
        return it->second;
    }

    Slot find_slot(Label label) const noexcept {
        auto it = by_label_.find(label);
        return it == by_label_.end() ? kInvalidSlot : it->second;
    }

    const float* vector_ptr(Slot slot) const noexcept { return data_.data() + static_cast<std::size_t>(slot) * dim_; }
    VectorView vector(Slot slot) const noexcept { return {vector_ptr(slot), dim_}; }
    Label label(Slot slot) const noexcept { return slots_[slot].label; }
    TenantId owner(Slot slot) const noexcept { return slots_[slot].owner; }
    NodeId leaf(Slot slot) const noexcept { return slots_[slot].leaf; }
    void set_leaf(Slot slot, NodeId leaf) noexcept { slots_[slot].leaf = leaf; }
    bool live(Slot slot) const noexcept { return slot < slots_.size() && slots_[slot].live; }

    const AccessList& access(Slot slot) const noexcept { return slots_[slot].access; }
    AccessList& access(Slot slot) noexcept { return slots_[slot].access; }

    bool has_access(Label label, TenantId t) const noexcept {
        const Slot s = find_slot(label);
        return s != kInvalidSlot && slots_[s].access.contains(t);
    }

    VectorRecord record(Label label) const {
        const Slot s = slot_of(label);
        const SlotEntry& e = slots_[s];
        VectorView v = vector(s);
        return VectorRecord{e.label, VectorData(v.begin(), v.end()), e.owner, e.access, e.leaf};
    }

    /// Visits live slots in ascending slot order.
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (Slot s = 0; s < slots_.size(); ++s) {
            if (slots_[s].live) {
                fn(s);
            }
        }
    }

    /// Live labels in ascending order.
    std::vector<Label> labels() const {
        std::vector<Label> out;
        out.reserve(size());
        for (const auto& [label, slot] : by_label_) {
            out.push_back(label);
        }
        std::sort(out.begin(), out.end(),
                  [](Label a, Label b) { return to_underlying(a) < to_underlying(b); });
        return out;
    }

    /// Vector data bytes (n * d * 4) and access-list bytes for live records.
    std::size_t vector_bytes() const noexcept { return size() * dim_ * sizeof(float); }

    std::size_t access_list_bytes() const noexcept {
        std::size_t bytes = 0;
        for (const auto& e : slots_) {
            if (e.live) {
                // label, owner, and one tenant id per entry
                bytes += sizeof(Label) + sizeof(TenantId) + e.access.size() * sizeof(TenantId);
            }
        }
        return bytes;
    }

private:
    struct SlotEntry {
        Label label{};
        TenantId owner{};
        AccessList access;
        NodeId leaf = kInvalidNode;
        bool live = false;
    };

    std::size_t dim_ = 0;
    std::vector<float> data_;
    std::vector<SlotEntry> slots_;
    std::vector<Slot> free_slots_;  // min-heap
    std::unordered_map<Label, Slot> by_label_;
};

}  // namespace curator
