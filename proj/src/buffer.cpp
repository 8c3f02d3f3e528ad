#include "moc/buffer.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace moc {

const char* to_string(BufferStatus s) {
    switch (s) {
        case BufferStatus::Free: return "Free";
        case BufferStatus::Snapshotting: return "Snapshotting";
        case BufferStatus::Snapshotted: return "Snapshotted";
        case BufferStatus::Persisting: return "Persisting";
        case BufferStatus::Recovery: return "Recovery";
    }
    return "?";
}

std::optional<int> TripleBuffer::find(BufferStatus status) const {
    for (int i = 0; i < kSlots; ++i) {
        if (slots_[i].status == status) return i;
    }
    return std::nullopt;
}

int TripleBuffer::count(BufferStatus status) const {
    return static_cast<int>(std::count_if(slots_.begin(), slots_.end(),
                                          [&](const BufferSlot& s) { return s.status == status; }));
}

std::optional<int> TripleBuffer::begin_snapshot(std::uint64_t version) {
    if (snapshotting()) throw std::logic_error("begin_snapshot: previous snapshot still in progress");
    if (last_version_ && version <= *last_version_) {
        throw std::logic_error("begin_snapshot: version " + std::to_string(version) + " does not increase");
    }
    std::optional<int> pick;
    for (int i = 0; i < kSlots; ++i) {
        const BufferSlot& s = slots_[i];
        if (s.status != BufferStatus::Free) continue;
        if (!pick) {
            pick = i;
            continue;
        }
        const BufferSlot& p = slots_[*pick];
        // empty slots first, then the oldest retained content
        const bool older = !s.intact ? p.intact : (p.intact && *s.version < *p.version);
        if (older) pick = i;
    }
    if (!pick) return std::nullopt;
    BufferSlot& s = slots_[*pick];
    s.status = BufferStatus::Snapshotting;
    s.version = version;
    s.intact = false;
    last_version_ = version;
    return pick;
}

bool TripleBuffer::complete_snapshot(int slot) {
    BufferSlot& s = slots_.at(static_cast<std::size_t>(slot));
    if (s.status != BufferStatus::Snapshotting) {
        throw std::logic_error(std::string("complete_snapshot: slot is ") + to_string(s.status));
    }
    s.status = BufferStatus::Snapshotted;
    s.intact = true;
    if (persisting()) return false;
    s.status = BufferStatus::Persisting;
    return true;
}

std::optional<int> TripleBuffer::complete_persist(int slot, bool ok) {
    BufferSlot& s = slots_.at(static_cast<std::size_t>(slot));
    if (s.status != BufferStatus::Persisting) {
        throw std::logic_error(std::string("complete_persist: slot is ") + to_string(s.status));
    }
    if (ok) {
        if (auto prev = recovery()) slots_[*prev].status = BufferStatus::Free;
        s.status = BufferStatus::Recovery;
    } else {
        s.status = BufferStatus::Free;
    }
    start_next_persist();
    return persisting();
}

void TripleBuffer::start_next_persist() {
    std::optional<int> next;
    for (int i = 0; i < kSlots; ++i) {
        if (slots_[i].status != BufferStatus::Snapshotted) continue;
        if (!next || *slots_[i].version < *slots_[*next].version) next = i;
    }
    if (next) slots_[*next].status = BufferStatus::Persisting;
}

void TripleBuffer::reset() {
    slots_ = {};
}

std::vector<int> TripleBuffer::readable() const {
    std::vector<int> out;
    for (int i = 0; i < kSlots; ++i) {
        if (slots_[i].intact) out.push_back(i);
    }
    std::sort(out.begin(), out.end(), [&](int a, int b) { return *slots_[a].version > *slots_[b].version; });
    return out;
}

}  // namespace moc
