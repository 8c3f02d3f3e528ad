#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace moc {

enum class BufferStatus : std::uint8_t { Free, Snapshotting, Snapshotted, Persisting, Recovery };

const char* to_string(BufferStatus s);

struct BufferSlot {
    BufferStatus status = BufferStatus::Free;
    // Version of the content held. A Free buffer keeps the content it had
    // until it is reused; `intact` says whether that content is readable.
    std::optional<std::uint64_t> version;
    bool intact = false;

    bool operator==(const BufferSlot&) const = default;
};

/// Host-memory buffer ring of one checkpoint agent: snapshot, persist and
/// recovery roles rotate over three slots. Only status changes live here;
/// the caller keeps whatever content metadata it needs per slot id.
class TripleBuffer {
public:
    static constexpr int kSlots = 3;

    /// Claims a Free slot for `version` (the one holding the oldest content).
    /// Returns nullopt when none is Free: the caller has to stall.
    /// Throws std::logic_error when a snapshot is still in progress or the
    /// version does not increase.
    std::optional<int> begin_snapshot(std::uint64_t version);

    /// Snapshotting -> Snapshotted. Starts persisting it right away when no
    /// slot is Persisting; returns true in that case.
    bool complete_snapshot(int slot);

    /// Ends the persist of `slot`. On success it becomes Recovery and the
    /// previous Recovery slot turns Free; on failure the slot turns Free and
    /// the previous Recovery slot stays. Then the oldest Snapshotted slot,
    /// if any, starts persisting and is returned.
    std::optional<int> complete_persist(int slot, bool ok);

    /// Drops everything (agent restart after a fault).
    void reset();

    const BufferSlot& slot(int i) const { return slots_.at(static_cast<std::size_t>(i)); }
    std::optional<int> find(BufferStatus status) const;
    std::optional<int> persisting() const { return find(BufferStatus::Persisting); }
    std::optional<int> recovery() const { return find(BufferStatus::Recovery); }
    std::optional<int> snapshotting() const { return find(BufferStatus::Snapshotting); }
    int count(BufferStatus status) const;
    /// Slots whose content can be read back, newest version first.
    std::vector<int> readable() const;

    bool operator==(const TripleBuffer&) const = default;

private:
    void start_next_persist();

    std::array<BufferSlot, kSlots> slots_{};
    std::optional<std::uint64_t> last_version_;
};

}  // namespace moc
