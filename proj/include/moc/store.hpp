#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "moc/topology.hpp"

namespace moc {

using Bytes = std::vector<std::uint8_t>;

/// Deterministic stand-in for tensor bytes: the content of `key` at
/// `version`, starting at byte `offset` of the unit.
void fill_payload(std::string_view key, std::uint64_t version, std::uint64_t offset,
                  std::span<std::uint8_t> out);
Bytes make_payload(std::string_view key, std::uint64_t version, std::uint64_t offset, std::uint64_t length);

struct ManifestEntry {
    std::string key;
    std::string path;  // relative to the version directory
    std::uint64_t size = 0;
    std::uint32_t crc = 0;

    bool operator==(const ManifestEntry&) const = default;
};

struct StoreManifest {
    std::uint64_t version = 0;
    std::uint64_t iteration = 0;
    std::vector<ManifestEntry> entries;
    bool complete = false;

    bool operator==(const StoreManifest&) const = default;
};

/// One file to persist: `key` goes to rank<rank>/<key>.bin.
struct PendingEntry {
    std::string key;
    Rank rank = 0;
    Bytes bytes;
};

/// Thrown by a CrashInjector when its budget runs out mid-persist.
class SimulatedCrash : public std::runtime_error {
public:
    SimulatedCrash() : std::runtime_error("simulated crash") {}
};

/// Byte budget over a persist: every file byte written costs 1 and every
/// rename costs 1. When the budget runs out the write stops where it is
/// (leaving a truncated file or an unrenamed temporary) and SimulatedCrash
/// is thrown.
class CrashInjector {
public:
    explicit CrashInjector(std::uint64_t budget = UINT64_MAX) : budget_(budget) {}

    /// Bytes of an n-byte write that may still go through.
    std::uint64_t allow(std::uint64_t n);
    bool exhausted() const { return exhausted_; }
    std::uint64_t consumed() const { return consumed_; }

private:
    std::uint64_t budget_;
    std::uint64_t consumed_ = 0;
    bool exhausted_ = false;
};

struct StoreOptions {
    bool fsync = true;
};

/// Versioned checkpoint store on a local filesystem:
///   <root>/v<6-digit version>/rank<4-digit rank>/<key>.bin
///   <root>/v<6-digit version>/manifest.tsv
///   <root>/v<6-digit version>/COMPLETE   (zero length, published last)
class DiskStore {
public:
    explicit DiskStore(std::filesystem::path root, StoreOptions options = {});

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path version_dir(std::uint64_t version) const;

    /// Writes every entry, then the manifest, then the COMPLETE marker.
    /// A leftover incomplete directory for the same version is replaced;
    /// an already complete one is an error.
    StoreManifest persist(std::uint64_t version, std::uint64_t iteration,
                          const std::vector<PendingEntry>& entries, CrashInjector* crash = nullptr);

    /// Version numbers present on disk, complete or not, ascending.
    std::vector<std::uint64_t> versions() const;
    std::vector<std::uint64_t> complete_versions() const;
    std::optional<std::uint64_t> latest_complete() const;
    bool is_complete(std::uint64_t version) const;

    /// Parses the manifest of a complete version (no payload checks).
    StoreManifest read_manifest(std::uint64_t version) const;

    /// All entries of `version` keyed by manifest key, with size and CRC
    /// verified. Throws IncompleteVersion or ChecksumMismatch.
    std::map<std::string, Bytes> load(std::uint64_t version) const;

private:
    std::filesystem::path root_;
    StoreOptions options_;
};

std::string entry_key(const std::string& unit_key, std::uint32_t part, std::uint32_t parts);
std::string rank_dir_name(Rank rank);
std::string version_dir_name(std::uint64_t version);

/// In-memory record of persisted versions: for each unit, the newest
/// complete version that holds it. The simulator uses this by default and
/// mirrors it to a DiskStore when one is configured.
class VersionCatalog {
public:
    VersionCatalog() = default;
    explicit VersionCatalog(std::size_t unit_count) : latest_(unit_count) {}

    /// Records a complete version holding `units`. Versions must increase.
    void commit(std::uint64_t version, std::uint64_t iteration, const std::vector<std::uint32_t>& units);

    bool empty() const { return iterations_.empty(); }
    std::size_t size() const { return iterations_.size(); }
    std::optional<std::uint64_t> latest_version() const;
    std::optional<std::uint64_t> latest_for_unit(std::size_t unit) const { return latest_.at(unit); }
    std::uint64_t iteration_of(std::uint64_t version) const { return iterations_.at(version); }
    std::size_t unit_count() const { return latest_.size(); }

private:
    std::vector<std::optional<std::uint64_t>> latest_;
    std::map<std::uint64_t, std::uint64_t> iterations_;
};

}  // namespace moc
