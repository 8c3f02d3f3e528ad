#include "moc/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "moc/crc32c.hpp"
#include "moc/errors.hpp"

namespace fs = std::filesystem;

namespace moc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

[[noreturn]] void io_error(const std::string& what, const fs::path& p) {
    throw StoreError(what + " " + p.string() + ": " + std::strerror(errno));
}

void sync_dir(const fs::path& dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (fd < 0) io_error("open dir", dir);
    ::fsync(fd);
    ::close(fd);
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes, CrashInjector* crash, bool do_sync) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) io_error("open", path);
    const std::uint64_t allowed = crash ? crash->allow(bytes.size()) : bytes.size();
    std::uint64_t done = 0;
    while (done < allowed) {
        const ssize_t n = ::write(fd, bytes.data() + done, allowed - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            io_error("write", path);
        }
        done += static_cast<std::uint64_t>(n);
    }
    if (do_sync && ::fsync(fd) != 0) {
        ::close(fd);
        io_error("fsync", path);
    }
    ::close(fd);
    if (allowed < bytes.size()) throw SimulatedCrash();
}

void rename_file(const fs::path& from, const fs::path& to, CrashInjector* crash, bool do_sync) {
    if (crash && crash->allow(1) == 0) throw SimulatedCrash();
    if (::rename(from.c_str(), to.c_str()) != 0) io_error("rename", from);
    if (do_sync) sync_dir(to.parent_path());
}

std::string hex32(std::uint32_t v) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

Bytes read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot read " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::optional<std::uint64_t> parse_version_dir(const std::string& name) {
    if (name.size() < 7 || name[0] != 'v') return std::nullopt;
    std::uint64_t v = 0;
    const char* end = name.data() + name.size();
    auto [p, ec] = std::from_chars(name.data() + 1, end, v);
    if (ec != std::errc{} || p != end) return std::nullopt;
    return v;
}

}  // namespace

void fill_payload(std::string_view key, std::uint64_t version, std::uint64_t offset,
                  std::span<std::uint8_t> out) {
    const std::uint64_t seed = splitmix64(fnv1a(key) ^ splitmix64(version));
    std::uint64_t block = UINT64_MAX;
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint64_t pos = offset + i;
        if (pos / 8 != block) {
            block = pos / 8;
            word = splitmix64(seed + block * 0x9E3779B97F4A7C15ull);
        }
        out[i] = static_cast<std::uint8_t>(word >> (8 * (pos % 8)));
    }
}

Bytes make_payload(std::string_view key, std::uint64_t version, std::uint64_t offset, std::uint64_t length) {
    Bytes out(length);
    fill_payload(key, version, offset, out);
    return out;
}

std::uint64_t CrashInjector::allow(std::uint64_t n) {
    const std::uint64_t left = budget_ - consumed_;
    if (n <= left) {
        consumed_ += n;
        return n;
    }
    consumed_ = budget_;
    exhausted_ = true;
    return left;
}

std::string entry_key(const std::string& unit_key, std::uint32_t part, std::uint32_t parts) {
    return parts > 1 ? unit_key + ".part" + std::to_string(part) : unit_key;
}

std::string rank_dir_name(Rank rank) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rank%04u", rank);
    return buf;
}

std::string version_dir_name(std::uint64_t version) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "v%06llu", static_cast<unsigned long long>(version));
    return buf;
}

DiskStore::DiskStore(fs::path root, StoreOptions options) : root_(std::move(root)), options_(options) {}

fs::path DiskStore::version_dir(std::uint64_t version) const {
    return root_ / version_dir_name(version);
}

StoreManifest DiskStore::persist(std::uint64_t version, std::uint64_t iteration,
                                 const std::vector<PendingEntry>& entries, CrashInjector* crash) {
    const fs::path dir = version_dir(version);
    if (fs::exists(dir / "COMPLETE")) {
        throw StoreError("version " + std::to_string(version) + " is already complete");
    }
    std::error_code ec;
    fs::remove_all(dir, ec);
    fs::create_directories(dir, ec);
    if (ec) throw StoreError("cannot create " + dir.string() + ": " + ec.message());

    StoreManifest manifest;
    manifest.version = version;
    manifest.iteration = iteration;
    for (const auto& e : entries) {
        const std::string rel = rank_dir_name(e.rank) + "/" + e.key + ".bin";
        fs::create_directories(dir / rank_dir_name(e.rank), ec);
        if (ec) throw StoreError("cannot create rank dir: " + ec.message());
        write_file(dir / rel, e.bytes, crash, options_.fsync);
        manifest.entries.push_back({e.key, rel, e.bytes.size(), crc32c(e.bytes)});
    }
    if (options_.fsync) {
        for (const auto& sub : fs::directory_iterator(dir)) {
            if (sub.is_directory()) sync_dir(sub.path());
        }
    }

    std::ostringstream text;
    text << "# moc-manifest version=" << version << " iteration=" << iteration << "\n";
    for (const auto& m : manifest.entries) {
        text << m.key << '\t' << m.path << '\t' << m.size << '\t' << hex32(m.crc) << '\n';
    }
    const std::string body = text.str();
    write_file(dir / "manifest.tsv.tmp",
               {reinterpret_cast<const std::uint8_t*>(body.data()), body.size()}, crash, options_.fsync);
    rename_file(dir / "manifest.tsv.tmp", dir / "manifest.tsv", crash, options_.fsync);
    write_file(dir / "COMPLETE.tmp", {}, crash, options_.fsync);
    rename_file(dir / "COMPLETE.tmp", dir / "COMPLETE", crash, options_.fsync);
    if (options_.fsync) sync_dir(root_);
    manifest.complete = true;
    return manifest;
}

std::vector<std::uint64_t> DiskStore::versions() const {
    std::vector<std::uint64_t> out;
    std::error_code ec;
    if (!fs::is_directory(root_, ec)) return out;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (!entry.is_directory()) continue;
        if (auto v = parse_version_dir(entry.path().filename().string())) out.push_back(*v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool DiskStore::is_complete(std::uint64_t version) const {
    return fs::exists(version_dir(version) / "COMPLETE");
}

std::vector<std::uint64_t> DiskStore::complete_versions() const {
    std::vector<std::uint64_t> out;
    for (auto v : versions()) {
        if (is_complete(v)) out.push_back(v);
    }
    return out;
}

std::optional<std::uint64_t> DiskStore::latest_complete() const {
    const auto all = complete_versions();
    if (all.empty()) return std::nullopt;
    return all.back();
}

StoreManifest DiskStore::read_manifest(std::uint64_t version) const {
    if (!is_complete(version)) {
        throw IncompleteVersion("version " + std::to_string(version) + " has no COMPLETE marker");
    }
    std::ifstream in(version_dir(version) / "manifest.tsv");
    if (!in) throw StoreError("version " + std::to_string(version) + " has no manifest");
    StoreManifest m;
    m.version = version;
    m.complete = true;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("iteration=");
            if (pos != std::string::npos) m.iteration = std::stoull(line.substr(pos + 10));
            header = true;
            continue;
        }
        std::istringstream row(line);
        ManifestEntry e;
        std::string size, crc;
        if (!std::getline(row, e.key, '\t') || !std::getline(row, e.path, '\t') ||
            !std::getline(row, size, '\t') || !std::getline(row, crc)) {
            throw StoreError("malformed manifest row in version " + std::to_string(version));
        }
        e.size = std::stoull(size);
        e.crc = static_cast<std::uint32_t>(std::stoul(crc, nullptr, 16));
        m.entries.push_back(std::move(e));
    }
    if (!header) throw StoreError("manifest of version " + std::to_string(version) + " lacks its header");
    return m;
}

std::map<std::string, Bytes> DiskStore::load(std::uint64_t version) const {
    const StoreManifest m = read_manifest(version);
    std::map<std::string, Bytes> out;
    for (const auto& e : m.entries) {
        Bytes data;
        try {
            data = read_file(version_dir(version) / e.path);
        } catch (const StoreError&) {
            throw ChecksumMismatch(e.key);
        }
        if (data.size() != e.size || crc32c(data) != e.crc) throw ChecksumMismatch(e.key);
        out.emplace(e.key, std::move(data));
    }
    return out;
}

void VersionCatalog::commit(std::uint64_t version, std::uint64_t iteration,
                            const std::vector<std::uint32_t>& units) {
    if (!iterations_.empty() && version <= iterations_.rbegin()->first) {
        throw std::logic_error("VersionCatalog: versions must increase");
    }
    iterations_.emplace(version, iteration);
    for (auto u : units) latest_.at(u) = version;
}

std::optional<std::uint64_t> VersionCatalog::latest_version() const {
    if (iterations_.empty()) return std::nullopt;
    return iterations_.rbegin()->first;
}

}  // namespace moc
