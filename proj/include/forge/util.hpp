#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

std::string trim(std::string_view s);

/// FNV-1a 64-bit. Stable across platforms and builds, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data);

/// splitmix64 finalizer; full-avalanche mixing of a 64-bit state.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent 64-bit seed from a root seed and a list of string
/// key parts. Identical inputs give identical seeds on every platform, so
/// randomness tied to a derived seed is immune to execution order.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::string_view> parts);

/// Minimal counter-based random stream over a derived seed.
class SeededStream {
public:
    explicit SeededStream(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    bool next_bit() { return (next() & 1u) != 0; }
    /// Uniform in [0, 1).
    double next_unit();

private:
    std::uint64_t state_;
};

/// SHA-256 hex digest of a byte string (lowercase hex).
std::string sha256_hex(std::string_view data);
/// SHA-256 hex digest of a file's contents. Throws ConfigError when unreadable.
std::string sha256_file_hex(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
/// Reads a file into lines, without trailing '\n'. A trailing empty line is dropped.
std::vector<std::string> read_lines(const std::string& path);

/// Runs fn(0..n-1) with at most `width` worker threads. width <= 1 runs
/// inline. The first exception thrown by any worker is rethrown after all
/// workers finish; results must be aggregated by index, never by completion
/// order.
void parallel_for(std::size_t n, int width, const std::function<void(std::size_t)>& fn);

/// Append-only warning sink shared across parallel tasks.
class WarningLog {
public:
    void warn(std::string message);
    std::vector<std::string> snapshot() const;
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::vector<std::string> entries_;
};

} // namespace forge
