#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace av {

// ---- encoding ----

std::string base64_encode(std::string_view bytes);
/// Decodes standard base64 (padding optional). Throws ParseError on
/// any character outside the alphabet.
std::string base64_decode(std::string_view text);

/// 64-bit FNV-1a, printed as 16 hex digits. Used as a content digest
/// for compiled artifacts, not for security.
std::string fnv1a64_hex(std::string_view data);

// ---- seeded randomness ----
//
// Everything random in the library funnels through mt19937_64 plus the
// helpers below, so results are reproducible across platforms (std
// distributions are implementation-defined and deliberately avoided).

/// splitmix64 finalizer; mixes a seed with a stream index to derive
/// independent per-task seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Unbiased integer in [0, n) via rejection sampling. n must be > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

/// k distinct indices drawn from [0, n), in draw order.
std::vector<int> sample_without_replacement(std::mt19937_64& rng, int n, int k);

// ---- filesystem ----

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// ---- parallelism ----

/// Runs fn(0..n-1) across up to `workers` threads. Exceptions from any
/// job are rethrown (first one wins). workers <= 1 runs inline.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Worker count actually used for a job of size n under a configured
/// cap (0 = hardware concurrency).
int effective_workers(int configured, std::size_t n);

}  // namespace av
