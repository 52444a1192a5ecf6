// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace wsmt {

// Counter-based pseudo-random stream. Each draw is a bijective 64-bit mix of
// `key + counter`, so the sequence for a given key is independent of how other
// streams are consumed. Streams are derived by name or index from a parent
// key, which keeps every stochastic component of a run reproducible from the
// single run seed no matter how work is scheduled across threads.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed);

  // Child stream with an independent key; the parent is left untouched.
  RngStream derive(std::string_view label) const;
  RngStream derive(std::uint64_t index) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_below(std::uint64_t n);
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller (no cached spare, for determinism).
  double normal();
  bool bernoulli(double p);
  // Index sampled from unnormalized nonnegative weights.
  std::size_t categorical(const std::vector<double>& weights);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// FNV-1a 64-bit hash over raw bytes; used for stream derivation and for the
// corpus/checkpoint checksums recorded in manifests.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(std::string_view s,
                      std::uint64_t seed = 0xcbf29ce484222325ull);

// 16-digit lowercase hex, the manifest rendering of hashes.
std::string hex64(std::uint64_t v);

}  // namespace wsmt
