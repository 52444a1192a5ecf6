// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"
#include "wsmt/rng.hpp"

using namespace wsmt;

TEST_SUITE("rng") {

TEST_CASE("fnv1a64 matches the reference constants") {
  CHECK(fnv1a64(std::string_view{}) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64(std::string_view{"a"}) == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("same seed gives the same stream") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  RngStream a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);
}

TEST_CASE("derive is independent of parent consumption") {
  RngStream a(7);
  RngStream child_before = a.derive("x");
  a.next_u64();
  a.next_u64();
  RngStream child_after = a.derive("x");
  CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("derived streams are distinct per label and index") {
  RngStream root(9);
  std::set<std::uint64_t> seen;
  seen.insert(root.derive("alpha").next_u64());
  seen.insert(root.derive("beta").next_u64());
  for (int i = 0; i < 16; ++i) seen.insert(root.derive(i).next_u64());
  CHECK(seen.size() == 18);
}

TEST_CASE("uniform stays inside the half-open unit interval") {
  RngStream r(3);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform_below respects the bound and hits every value") {
  RngStream r(4);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    std::uint64_t v = r.uniform_below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("categorical tracks the weights") {
  RngStream r(5);
  std::vector<double> w{1.0, 3.0};
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ones += r.categorical(w) == 1;
  double freq = static_cast<double>(ones) / n;
  CHECK(freq == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("bernoulli frequency matches p") {
  RngStream r(6);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += r.bernoulli(0.2);
  CHECK(static_cast<double>(hits) / n == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("normal has roughly standard moments") {
  RngStream r(8);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double v = r.normal();
    sum += v;
    sq += v * v;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("hex64 is fixed-width lowercase hex") {
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xdeadbeefULL) == "00000000deadbeef");
  CHECK(hex64(0xffffffffffffffffULL) == "ffffffffffffffff");
}

}
