#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "pcrl/rng.hpp"

using pcrl::Rng;

TEST_CASE("identical seeds reproduce identical streams") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("substreams are independent of parent draw position") {
  Rng parent(7);
  const Rng child_before = parent.sub(3, 9);
  parent.next_u64();
  parent.next_u64();
  Rng child_after = parent.sub(3, 9);
  Rng reference = child_before;
  for (int i = 0; i < 100; ++i) CHECK(reference.next_u64() == child_after.next_u64());
}

TEST_CASE("distinct tags give distinct streams") {
  Rng root(1);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t step = 0; step < 10; ++step) {
    for (std::uint64_t prompt = 0; prompt < 10; ++prompt) {
      for (std::uint64_t j = 0; j < 4; ++j) {
        firsts.insert(root.sub(step, prompt, j).next_u64());
      }
    }
  }
  CHECK(firsts.size() == 400);
}

TEST_CASE("uniform doubles stay in [0,1) with the right mean") {
  Rng rng(123);
  double total = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    total += u;
  }
  CHECK(std::abs(total / n - 0.5) < 0.005);
}

TEST_CASE("normal draws match the first two moments") {
  Rng rng(9);
  const int n = 200000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mu = sum / n;
  const double var = sumsq / n - mu * mu;
  CHECK(std::abs(mu) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("bernoulli matches its probability") {
  Rng rng(5);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3) ? 1 : 0;
  CHECK(std::abs(static_cast<double>(hits) / n - 0.3) < 0.006);
}

TEST_CASE("below covers the full range uniformly") {
  Rng rng(11);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) counts[rng.below(7)]++;
  for (int c : counts) CHECK(std::abs(c - n / 7) < 500);
}
