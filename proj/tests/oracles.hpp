#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "fixwal/leakage.hpp"

namespace fixwal::test {

// Exhaustive search over every nondecreasing boundary vector drawn from
// {0} and the observed lengths; the first strict improvement wins, so ties go
// to the lexicographically smallest vector.
struct BruteForceResult {
  IntervalMapping mapping;
  std::size_t objective = 0;
};

inline BruteForceResult brute_force_mapping(const std::vector<LengthObservation>& data) {
  std::vector<std::size_t> sizes;
  std::vector<std::uint32_t> cuts{0};
  for (const auto& d : data) {
    sizes.push_back(d.wal_size);
    if (d.length > 0) cuts.push_back(d.length);
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const std::size_t m = sizes.size();

  // count[i][v]: observations of size i with length == cuts[v].
  std::vector<std::vector<std::size_t>> count(m, std::vector<std::size_t>(cuts.size(), 0));
  for (const auto& d : data) {
    const auto i = std::lower_bound(sizes.begin(), sizes.end(), d.wal_size) - sizes.begin();
    const auto v = std::lower_bound(cuts.begin(), cuts.end(), d.length) - cuts.begin();
    ++count[i][v];
  }
  auto score = [&](const std::vector<std::size_t>& b) {
    std::size_t total = 0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t v = b[i] + 1; v <= b[i + 1]; ++v) total += count[i][v];
    }
    return total;
  };

  std::vector<std::size_t> b(m + 1, 0);
  b[m] = cuts.size() - 1;
  std::vector<std::size_t> best_b;
  std::size_t best = 0;
  bool any = false;
  auto rec = [&](auto&& self, std::size_t pos) -> void {
    if (pos == m) {
      const std::size_t s = score(b);
      if (!any || s > best) {
        any = true;
        best = s;
        best_b = b;
      }
      return;
    }
    for (std::size_t v = b[pos - 1]; v <= b[m]; ++v) {
      b[pos] = v;
      self(self, pos + 1);
    }
  };
  if (m == 1) {
    best_b = b;
    best = score(b);
  } else {
    rec(rec, 1);
  }

  BruteForceResult out;
  out.objective = best;
  for (std::size_t i = 0; i < m; ++i) {
    out.mapping.entries.push_back({sizes[i], Interval{cuts[best_b[i]], cuts[best_b[i + 1]]}});
  }
  return out;
}

// Small random instance: up to 6 WAL sizes and up to 30 distinct lengths,
// with sizes loosely tracking length so the optimum is not trivial.
inline std::vector<LengthObservation> random_small_instance(std::mt19937_64& rng) {
  const std::size_t n_sizes = 1 + rng() % 6;
  const std::uint32_t max_len = 1 + static_cast<std::uint32_t>(rng() % 30);
  const std::size_t n = 1 + rng() % 60;
  std::vector<LengthObservation> out;
  for (std::size_t j = 0; j < n; ++j) {
    const std::uint32_t len = 1 + static_cast<std::uint32_t>(rng() % max_len);
    std::size_t bucket = (len - 1) * n_sizes / max_len;
    if (rng() % 4 == 0) bucket = rng() % n_sizes;
    out.push_back({128 * (bucket + 1), len});
  }
  return out;
}

// Hand-built confusion fixture for mapping {128 -> (0,10], 256 -> (10,20]}.
//   size 128: lengths 5, 8, 10 correct, 12 wrong        -> precision 3/4
//   size 256: lengths 15, 20, 11 correct, 3, 25 wrong   -> precision 3/5
//   size 512: length 7, no interval                     -> unmapped
//   (0,10] holds 5, 8, 10, 3, 7                         -> recall 3/5
//   (10,20] holds 12, 15, 20, 11                        -> recall 3/4
inline IntervalMapping fixture_mapping() {
  IntervalMapping m;
  m.entries = {{128, {0, 10}}, {256, {10, 20}}};
  return m;
}

inline std::vector<LengthObservation> fixture_items() {
  return {{128, 5},  {128, 8},  {128, 12}, {128, 10}, {256, 15},
          {256, 20}, {256, 3},  {256, 25}, {512, 7},  {256, 11}};
}

}  // namespace fixwal::test
