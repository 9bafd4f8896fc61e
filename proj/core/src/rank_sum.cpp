#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

#include "glomkit/errors.hpp"
#include "glomkit/metrics.hpp"

namespace glom {
namespace {

constexpr int kExactLimit = 12;

// Midranks (1-based) of the pooled values.
std::vector<double> midranks(const std::vector<double>& pooled) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double rank = (i + j) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double u_from_ranks(const std::vector<double>& ranks, const std::vector<bool>& in_a, double na) {
  double r = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (in_a[i]) r += ranks[i];
  return r - na * (na + 1.0) / 2.0;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

double mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<bool> in_a(pooled.size(), false);
  std::fill_n(in_a.begin(), a.size(), true);
  return u_from_ranks(midranks(pooled), in_a, static_cast<double>(a.size()));
}

double rank_sum_test(std::span<const double> a, std::span<const double> b, RankSumMode mode) {
  require(a.size() >= 3 && b.size() >= 3, "rank_sum_test: each sample needs at least 3 values");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const int total = static_cast<int>(a.size() + b.size());

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  if (std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled.front(); })) return 1.0;

  const std::vector<double> ranks = midranks(pooled);
  std::vector<bool> in_a(pooled.size(), false);
  std::fill_n(in_a.begin(), a.size(), true);
  const double u = u_from_ranks(ranks, in_a, na);
  const double center = na * nb / 2.0;
  const double observed = std::abs(u - center);

  if (mode == RankSumMode::Exact || (mode == RankSumMode::Auto && total <= kExactLimit)) {
    require(total <= 20, "rank_sum_test: exact mode limited to 20 pooled values");
    // Every assignment of na pooled positions to sample a, as a bitmask.
    long extreme = 0, count = 0;
    const unsigned limit = 1u << total;
    for (unsigned mask = 0; mask < limit; ++mask) {
      if (std::popcount(mask) != static_cast<int>(a.size())) continue;
      double r = 0.0;
      for (int i = 0; i < total; ++i)
        if (mask & (1u << i)) r += ranks[i];
      const double ui = r - na * (na + 1.0) / 2.0;
      ++count;
      if (std::abs(ui - center) >= observed - 1e-9) ++extreme;
    }
    return static_cast<double>(extreme) / count;
  }

  // Normal approximation with tie and continuity corrections.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double n = na + nb;
  const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return 1.0;
  const double z = std::max(observed - 0.5, 0.0) / std::sqrt(var);
  return std::min(1.0, 2.0 * normal_sf(z));
}

}  // namespace glom
