#include "alprobe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "alprobe/error.hpp"

namespace alprobe {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw UndefinedCorrelationError("spearman inputs differ in length: " +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  const std::size_t n = x.size();
  if (n < 2) throw UndefinedCorrelationError("spearman needs at least 2 samples");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw UndefinedCorrelationError("spearman input is not finite");
    }
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  // Average ranks always have mean (n + 1) / 2.
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedCorrelationError("spearman undefined: zero rank variance");
  }
  const double rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return {rho, n};
}

namespace {

// Counts of each exact U value (in half units) over all labelings.
std::vector<double> exact_u_distribution(const std::vector<double>& ranks, std::size_t n1) {
  const std::size_t n = ranks.size();
  // Twice the rank sum is always an integer under average ranks.
  std::vector<long> doubled(n);
  for (std::size_t i = 0; i < n; ++i) doubled[i] = std::lround(2.0 * ranks[i]);
  const long total = std::accumulate(doubled.begin(), doubled.end(), 0L);
  // dp[c][s]: labelings picking c items with doubled rank sum s.
  std::vector<std::vector<double>> dp(n1 + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
  dp[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = std::min(i + 1, n1); c >= 1; --c) {
      for (long s = total; s >= doubled[i]; --s) {
        dp[c][static_cast<std::size_t>(s)] += dp[c - 1][static_cast<std::size_t>(s - doubled[i])];
      }
    }
  }
  return dp[n1];
}

}  // namespace

MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b, MwuMethod method) {
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  if (n1 < 1 || n2 < 1) throw InsufficientDataError("mann-whitney needs two non-empty samples");

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  if (std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled[0]; })) {
    throw DegenerateVarianceError("mann-whitney undefined: all values identical");
  }
  const auto ranks = average_ranks(pooled);
  const double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), 0.0);

  MwuResult res;
  res.n1 = n1;
  res.n2 = n2;
  res.method = method;
  const double n1d = static_cast<double>(n1), n2d = static_cast<double>(n2);
  res.u = r1 - n1d * (n1d + 1.0) / 2.0;
  res.u_other = n1d * n2d - res.u;
  const double mu = n1d * n2d / 2.0;

  if (method == MwuMethod::kExact) {
    if (n > kMaxExactMwu) {
      throw ConfigError("exact mann-whitney limited to n1 + n2 <= " + std::to_string(kMaxExactMwu));
    }
    const auto dist = exact_u_distribution(ranks, n1);
    const double offset = n1d * (n1d + 1.0);  // doubled minimum rank sum
    const double observed = std::abs(res.u - mu);
    double hits = 0.0, total = 0.0;
    for (std::size_t s = 0; s < dist.size(); ++s) {
      if (dist[s] == 0.0) continue;
      const double u = (static_cast<double>(s) - offset) / 2.0;
      total += dist[s];
      if (std::abs(u - mu) >= observed - 1e-9) hits += dist[s];
    }
    res.p = std::min(1.0, hits / total);
    return res;
  }

  // Tie correction: sum over tie groups of t^3 - t.
  std::vector<double> sorted(pooled);
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double nd = static_cast<double>(n);
  const double var = n1d * n2d / 12.0 * ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
  if (!(var > 0.0)) throw DegenerateVarianceError("mann-whitney undefined: zero variance");
  const double z = (std::max(res.u, res.u_other) - mu - 0.5) / std::sqrt(var);
  res.p = std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  return res;
}

}  // namespace alprobe
