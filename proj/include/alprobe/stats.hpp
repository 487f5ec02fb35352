#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace alprobe {

struct CorrelationResult {
  double rho = 0.0;
  std::size_t n = 0;
};

enum class MwuMethod { kNormal, kExact };

struct MwuResult {
  // Statistic of the first sample: pairs (a > b) plus half the ties.
  double u = 0.0;
  double u_other = 0.0;
  double p = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  MwuMethod method = MwuMethod::kNormal;
};

// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Rank-then-Pearson. Throws UndefinedCorrelationError for n < 2 or a
// constant input.
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

// Two-sided test. Normal mode uses tie-corrected variance and a continuity
// correction; exact mode enumerates all labelings and needs n1 + n2 <= 12.
MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                         MwuMethod method = MwuMethod::kNormal);

inline constexpr std::size_t kMaxExactMwu = 12;

}  // namespace alprobe
