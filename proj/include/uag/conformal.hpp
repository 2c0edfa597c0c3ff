#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace uag {

// Split-conformal threshold: the k-th smallest calibration score where
// k = ceil((n + 1) * (1 - alpha)). k > n (alpha too small for n) gives
// +infinity (admit everything); k <= 0 (alpha = 1) gives -infinity (admit
// nothing). rank records k for audit even when out of range.
struct ConformalQuantile {
  double value = 0.0;
  double alpha = 0.0;
  std::size_t n = 0;
  std::int64_t rank = 0;

  friend bool operator==(const ConformalQuantile&, const ConformalQuantile&) = default;

  static ConformalQuantile vacuous();
  std::string to_json_string() const;
  static ConformalQuantile from_json_string(std::string_view text);
};

// scores must be nonempty and finite; alpha in [0, 1]. Does not mutate input.
ConformalQuantile conformal_quantile(std::span<const double> scores, double alpha);

// Membership rule shared by every consumer: admit iff score <= threshold.
inline bool admits(const ConformalQuantile& q, double score) { return score <= q.value; }

// Indices of candidate scores admitted by q, input order preserved.
std::vector<std::size_t> prediction_set_indices(std::span<const double> candidate_scores,
                                                const ConformalQuantile& q);

}  // namespace uag
