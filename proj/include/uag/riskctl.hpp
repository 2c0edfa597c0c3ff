#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uag/conformal.hpp"
#include "uag/sample.hpp"

namespace uag {

// One grid point: miscoverage budgets for the step, path, and answer
// thresholds. Ordered lexicographically.
struct LambdaConfig {
  double a1 = 1.0;
  double a2 = 1.0;
  double a3 = 1.0;

  friend bool operator==(const LambdaConfig&, const LambdaConfig&) = default;
  friend auto operator<=>(const LambdaConfig&, const LambdaConfig&) = default;
  std::string to_string() const;
};

// Full grid {h1, 2*h1, ..., 1} x {h2, ...} x {h3, ...}; each axis always
// includes 1.0. configs are in lexicographic order (a3 fastest). Axis values
// are snapped to 12 decimals to remove k*h float noise.
struct LambdaGrid {
  double h1 = 0.0, h2 = 0.0, h3 = 0.0;
  std::vector<double> axis1, axis2, axis3;
  std::vector<LambdaConfig> configs;
};

// h in (0, 1] per axis. Defaults give |grid| = 4 * 4 * 10 = 160.
LambdaGrid lambda_grid(double h1 = 0.3, double h2 = 0.3, double h3 = 0.1);

// P(Binomial(n, alpha) <= loss_sum), the exact one-sided p-value for
// H0: E[loss] > alpha. Exact CDF in long double; n > 50 switches to a
// log-space recurrence. loss_sum >= n returns 1.
double binomial_tail_pvalue(std::size_t n, double alpha, std::size_t loss_sum);

// The three conformal thresholds induced by a lambda.
struct LambdaQuantiles {
  ConformalQuantile q1, q2, q3;
  static LambdaQuantiles vacuous();
};

// Output of one pipeline run on one sample.
struct SampleOutcome {
  std::vector<std::string> answers;  // final prediction set, entity labels
  std::size_t candidate_count = 0;   // pre-filter candidate set size
  bool truncated = false;
  bool degraded = false;
};

// What the risk controller needs from a QA pipeline. run() must be a
// deterministic function of (sample, quantiles) after calibrate(), and safe
// for concurrent calls.
class RiskPipeline {
 public:
  virtual ~RiskPipeline() = default;
  virtual void calibrate(std::span<const QASample> quantile_split) = 0;
  virtual LambdaQuantiles quantiles_for(const LambdaConfig& lambda) const = 0;
  virtual SampleOutcome run(const QASample& sample, const LambdaQuantiles& quantiles) = 0;
};

// Per-sample binary losses: 0 iff the output set contains at least one gold
// answer. Order follows the split.
struct LossVector {
  std::vector<std::uint8_t> losses;
  std::size_t truncations = 0;

  std::size_t sum() const;
  std::size_t size() const { return losses.size(); }
};

LossVector empirical_losses(RiskPipeline& pipeline, const LambdaQuantiles& quantiles,
                            std::span<const QASample> split, std::size_t workers = 1);

enum class FwerMethod { bonferroni, fixed_sequence };

std::string_view to_string(FwerMethod method);
FwerMethod fwer_from_string(std::string_view name);

// Bonferroni: keep lambdas with p <= delta / |grid|. Input order preserved.
std::vector<std::size_t> fwer_bonferroni(std::span<const double> p_values, double delta);

// Fixed sequence over the given testing order: accept while p <= delta, stop
// at the first failure. Returns accepted positions in order.
std::vector<std::size_t> fwer_fixed_sequence(std::span<const double> ordered_p_values,
                                             double delta);

struct LambdaAudit {
  LambdaConfig lambda;
  double p_value = 1.0;
  std::size_t loss_sum = 0;
  std::size_t loss_n = 0;
  double validation_apss = 0.0;
  std::size_t ltt_truncations = 0;
  std::size_t validation_truncations = 0;
};

struct RiskControlResult {
  double target_alpha = 0.0;
  double delta = 0.0;
  FwerMethod fwer = FwerMethod::bonferroni;
  LambdaGrid grid;
  std::vector<LambdaAudit> audit;          // grid order
  std::vector<LambdaConfig> lambda_valid;  // grid order
  std::optional<LambdaConfig> selected;
  LambdaQuantiles selected_quantiles;      // meaningful iff selected
  std::size_t n_ltt = 0;
  std::size_t n_validation = 0;

  bool no_valid_configuration() const { return !selected.has_value(); }
  std::string to_json_string() const;
  static RiskControlResult from_json_string(std::string_view text);
};

// Learn-then-test calibration: calibrates the pipeline on quantile_split,
// tests every grid lambda on ltt_split (binomial p-values against
// target_alpha), keeps the FWER-valid set at level delta, and selects the
// valid lambda with the smallest validation-split mean set size (ties ->
// lexicographically smallest lambda). Splits must be nonempty and pairwise
// disjoint by sample id. An empty valid set leaves selected unset.
RiskControlResult control(RiskPipeline& pipeline, const LambdaGrid& grid, double target_alpha,
                          double delta, FwerMethod fwer, std::span<const QASample> quantile_split,
                          std::span<const QASample> ltt_split,
                          std::span<const QASample> validation_split, std::size_t workers = 1);

}  // namespace uag
