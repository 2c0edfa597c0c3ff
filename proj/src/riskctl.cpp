#include "uag/riskctl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "parallel_util.hpp"
#include "uag/errors.hpp"

namespace uag {

std::string LambdaConfig::to_string() const {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return std::string(buf);
  };
  return "(" + fmt(a1) + ", " + fmt(a2) + ", " + fmt(a3) + ")";
}

namespace {

// removes k*h accumulation noise so axis values compare and serialize cleanly
double snap(double v) { return std::round(v * 1e12) / 1e12; }

std::vector<double> grid_axis(double h) {
  if (!(h > 0.0 && h <= 1.0)) throw ContractError("grid step must be in (0, 1]");
  std::vector<double> axis;
  for (std::size_t k = 1;; ++k) {
    const double v = snap(static_cast<double>(k) * h);
    if (v > 1.0) break;
    axis.push_back(v);
  }
  if (axis.empty() || axis.back() != 1.0) axis.push_back(1.0);
  return axis;
}

}  // namespace

LambdaGrid lambda_grid(double h1, double h2, double h3) {
  LambdaGrid grid;
  grid.h1 = h1;
  grid.h2 = h2;
  grid.h3 = h3;
  grid.axis1 = grid_axis(h1);
  grid.axis2 = grid_axis(h2);
  grid.axis3 = grid_axis(h3);
  grid.configs.reserve(grid.axis1.size() * grid.axis2.size() * grid.axis3.size());
  for (double a1 : grid.axis1) {
    for (double a2 : grid.axis2) {
      for (double a3 : grid.axis3) {
        grid.configs.push_back(LambdaConfig{a1, a2, a3});
      }
    }
  }
  return grid;
}

double binomial_tail_pvalue(std::size_t n, double alpha, std::size_t loss_sum) {
  if (n == 0) throw ContractError("binomial tail requires n > 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("alpha must be in [0, 1]");
  if (loss_sum >= n) return 1.0;
  if (alpha <= 0.0) return 1.0;  // all mass at zero losses
  if (alpha >= 1.0) return 0.0;  // all mass at n losses, n > loss_sum

  const long double p = alpha;
  const long double q = 1.0L - p;
  if (n <= 50) {
    long double term = std::pow(q, static_cast<long double>(n));
    long double cdf = term;
    for (std::size_t k = 1; k <= loss_sum; ++k) {
      term *= static_cast<long double>(n - k + 1) / static_cast<long double>(k) * (p / q);
      cdf += term;
    }
    return std::clamp(static_cast<double>(cdf), 0.0, 1.0);
  }
  // log space: pow(q, n) underflows double for large n and small q
  const long double log_p = std::log(p);
  const long double log_q = std::log(q);
  long double log_term = static_cast<long double>(n) * log_q;
  long double log_cdf = log_term;
  for (std::size_t k = 1; k <= loss_sum; ++k) {
    log_term += std::log(static_cast<long double>(n - k + 1)) -
                std::log(static_cast<long double>(k)) + log_p - log_q;
    if (log_term > log_cdf) {
      log_cdf = log_term + std::log1p(std::exp(log_cdf - log_term));
    } else {
      log_cdf += std::log1p(std::exp(log_term - log_cdf));
    }
  }
  return std::clamp(static_cast<double>(std::exp(log_cdf)), 0.0, 1.0);
}

LambdaQuantiles LambdaQuantiles::vacuous() {
  return LambdaQuantiles{ConformalQuantile::vacuous(), ConformalQuantile::vacuous(),
                         ConformalQuantile::vacuous()};
}

std::size_t LossVector::sum() const {
  return std::accumulate(losses.begin(), losses.end(), std::size_t{0});
}

LossVector empirical_losses(RiskPipeline& pipeline, const LambdaQuantiles& quantiles,
                            std::span<const QASample> split, std::size_t workers) {
  if (split.empty()) throw ContractError("loss evaluation requires a nonempty split");

  LossVector lv;
  lv.losses.assign(split.size(), 1);
  std::vector<std::uint8_t> truncated(split.size(), 0);
  detail::parallel_for(split.size(), workers, [&](std::size_t i) {
    const SampleOutcome outcome = pipeline.run(split[i], quantiles);
    std::unordered_set<std::string_view> produced(outcome.answers.begin(),
                                                  outcome.answers.end());
    bool covered = false;
    for (const std::string& gold : split[i].answers) {
      if (produced.count(gold)) {
        covered = true;
        break;
      }
    }
    lv.losses[i] = covered ? 0 : 1;
    truncated[i] = outcome.truncated ? 1 : 0;
  });
  lv.truncations = std::accumulate(truncated.begin(), truncated.end(), std::size_t{0});
  return lv;
}

std::string_view to_string(FwerMethod method) {
  return method == FwerMethod::bonferroni ? "bonferroni" : "fixed-sequence";
}

FwerMethod fwer_from_string(std::string_view name) {
  if (name == "bonferroni") return FwerMethod::bonferroni;
  if (name == "fixed-sequence") return FwerMethod::fixed_sequence;
  throw ContractError("unknown fwer method: " + std::string(name));
}

std::vector<std::size_t> fwer_bonferroni(std::span<const double> p_values, double delta) {
  if (p_values.empty()) throw ContractError("fwer over an empty family");
  const double threshold = delta / static_cast<double>(p_values.size());
  std::vector<std::size_t> accepted;
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    if (p_values[i] <= threshold) accepted.push_back(i);
  }
  return accepted;
}

std::vector<std::size_t> fwer_fixed_sequence(std::span<const double> ordered_p_values,
                                             double delta) {
  std::vector<std::size_t> accepted;
  for (std::size_t i = 0; i < ordered_p_values.size(); ++i) {
    if (ordered_p_values[i] > delta) break;
    accepted.push_back(i);
  }
  return accepted;
}

namespace {

nlohmann::json lambda_to_json(const LambdaConfig& lambda) {
  return nlohmann::json::array({lambda.a1, lambda.a2, lambda.a3});
}

LambdaConfig lambda_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ContractError("malformed lambda in artifact");
  return LambdaConfig{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json quantile_to_json(const ConformalQuantile& q) {
  return nlohmann::json::parse(q.to_json_string());
}

ConformalQuantile quantile_from_json(const nlohmann::json& j) {
  return ConformalQuantile::from_json_string(j.dump());
}

void require_disjoint(std::span<const QASample> a, std::span<const QASample> b,
                      const char* what) {
  std::unordered_set<std::string_view> ids;
  for (const QASample& s : a) ids.insert(s.id);
  for (const QASample& s : b) {
    if (ids.count(s.id)) {
      throw ContractError(std::string("calibration splits must be disjoint: ") + what +
                          " share sample id " + s.id);
    }
  }
}

}  // namespace

std::string RiskControlResult::to_json_string() const {
  nlohmann::json j;
  j["schema"] = "uag-risk-control/v1";
  j["target_alpha"] = target_alpha;
  j["delta"] = delta;
  j["fwer"] = std::string(uag::to_string(fwer));
  j["grid"] = {{"h", {grid.h1, grid.h2, grid.h3}},
               {"axis1", grid.axis1},
               {"axis2", grid.axis2},
               {"axis3", grid.axis3}};
  j["n_ltt"] = n_ltt;
  j["n_validation"] = n_validation;
  nlohmann::json audit_json = nlohmann::json::array();
  for (const LambdaAudit& a : audit) {
    audit_json.push_back({{"lambda", lambda_to_json(a.lambda)},
                          {"p_value", a.p_value},
                          {"loss_sum", a.loss_sum},
                          {"loss_n", a.loss_n},
                          {"validation_apss", a.validation_apss},
                          {"ltt_truncations", a.ltt_truncations},
                          {"validation_truncations", a.validation_truncations}});
  }
  j["audit"] = std::move(audit_json);
  nlohmann::json valid_json = nlohmann::json::array();
  for (const LambdaConfig& lambda : lambda_valid) valid_json.push_back(lambda_to_json(lambda));
  j["lambda_valid"] = std::move(valid_json);
  if (selected) {
    j["selected"] = lambda_to_json(*selected);
    j["quantiles"] = {{"step", quantile_to_json(selected_quantiles.q1)},
                      {"path", quantile_to_json(selected_quantiles.q2)},
                      {"answer", quantile_to_json(selected_quantiles.q3)}};
  } else {
    j["selected"] = nullptr;
    j["status"] = "no-valid-configuration";
  }
  return j.dump(2) + "\n";
}

RiskControlResult RiskControlResult::from_json_string(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ContractError("malformed risk-control artifact");
  try {
    RiskControlResult r;
    r.target_alpha = j.at("target_alpha").get<double>();
    r.delta = j.at("delta").get<double>();
    r.fwer = fwer_from_string(j.at("fwer").get<std::string>());
    const auto& g = j.at("grid");
    r.grid.h1 = g.at("h")[0].get<double>();
    r.grid.h2 = g.at("h")[1].get<double>();
    r.grid.h3 = g.at("h")[2].get<double>();
    r.grid.axis1 = g.at("axis1").get<std::vector<double>>();
    r.grid.axis2 = g.at("axis2").get<std::vector<double>>();
    r.grid.axis3 = g.at("axis3").get<std::vector<double>>();
    for (double a1 : r.grid.axis1) {
      for (double a2 : r.grid.axis2) {
        for (double a3 : r.grid.axis3) r.grid.configs.push_back(LambdaConfig{a1, a2, a3});
      }
    }
    r.n_ltt = j.at("n_ltt").get<std::size_t>();
    r.n_validation = j.at("n_validation").get<std::size_t>();
    for (const auto& a : j.at("audit")) {
      LambdaAudit audit;
      audit.lambda = lambda_from_json(a.at("lambda"));
      audit.p_value = a.at("p_value").get<double>();
      audit.loss_sum = a.at("loss_sum").get<std::size_t>();
      audit.loss_n = a.at("loss_n").get<std::size_t>();
      audit.validation_apss = a.at("validation_apss").get<double>();
      audit.ltt_truncations = a.at("ltt_truncations").get<std::size_t>();
      audit.validation_truncations = a.at("validation_truncations").get<std::size_t>();
      r.audit.push_back(audit);
    }
    for (const auto& v : j.at("lambda_valid")) r.lambda_valid.push_back(lambda_from_json(v));
    if (!j.at("selected").is_null()) {
      r.selected = lambda_from_json(j.at("selected"));
      const auto& q = j.at("quantiles");
      r.selected_quantiles.q1 = quantile_from_json(q.at("step"));
      r.selected_quantiles.q2 = quantile_from_json(q.at("path"));
      r.selected_quantiles.q3 = quantile_from_json(q.at("answer"));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed risk-control artifact: ") + e.what());
  }
}

RiskControlResult control(RiskPipeline& pipeline, const LambdaGrid& grid, double target_alpha,
                          double delta, FwerMethod fwer, std::span<const QASample> quantile_split,
                          std::span<const QASample> ltt_split,
                          std::span<const QASample> validation_split, std::size_t workers) {
  if (grid.configs.empty()) throw ContractError("lambda grid is empty");
  if (!(target_alpha > 0.0 && target_alpha < 1.0)) {
    throw ContractError("target alpha must be in (0, 1)");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ContractError("delta must be in (0, 1)");
  if (quantile_split.empty() || ltt_split.empty() || validation_split.empty()) {
    throw ContractError("all three calibration splits must be nonempty");
  }
  require_disjoint(quantile_split, ltt_split, "quantile/ltt");
  require_disjoint(quantile_split, validation_split, "quantile/validation");
  require_disjoint(ltt_split, validation_split, "ltt/validation");

  pipeline.calibrate(quantile_split);

  RiskControlResult result;
  result.target_alpha = target_alpha;
  result.delta = delta;
  result.fwer = fwer;
  result.grid = grid;
  result.n_ltt = ltt_split.size();
  result.n_validation = validation_split.size();
  result.audit.reserve(grid.configs.size());

  for (const LambdaConfig& lambda : grid.configs) {
    const LambdaQuantiles quantiles = pipeline.quantiles_for(lambda);
    const LossVector lv = empirical_losses(pipeline, quantiles, ltt_split, workers);

    LambdaAudit audit;
    audit.lambda = lambda;
    audit.loss_sum = lv.sum();
    audit.loss_n = lv.size();
    audit.p_value = binomial_tail_pvalue(lv.size(), target_alpha, audit.loss_sum);
    audit.ltt_truncations = lv.truncations;

    std::vector<std::size_t> sizes(validation_split.size(), 0);
    std::vector<std::uint8_t> truncated(validation_split.size(), 0);
    detail::parallel_for(validation_split.size(), workers, [&](std::size_t i) {
      const SampleOutcome outcome = pipeline.run(validation_split[i], quantiles);
      sizes[i] = outcome.answers.size();
      truncated[i] = outcome.truncated ? 1 : 0;
    });
    audit.validation_apss =
        static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0})) /
        static_cast<double>(sizes.size());
    audit.validation_truncations =
        std::accumulate(truncated.begin(), truncated.end(), std::size_t{0});
    result.audit.push_back(audit);
  }

  std::vector<std::size_t> accepted;
  if (fwer == FwerMethod::bonferroni) {
    std::vector<double> p_values;
    p_values.reserve(result.audit.size());
    for (const LambdaAudit& a : result.audit) p_values.push_back(a.p_value);
    accepted = fwer_bonferroni(p_values, delta);
  } else {
    // test in ascending validation-set-size order, lambda as tiebreak
    std::vector<std::size_t> order(result.audit.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const LambdaAudit& la = result.audit[a];
      const LambdaAudit& lb = result.audit[b];
      if (la.validation_apss != lb.validation_apss) {
        return la.validation_apss < lb.validation_apss;
      }
      return la.lambda < lb.lambda;
    });
    std::vector<double> ordered_p;
    ordered_p.reserve(order.size());
    for (std::size_t idx : order) ordered_p.push_back(result.audit[idx].p_value);
    for (std::size_t pos : fwer_fixed_sequence(ordered_p, delta)) {
      accepted.push_back(order[pos]);
    }
    std::sort(accepted.begin(), accepted.end());
  }

  std::optional<std::size_t> best;
  for (std::size_t idx : accepted) {
    result.lambda_valid.push_back(result.audit[idx].lambda);
    if (!best) {
      best = idx;
      continue;
    }
    const LambdaAudit& cur = result.audit[idx];
    const LambdaAudit& inc = result.audit[*best];
    if (cur.validation_apss < inc.validation_apss ||
        (cur.validation_apss == inc.validation_apss && cur.lambda < inc.lambda)) {
      best = idx;
    }
  }
  if (best) {
    result.selected = result.audit[*best].lambda;
    result.selected_quantiles = pipeline.quantiles_for(*result.selected);
  }
  return result;
}

}  // namespace uag
