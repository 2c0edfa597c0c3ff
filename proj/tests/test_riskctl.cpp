#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <doctest.h>

#include "uag/errors.hpp"
#include "uag/riskctl.hpp"

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// oracle: direct CDF summation with binomial coefficients in long double
long double naive_binomial_cdf(std::size_t n, long double alpha, std::size_t k) {
  long double total = 0.0L;
  for (std::size_t i = 0; i <= k && i <= n; ++i) {
    long double coeff = 1.0L;
    for (std::size_t j = 0; j < i; ++j) {
      coeff = coeff * static_cast<long double>(n - j) / static_cast<long double>(j + 1);
    }
    total += coeff * std::pow(alpha, static_cast<long double>(i)) *
             std::pow(1.0L - alpha, static_cast<long double>(n - i));
  }
  return total;
}

std::vector<uag::QASample> make_split(const std::string& prefix, std::size_t n) {
  std::vector<uag::QASample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({prefix + std::to_string(i), "q?", {"t"}, {"gold"}});
  }
  return out;
}

// quantiles_for encodes the lambda into the threshold alphas so run() can
// recover which configuration it is serving
class ScriptedPipeline : public uag::RiskPipeline {
 public:
  void calibrate(std::span<const uag::QASample>) override { calibrated_ = true; }
  uag::LambdaQuantiles quantiles_for(const uag::LambdaConfig& lambda) const override {
    uag::LambdaQuantiles q;
    q.q1.alpha = lambda.a1;
    q.q2.alpha = lambda.a2;
    q.q3.alpha = lambda.a3;
    return q;
  }
  bool calibrated() const { return calibrated_; }

 private:
  bool calibrated_ = false;
};

class AlwaysCovers : public ScriptedPipeline {
 public:
  uag::SampleOutcome run(const uag::QASample& sample, const uag::LambdaQuantiles&) override {
    return {{sample.answers.front()}, 1, false, false};
  }
};

class NeverCovers : public ScriptedPipeline {
 public:
  uag::SampleOutcome run(const uag::QASample&, const uag::LambdaQuantiles&) override {
    return {{"off-target"}, 1, false, false};
  }
};

// covers always; set size grows as the filter loosens (a3 up -> more filler)
class SizeVaries : public ScriptedPipeline {
 public:
  uag::SampleOutcome run(const uag::QASample& sample, const uag::LambdaQuantiles& q) override {
    uag::SampleOutcome out;
    out.answers.push_back(sample.answers.front());
    const auto filler = static_cast<std::size_t>(std::lround(q.q3.alpha * 10.0));
    for (std::size_t i = 0; i < filler; ++i) out.answers.push_back("filler" + std::to_string(i));
    out.candidate_count = out.answers.size();
    return out;
  }
};

// tight config (a3 = 0.5): small sets, misses every second sample;
// loose config (a3 = 1.0): large sets, always covers
class TightMissesLooseCovers : public ScriptedPipeline {
 public:
  uag::SampleOutcome run(const uag::QASample& sample, const uag::LambdaQuantiles& q) override {
    const std::size_t index = std::stoul(sample.id.substr(1));
    uag::SampleOutcome out;
    if (q.q3.alpha < 0.75) {
      if (index % 2 == 0) out.answers.push_back(sample.answers.front());
      out.candidate_count = out.answers.size();
      return out;
    }
    out.answers = {sample.answers.front(), "f1", "f2", "f3", "f4"};
    out.candidate_count = 5;
    return out;
  }
};

}  // namespace

TEST_CASE("lambda_grid shapes and ordering") {
  SUBCASE("coarse grid") {
    const auto g = uag::lambda_grid(0.5, 0.5, 0.5);
    CHECK(g.axis1 == std::vector<double>{0.5, 1.0});
    CHECK(g.configs.size() == 8);
    CHECK(g.configs.front() == uag::LambdaConfig{0.5, 0.5, 0.5});
    CHECK(g.configs[1] == uag::LambdaConfig{0.5, 0.5, 1.0});  // a3 varies fastest
    CHECK(g.configs.back() == uag::LambdaConfig{1.0, 1.0, 1.0});
  }
  SUBCASE("default grid is 4 x 4 x 10") {
    const auto g = uag::lambda_grid();
    CHECK(g.axis1 == std::vector<double>{0.3, 0.6, 0.9, 1.0});
    CHECK(g.axis2 == std::vector<double>{0.3, 0.6, 0.9, 1.0});
    REQUIRE(g.axis3.size() == 10);
    CHECK(g.axis3[2] == 0.3);  // 3 * 0.1 snaps exactly
    CHECK(g.axis3.back() == 1.0);
    CHECK(g.configs.size() == 160);
    for (std::size_t i = 1; i < g.configs.size(); ++i) CHECK(g.configs[i - 1] < g.configs[i]);
  }
  SUBCASE("degenerate grid") {
    const auto g = uag::lambda_grid(1.0, 1.0, 1.0);
    REQUIRE(g.configs.size() == 1);
    CHECK(g.configs[0] == uag::LambdaConfig{1.0, 1.0, 1.0});
  }
  SUBCASE("invalid steps") {
    CHECK_THROWS_AS(uag::lambda_grid(0.0, 0.5, 0.5), uag::ContractError);
    CHECK_THROWS_AS(uag::lambda_grid(0.5, -0.1, 0.5), uag::ContractError);
    CHECK_THROWS_AS(uag::lambda_grid(0.5, 0.5, 1.5), uag::ContractError);
  }
}

TEST_CASE("binomial tail p-value matches direct summation") {
  SUBCASE("pinned cases") {
    CHECK(uag::binomial_tail_pvalue(10, 0.3, 10) == 1.0);
    // direct power computation
    CHECK(uag::binomial_tail_pvalue(10, 0.3, 0) ==
          doctest::Approx(std::pow(0.7, 10)).epsilon(1e-14));
    // exact two-term CDF summation
    const double two_terms = std::pow(0.7, 10) + 10.0 * 0.3 * std::pow(0.7, 9);
    CHECK(uag::binomial_tail_pvalue(10, 0.3, 1) == doctest::Approx(two_terms).epsilon(1e-14));
  }
  SUBCASE("agrees with the naive CDF across n and alpha") {
    for (std::size_t n : {1, 2, 5, 17, 40, 60}) {
      for (double alpha : {0.05, 0.2, 0.5, 0.93}) {
        for (std::size_t k = 0; k <= n; ++k) {
          const double expected = static_cast<double>(naive_binomial_cdf(n, alpha, k));
          CHECK(uag::binomial_tail_pvalue(n, alpha, k) ==
                doctest::Approx(expected).epsilon(1e-12));
        }
      }
    }
  }
  SUBCASE("monotone in loss_sum") {
    double prev = -1.0;
    for (std::size_t k = 0; k <= 30; ++k) {
      const double p = uag::binomial_tail_pvalue(30, 0.2, k);
      CHECK(p >= prev);
      prev = p;
    }
  }
  SUBCASE("degenerate alphas") {
    CHECK(uag::binomial_tail_pvalue(10, 0.0, 0) == 1.0);
    CHECK(uag::binomial_tail_pvalue(10, 1.0, 3) == 0.0);
    CHECK(uag::binomial_tail_pvalue(10, 1.0, 10) == 1.0);
  }
}

TEST_CASE("empirical_losses covers iff the output intersects gold") {
  const auto split = make_split("s", 7);
  const auto quantiles = uag::LambdaQuantiles::vacuous();

  AlwaysCovers good;
  CHECK(uag::empirical_losses(good, quantiles, split).sum() == 0);

  NeverCovers bad;
  const auto losses = uag::empirical_losses(bad, quantiles, split);
  CHECK(losses.sum() == 7);
  CHECK(losses.size() == 7);
  CHECK(losses.truncations == 0);

  // result is worker-count independent
  const auto serial = uag::empirical_losses(bad, quantiles, split, 1);
  const auto parallel = uag::empirical_losses(bad, quantiles, split, 4);
  CHECK(serial.losses == parallel.losses);
}

TEST_CASE("bonferroni keeps p-values at or below delta over grid size") {
  SUBCASE("worked example") {
    std::vector<double> p(10, 0.9);
    p[4] = 0.004;  // 0.004 <= 0.05 / 10
    CHECK(uag::fwer_bonferroni(p, 0.05) == std::vector<std::size_t>{4});
  }
  SUBCASE("all ones") {
    const std::vector<double> p(6, 1.0);
    CHECK(uag::fwer_bonferroni(p, 0.05).empty());
  }
  SUBCASE("single test reduces to p <= delta") {
    CHECK(uag::fwer_bonferroni(std::vector<double>{0.04}, 0.05) == std::vector<std::size_t>{0});
    CHECK(uag::fwer_bonferroni(std::vector<double>{0.06}, 0.05).empty());
  }
  SUBCASE("boundary is inclusive") {
    CHECK(uag::fwer_bonferroni(std::vector<double>{0.025, 0.0251}, 0.05) ==
          std::vector<std::size_t>{0});
  }
}

TEST_CASE("fixed sequence accepts a prefix") {
  CHECK(uag::fwer_fixed_sequence(std::vector<double>{0.01, 0.02, 0.3, 0.01}, 0.05) ==
        std::vector<std::size_t>{0, 1});
  CHECK(uag::fwer_fixed_sequence(std::vector<double>{0.2, 0.001}, 0.05).empty());
  CHECK(uag::fwer_fixed_sequence(std::vector<double>{0.04}, 0.05) ==
        std::vector<std::size_t>{0});
  CHECK(uag::fwer_fixed_sequence({}, 0.05).empty());
}

TEST_CASE("control certifies everything for an always-covering pipeline") {
  AlwaysCovers pipeline;
  const auto grid = uag::lambda_grid(0.5, 0.5, 0.5);
  const auto quantile = make_split("q", 5);
  const auto ltt = make_split("l", 100);
  const auto validation = make_split("v", 20);

  const auto result = uag::control(pipeline, grid, 0.2, 0.05, uag::FwerMethod::bonferroni,
                                   quantile, ltt, validation);
  CHECK(pipeline.calibrated());
  CHECK(result.n_ltt == 100);
  CHECK(result.n_validation == 20);
  CHECK(result.lambda_valid.size() == 8);  // p = 0.8^100 ~ 2e-10 everywhere
  REQUIRE(result.audit.size() == 8);
  for (std::size_t i = 0; i < result.audit.size(); ++i) {
    CHECK(result.audit[i].lambda == grid.configs[i]);
    CHECK(result.audit[i].loss_sum == 0);
    CHECK(result.audit[i].loss_n == 100);
    CHECK(result.audit[i].p_value == doctest::Approx(std::pow(0.8, 100)).epsilon(1e-10));
    CHECK(result.audit[i].validation_apss == 1.0);
  }
  REQUIRE(result.selected.has_value());
  // all tie at APSS 1 -> lexicographically smallest lambda
  CHECK(*result.selected == uag::LambdaConfig{0.5, 0.5, 0.5});
  CHECK(!result.no_valid_configuration());
  CHECK(result.selected_quantiles.q3.alpha == 0.5);
}

TEST_CASE("control reports no valid configuration for an adversarial pipeline") {
  NeverCovers pipeline;
  const auto result = uag::control(pipeline, uag::lambda_grid(1.0, 1.0, 0.5), 0.2, 0.05,
                                   uag::FwerMethod::bonferroni, make_split("q", 3),
                                   make_split("l", 40), make_split("v", 10));
  CHECK(result.no_valid_configuration());
  CHECK(result.lambda_valid.empty());
  for (const auto& row : result.audit) CHECK(row.p_value == 1.0);
}

TEST_CASE("selection minimizes validation set size over the valid set") {
  SizeVaries pipeline;
  const auto result = uag::control(pipeline, uag::lambda_grid(1.0, 1.0, 0.25), 0.2, 0.05,
                                   uag::FwerMethod::bonferroni, make_split("q", 3),
                                   make_split("l", 80), make_split("v", 10));
  // every config certifies; a3 = 0.25 yields the smallest sets
  REQUIRE(result.selected.has_value());
  CHECK(result.selected->a3 == 0.25);
  const auto& audits = result.audit;
  REQUIRE(!audits.empty());
  CHECK(audits.front().validation_apss < audits.back().validation_apss);
}

TEST_CASE("fixed sequence stops at the first failure in set-size order") {
  TightMissesLooseCovers pipeline;
  const auto grid = uag::lambda_grid(1.0, 1.0, 0.5);  // configs (1,1,0.5) and (1,1,1)
  const auto quantile = make_split("q", 3);
  const auto ltt = make_split("l", 60);
  const auto validation = make_split("v", 10);

  // bonferroni certifies the loose config despite the tight one failing
  const auto bonf = uag::control(pipeline, grid, 0.2, 0.05, uag::FwerMethod::bonferroni,
                                 quantile, ltt, validation);
  REQUIRE(bonf.selected.has_value());
  CHECK(*bonf.selected == uag::LambdaConfig{1.0, 1.0, 1.0});
  CHECK(bonf.lambda_valid == std::vector<uag::LambdaConfig>{{1.0, 1.0, 1.0}});

  // fixed sequence tests the tight config first (smaller sets), fails, stops
  const auto fseq = uag::control(pipeline, grid, 0.2, 0.05, uag::FwerMethod::fixed_sequence,
                                 quantile, ltt, validation);
  CHECK(fseq.no_valid_configuration());
}

TEST_CASE("control validates splits") {
  AlwaysCovers pipeline;
  const auto grid = uag::lambda_grid(1.0, 1.0, 1.0);
  const auto quantile = make_split("q", 2);
  const auto ltt = make_split("l", 4);
  auto overlapping = make_split("v", 3);
  overlapping[1].id = "l2";

  CHECK_THROWS_AS(uag::control(pipeline, grid, 0.2, 0.05, uag::FwerMethod::bonferroni, quantile,
                               ltt, overlapping),
                  uag::ContractError);
  CHECK_THROWS_AS(uag::control(pipeline, grid, 0.2, 0.05, uag::FwerMethod::bonferroni, {}, ltt,
                               make_split("v", 3)),
                  uag::ContractError);
  CHECK_THROWS_AS(uag::control(pipeline, grid, 1.2, 0.05, uag::FwerMethod::bonferroni, quantile,
                               ltt, make_split("v", 3)),
                  uag::ContractError);
  CHECK_THROWS_AS(uag::control(pipeline, grid, 0.2, 0.0, uag::FwerMethod::bonferroni, quantile,
                               ltt, make_split("v", 3)),
                  uag::ContractError);
}

TEST_CASE("controller artifact JSON round-trips") {
  SizeVaries pipeline;
  const auto original = uag::control(pipeline, uag::lambda_grid(0.5, 1.0, 0.5), 0.2, 0.05,
                                     uag::FwerMethod::fixed_sequence, make_split("q", 3),
                                     make_split("l", 50), make_split("v", 8));
  const auto text = original.to_json_string();
  const auto back = uag::RiskControlResult::from_json_string(text);

  CHECK(back.target_alpha == original.target_alpha);
  CHECK(back.delta == original.delta);
  CHECK(back.fwer == original.fwer);
  CHECK(back.grid.axis1 == original.grid.axis1);
  CHECK(back.grid.axis3 == original.grid.axis3);
  CHECK(back.grid.configs == original.grid.configs);
  CHECK(back.lambda_valid == original.lambda_valid);
  CHECK(back.selected == original.selected);
  CHECK(back.n_ltt == original.n_ltt);
  CHECK(back.n_validation == original.n_validation);
  REQUIRE(back.audit.size() == original.audit.size());
  for (std::size_t i = 0; i < back.audit.size(); ++i) {
    CHECK(back.audit[i].lambda == original.audit[i].lambda);
    CHECK(back.audit[i].p_value == original.audit[i].p_value);
    CHECK(back.audit[i].loss_sum == original.audit[i].loss_sum);
    CHECK(back.audit[i].validation_apss == original.audit[i].validation_apss);
  }
  CHECK(back.selected_quantiles.q1.value == original.selected_quantiles.q1.value);
  CHECK(back.selected_quantiles.q3.alpha == original.selected_quantiles.q3.alpha);

  // sentinel thresholds survive the round trip; quantiles serialize only
  // alongside a selection
  uag::RiskControlResult sentinel;
  sentinel.target_alpha = 0.3;
  sentinel.delta = 0.01;
  sentinel.grid = uag::lambda_grid(1.0, 1.0, 1.0);
  sentinel.selected = uag::LambdaConfig{1.0, 1.0, 1.0};
  sentinel.selected_quantiles.q1.value = kInf;
  sentinel.selected_quantiles.q2.value = -kInf;
  const auto sentinel_back =
      uag::RiskControlResult::from_json_string(sentinel.to_json_string());
  CHECK(sentinel_back.selected_quantiles.q1.value == kInf);
  CHECK(sentinel_back.selected_quantiles.q2.value == -kInf);

  uag::RiskControlResult none;
  none.target_alpha = 0.3;
  none.delta = 0.01;
  none.grid = uag::lambda_grid(1.0, 1.0, 1.0);
  const auto none_back = uag::RiskControlResult::from_json_string(none.to_json_string());
  CHECK(none_back.no_valid_configuration());
  CHECK(!none_back.selected.has_value());

  CHECK_THROWS_AS(uag::RiskControlResult::from_json_string("{]"), uag::ContractError);
}

TEST_CASE("fwer method names round-trip") {
  CHECK(uag::to_string(uag::FwerMethod::bonferroni) == "bonferroni");
  CHECK(uag::to_string(uag::FwerMethod::fixed_sequence) == "fixed-sequence");
  CHECK(uag::fwer_from_string("bonferroni") == uag::FwerMethod::bonferroni);
  CHECK(uag::fwer_from_string("fixed-sequence") == uag::FwerMethod::fixed_sequence);
  CHECK_THROWS_AS(uag::fwer_from_string("holm"), uag::ContractError);
}
