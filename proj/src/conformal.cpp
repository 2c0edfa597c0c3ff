#include "uag/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "uag/errors.hpp"

namespace uag {

ConformalQuantile ConformalQuantile::vacuous() {
  return ConformalQuantile{std::numeric_limits<double>::infinity(), 0.0, 0, 0};
}

std::string ConformalQuantile::to_json_string() const {
  nlohmann::json j;
  j["alpha"] = alpha;
  j["n"] = n;
  j["rank"] = rank;
  if (std::isinf(value)) {
    j["value"] = value > 0 ? "inf" : "-inf";
  } else {
    j["value"] = value;
  }
  return j.dump();
}

ConformalQuantile ConformalQuantile::from_json_string(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ContractError("malformed quantile json");
  ConformalQuantile q;
  try {
    q.alpha = j.at("alpha").get<double>();
    q.n = j.at("n").get<std::size_t>();
    q.rank = j.at("rank").get<std::int64_t>();
    const auto& v = j.at("value");
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf") {
        q.value = std::numeric_limits<double>::infinity();
      } else if (s == "-inf") {
        q.value = -std::numeric_limits<double>::infinity();
      } else {
        throw ContractError("unknown quantile sentinel: " + s);
      }
    } else {
      q.value = v.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed quantile json: ") + e.what());
  }
  return q;
}

ConformalQuantile conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw ContractError("conformal quantile requires a nonempty score set");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("alpha must be in [0, 1]");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ContractError("calibration scores must be finite");
  }

  const std::size_t n = scores.size();
  const std::int64_t rank =
      static_cast<std::int64_t>(std::ceil(static_cast<double>(n + 1) * (1.0 - alpha)));

  ConformalQuantile q;
  q.alpha = alpha;
  q.n = n;
  q.rank = rank;
  if (rank <= 0) {
    q.value = -std::numeric_limits<double>::infinity();
  } else if (rank > static_cast<std::int64_t>(n)) {
    q.value = std::numeric_limits<double>::infinity();
  } else {
    std::vector<double> copy(scores.begin(), scores.end());
    auto it = copy.begin() + (rank - 1);
    std::nth_element(copy.begin(), it, copy.end());
    q.value = *it;
  }
  return q;
}

std::vector<std::size_t> prediction_set_indices(std::span<const double> candidate_scores,
                                                const ConformalQuantile& q) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < candidate_scores.size(); ++i) {
    if (admits(q, candidate_scores[i])) out.push_back(i);
  }
  return out;
}

}  // namespace uag
