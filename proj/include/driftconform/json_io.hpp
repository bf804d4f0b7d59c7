#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

#include "driftconform/detect.hpp"
#include "driftconform/learners.hpp"
#include "driftconform/prediction_set.hpp"
#include "driftconform/streams.hpp"

namespace driftconform {

using nlohmann::json;

// ---------------------------------------------------------------------------
// PredictionSet: {"kind": "empty"|"whole_line"|"intervals",
//                 "intervals": [[lo, hi], ...]}
// ---------------------------------------------------------------------------

inline json prediction_set_to_json(const PredictionSet& set) {
  json j;
  switch (set.kind()) {
    case SetKind::Empty: j["kind"] = "empty"; break;
    case SetKind::WholeLine: j["kind"] = "whole_line"; break;
    case SetKind::Intervals: j["kind"] = "intervals"; break;
  }
  j["intervals"] = json::array();
  for (const auto& iv : set.intervals())
    j["intervals"].push_back(json::array({iv.lo, iv.hi}));
  return j;
}

inline PredictionSet prediction_set_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "empty") return PredictionSet::empty();
  if (kind == "whole_line") return PredictionSet::whole_line();
  if (kind != "intervals")
    throw std::invalid_argument("unknown prediction-set kind: " + kind);
  std::vector<Interval> intervals;
  for (const auto& pair : j.at("intervals"))
    intervals.push_back(Interval{pair.at(0).get<double>(),
                                 pair.at(1).get<double>()});
  return PredictionSet::from_intervals(std::move(intervals));
}

// Model snapshot: {"kind": tag, "theta": [...]}
inline json learner_to_json(const Learner& learner) {
  json j;
  j["kind"] = learner.kind();
  j["theta"] = learner.parameters();
  return j;
}

inline json sigma_schedule_to_json(const SigmaSchedule& s) {
  switch (s.kind) {
    case SigmaSchedule::Kind::Fixed:
      return json{{"kind", "fixed"}, {"value", s.fixed_value}};
    case SigmaSchedule::Kind::TheoryPretrained:
      return json{{"kind", "theory_pretrained"}};
    case SigmaSchedule::Kind::TheoryFull:
      return json{{"kind", "theory_full"}};
  }
  throw std::logic_error("unknown sigma schedule");
}

inline SigmaSchedule sigma_schedule_from_json(const json& j) {
  if (j.is_number()) return SigmaSchedule::fixed(j.get<double>());
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed") return SigmaSchedule::fixed(j.at("value").get<double>());
  if (kind == "theory_pretrained") return SigmaSchedule::theory_pretrained();
  if (kind == "theory_full") return SigmaSchedule::theory_full();
  throw std::invalid_argument("sigma schedule kind unknown: " + kind);
}

inline json stepsize_schedule_to_json(const StepsizeSchedule& s) {
  switch (s.kind) {
    case StepsizeSchedule::Kind::Fixed:
      return json{{"kind", "fixed"}, {"eta", s.a}};
    case StepsizeSchedule::Kind::InverseSqrt:
      return json{{"kind", "inverse_sqrt"}, {"c", s.a}};
    case StepsizeSchedule::Kind::LsaLog:
      return json{{"kind", "lsa_log"}, {"c", s.a}, {"sigma_hat", s.b}};
    case StepsizeSchedule::Kind::CappedInverse:
      return json{{"kind", "capped_inverse"},
                  {"gamma", s.a},
                  {"smoothness", s.b}};
  }
  throw std::logic_error("unknown stepsize schedule");
}

inline StepsizeSchedule stepsize_schedule_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed") return StepsizeSchedule::fixed(j.at("eta").get<double>());
  if (kind == "inverse_sqrt")
    return StepsizeSchedule::inverse_sqrt(j.at("c").get<double>());
  if (kind == "lsa_log")
    return StepsizeSchedule::lsa_log(j.at("c").get<double>(),
                                     j.at("sigma_hat").get<double>());
  if (kind == "capped_inverse")
    return StepsizeSchedule::capped_inverse(j.at("gamma").get<double>(),
                                            j.at("smoothness").get<double>());
  throw std::invalid_argument("stepsize schedule kind unknown: " + kind);
}

inline json stream_config_to_json(const StreamConfig& s) {
  json j;
  j["scenario"] = scenario_name(s.scenario);
  j["d"] = s.d;
  j["T"] = s.T;
  j["change_points"] = s.change_points;
  j["sigma_levels"] = s.sigma_levels;
  j["base_sigma"] = s.base_sigma;
  j["kappa"] = s.kappa;
  j["variance_growth"] = s.variance_growth;
  j["mean_levels"] = s.mean_levels;
  j["cov_sigma_levels"] = s.cov_sigma_levels;
  j["misspecified"] = s.misspecified;
  j["beta_star"] = s.beta_star;
  j["eps"] = s.eps;
  j["n_blocks"] = s.n_blocks;
  j["k_pieces"] = s.k_pieces;
  j["flat_signs"] = s.flat_signs;
  return j;
}

inline StreamConfig stream_config_from_json(const json& j) {
  StreamConfig s;
  if (j.contains("scenario"))
    s.scenario = scenario_from_name(j.at("scenario").get<std::string>());
  s.d = j.value("d", s.scenario == Scenario::CovShiftMean ||
                             s.scenario == Scenario::CovShiftVar
                         ? std::size_t{10}
                         : std::size_t{5});
  s.T = j.value("T", s.T);
  if (j.contains("change_points"))
    s.change_points = j.at("change_points").get<std::vector<std::int64_t>>();
  if (j.contains("sigma_levels"))
    s.sigma_levels = j.at("sigma_levels").get<std::vector<double>>();
  s.base_sigma = j.value("base_sigma", s.base_sigma);
  s.kappa = j.value("kappa", s.kappa);
  s.variance_growth = j.value("variance_growth", s.variance_growth);
  if (j.contains("mean_levels"))
    s.mean_levels = j.at("mean_levels").get<std::vector<double>>();
  if (j.contains("cov_sigma_levels"))
    s.cov_sigma_levels = j.at("cov_sigma_levels").get<std::vector<double>>();
  s.misspecified = j.value("misspecified", s.misspecified);
  if (j.contains("beta_star"))
    s.beta_star = j.at("beta_star").get<FeatureVec>();
  s.eps = j.value("eps", s.eps);
  s.n_blocks = j.value("n_blocks", s.n_blocks);
  s.k_pieces = j.value("k_pieces", s.k_pieces);
  if (j.contains("flat_signs"))
    s.flat_signs = j.at("flat_signs").get<std::vector<int>>();
  return s;
}

}  // namespace driftconform
