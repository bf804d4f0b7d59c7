// Acceptance suite: end-to-end checks of the library against its
// statistical contracts, one pass/fail line per criterion.  Runs everything
// at the pinned tolerances and exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <exception>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "driftconform/driftconform.hpp"
#include "../oracles.hpp"

namespace dc = driftconform;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass,
            const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("[%s] criterion %02d %-26s %s\n", pass ? "PASS" : "FAIL", id,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
}

void run_criterion(int id, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
  const auto start = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    auto [ok, text] = body();
    pass = ok;
    detail = text;
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const auto secs = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  char buf[32];
  std::snprintf(buf, sizeof buf, " (%.1fs)", secs);
  report(id, name, pass, detail + buf);
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Unit oracles: library routines vs brute force, exact, random instances.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_unit_oracles() {
  dc::RngStream rng(1001);
  std::size_t checked = 0, mismatched = 0;

  for (int it = 0; it < 120; ++it) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 200);
    std::vector<double> values(n);
    for (auto& v : values) v = std::round(rng.normal() * 8.0) / 8.0;
    const double level = rng.uniform(0.01, 1.0);
    const double alpha = rng.uniform(0.05, 0.5);
    ++checked;
    if (dc::quantile_of_point_masses(values, level) !=
        oracle::quantile_brute(values, level))
      ++mismatched;
    ++checked;
    if (dc::quantile_update(values, dc::Alpha(alpha)) !=
        oracle::quantile_update_brute(values, alpha))
      ++mismatched;

    std::vector<bool> flags(n);
    const double p = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) flags[i] = rng.bernoulli(p);
    dc::CoverageWindow window(1);
    for (bool f : flags) window.push(f);
    const double sigma = rng.uniform(0.5, 5.0);
    const auto scan = dc::drift_scan(window, dc::Alpha(alpha), sigma, 0);
    const auto brute = oracle::drift_scan_brute(flags, alpha, sigma, 0);
    ++checked;
    if (scan.detected != brute.detected ||
        std::abs(scan.statistic - brute.max_statistic) > 1e-12 ||
        (brute.detected && *scan.trigger_index != *brute.trigger_index))
      ++mismatched;

    const std::size_t nb = 1 + static_cast<std::size_t>(rng.uniform() * 200);
    std::vector<double> other(nb);
    for (auto& v : other) v = std::round((rng.normal() + 0.2) * 8.0) / 8.0;
    ++checked;
    if (std::abs(dc::empirical_ks(values, other) -
                 oracle::ks_brute(values, other)) > 1e-12)
      ++mismatched;

    // full conformal with an augmentation-invariant model vs the split form
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform() * 50);
    std::vector<dc::DataPoint> cal(m);
    std::vector<double> residuals(m);
    for (std::size_t i = 0; i < m; ++i) {
      cal[i].y = rng.normal();
      residuals[i] = std::abs(cal[i].y);
    }
    dc::ConformalBatch batch;
    batch.cal = cal;
    batch.train = cal;
    batch.alpha = dc::Alpha(alpha);
    batch.grid = dc::CandidateGrid{-8.0, 8.0, 257};
    dc::ConstantLearner zero(0.0);
    ++checked;
    if (!(dc::full_conformal_set(batch, zero, {}) ==
          oracle::split_conformal_grid(residuals, 0.0, alpha, -8.0, 8.0, 257)))
      ++mismatched;
  }
  return {mismatched == 0,
          fmt("%zu oracle comparisons, %zu mismatches", checked, mismatched)};
}

// ---------------------------------------------------------------------------
// 2. Long-term coverage vs regret: the aggregate bound holds on every trace
//    and the coin-flip policy realizes calibrated coverage with linear regret.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_fact1() {
  dc::ExperimentConfig cfg;
  cfg.stream.scenario = dc::Scenario::Stationary;
  cfg.stream.T = 10000;
  cfg.alpha = 0.1;
  cfg.M = 50;
  cfg.replications = 2;
  cfg.n_train = 200;
  cfg.master_seed = 202;
  dc::PolicyConfig vac;
  vac.kind = dc::PolicyKind::Vacuous;
  dc::PolicyConfig drift;
  drift.kind = dc::PolicyKind::DriftOcp;
  cfg.policies = {vac, drift};
  const auto result = dc::run_experiment(cfg);

  bool ok = true;
  for (const auto& pol : result.policies) {
    for (const auto& rep : pol.replications) {
      if (rep.failed) return {false, "replication failed: " + rep.failure};
      double sum_cvg = 0.0;
      std::size_t n_eval = 0;
      for (const auto& rec : rep.trace) {
        if (!rec.cvg_hat) continue;
        sum_cvg += *rec.cvg_hat;
        ++n_eval;
      }
      const double lhs = static_cast<double>(n_eval) *
                         std::abs(sum_cvg / static_cast<double>(n_eval) - 0.9);
      ok = ok && lhs <= rep.trace.back().cum_regret + 1e-9;
    }
  }

  const auto& vac_rep = result.policies[0].replications[0];
  std::vector<bool> covered;
  for (const auto& rec : vac_rep.trace) covered.push_back(rec.covered);
  const double lt = dc::long_term_coverage(covered);
  const double regret_rate = vac_rep.trace.back().cum_regret / 10000.0;
  ok = ok && std::abs(lt - 0.9) <= 0.02 && regret_rate >= 0.1 - 1e-12;
  return {ok, fmt("vacuous lt-coverage %.4f, regret/T %.4f", lt, regret_rate)};
}

// ---------------------------------------------------------------------------
// 3. Calibration identity after every completed round, 50 seeded runs.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_calibration_identity() {
  std::size_t rounds_checked = 0, violations = 0;
  for (int seed = 0; seed < 50; ++seed) {
    dc::RngStream rng(dc::derive_seed(303, "calibration", seed));
    dc::OcpConfig cfg;
    cfg.alpha = dc::Alpha(0.1);
    cfg.sigma = dc::SigmaSchedule::fixed(4.0);
    cfg.min_window = 10;
    dc::DriftOcp engine(cfg);
    std::vector<double> current_round;
    for (int t = 0; t < 2000; ++t) {
      const double score = rng.exponential(1.0);
      current_round.push_back(score);
      const auto out = engine.observe(score);
      if (out.drift) {
        current_round.clear();
      } else if (out.state.round_clock == 0) {
        // round completed: q was recalibrated from exactly these scores
        ++rounds_checked;
        const double got =
            oracle::quantile_update_objective(current_round, 0.1, engine.q());
        double best = 1e300;
        for (double q : current_round)
          best = std::min(
              best, oracle::quantile_update_objective(current_round, 0.1, q));
        if (got != best) ++violations;
        current_round.clear();
      }
    }
  }
  return {violations == 0 && rounds_checked >= 50 * 6,
          fmt("%zu completed rounds, %zu violations", rounds_checked,
              violations)};
}

// ---------------------------------------------------------------------------
// 4. Stationary sublinearity of the drift-aware policy.
// ---------------------------------------------------------------------------
// Exact per-step noise floor of the coverage estimator: E|Bin(M,0.9)/M - 0.9|
// accumulates linearly in T even for a perfectly calibrated policy, which
// pushes the estimated-regret growth ratio toward 4 as the true regret
// shrinks.  The floor-adjusted ratio is printed alongside for diagnosis.
double mc_regret_floor(std::size_t m) {
  const double p = 0.9;
  double log_pmf = static_cast<double>(m) * std::log(1.0 - p);  // k = 0
  double floor = 0.0;
  for (std::size_t k = 0; k <= m; ++k) {
    if (k > 0)
      log_pmf += std::log(static_cast<double>(m - k + 1) /
                          static_cast<double>(k)) +
                 std::log(p / (1.0 - p));
    floor += std::exp(log_pmf) *
             std::abs(static_cast<double>(k) / static_cast<double>(m) - p);
  }
  return floor;
}

std::pair<bool, std::string> criterion_stationary_sublinearity() {
  dc::ExperimentConfig cfg;
  cfg.stream.scenario = dc::Scenario::Stationary;
  cfg.stream.T = 10000;
  cfg.alpha = 0.1;
  cfg.M = 500;
  cfg.replications = 20;
  cfg.n_train = 500;
  cfg.master_seed = 404;
  cfg.out_dir = "acceptance_out/stationary_sublinearity";
  cfg.policies = {dc::PolicyConfig{}};  // driftocp, sigma 4, min window 10
  const auto result = dc::run_experiment(cfg);
  const double final_regret = result.policies[0].mean_cum_regret_at(10000);
  const double mid_regret = result.policies[0].mean_cum_regret_at(2500);
  const double rate = final_regret / 10000.0;
  const double ratio = final_regret / mid_regret;
  const double floor = mc_regret_floor(cfg.M);
  const double adj_ratio = (final_regret - floor * 10000.0) /
                           (mid_regret - floor * 2500.0);
  std::printf(
      "    pilot values: regret(2500)=%.1f regret(1e4)=%.1f; estimator floor "
      "%.5f/step (%.1f at T=1e4); floor-adjusted ratio %.2f\n",
      mid_regret, final_regret, floor, floor * 10000.0, adj_ratio);
  return {rate <= 0.03 && ratio <= 2.5,
          fmt("regret(1e4)=%.1f rate=%.4f (<=0.03), growth ratio=%.2f (<=2.5)",
              final_regret, rate, ratio)};
}

// ---------------------------------------------------------------------------
// 5. Change-point reactivity: with the practical profile, the 0.5 -> 2.0
//    noise jump at t=4000 turns coverage 0.9 into roughly 0.32, so the
//    detection statistic 0.58*sqrt(L) crosses sigma=4 near window length 48;
//    detection must follow within 200 steps in >= 90% of replications.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_changepoint_reactivity() {
  dc::ExperimentConfig cfg;
  cfg.stream.scenario = dc::Scenario::PiecewiseVariance;
  cfg.stream.T = 10000;
  cfg.alpha = 0.1;
  cfg.M = 500;
  cfg.replications = 20;
  cfg.n_train = 500;
  cfg.master_seed = 505;
  cfg.policies = {dc::PolicyConfig{}};
  const auto result = dc::run_experiment(cfg);
  int reactive = 0;
  for (const auto& rep : result.policies[0].replications) {
    if (rep.failed) continue;
    for (std::int64_t t = 4001; t <= 4200; ++t) {
      if (rep.trace[static_cast<std::size_t>(t) - 1].drift) {
        ++reactive;
        break;
      }
    }
  }
  return {reactive >= 18,
          fmt("drift within 200 steps of t=4000 in %d/20 replications",
              reactive)};
}

// ---------------------------------------------------------------------------
// 6. ACI long-term coverage under stationarity.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_aci_long_term() {
  dc::ExperimentConfig cfg;
  cfg.stream.scenario = dc::Scenario::Stationary;
  cfg.stream.T = 10000;
  cfg.alpha = 0.1;
  cfg.M = 1;
  cfg.eval_stride = 10000;  // realized flags only
  cfg.replications = 5;
  cfg.n_train = 500;
  cfg.master_seed = 606;
  dc::PolicyConfig aci;
  aci.kind = dc::PolicyKind::AciFixed;
  aci.eta = 0.1;
  cfg.policies = {aci};
  const auto result = dc::run_experiment(cfg);
  double worst = 0.0;
  for (const auto& rep : result.policies[0].replications) {
    std::vector<bool> covered;
    for (const auto& rec : rep.trace) covered.push_back(rec.covered);
    worst = std::max(worst, std::abs(dc::long_term_coverage(covered) - 0.9));
  }
  return {worst <= 0.02, fmt("max |lt-coverage - 0.9| = %.4f (<=0.02)", worst)};
}

// ---------------------------------------------------------------------------
// 7. Qualitative reproduction of the four-setting comparison: the
//    drift-aware policy is uniformly competitive while every fixed ACI
//    stepsize loses badly somewhere.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_policy_comparison() {
  const dc::Scenario settings[] = {
      dc::Scenario::PiecewiseVariance, dc::Scenario::LinearBias,
      dc::Scenario::SmoothVariance, dc::Scenario::Stationary};
  const char* names[] = {"piecewise_var", "linear_bias", "smooth_var",
                         "stationary"};
  constexpr std::size_t kAci = 5;
  double drift_regret[4];
  double aci_regret[4][kAci];
  std::string aci_labels[kAci];

  for (int s = 0; s < 4; ++s) {
    dc::ExperimentConfig cfg;
    cfg.stream.scenario = settings[s];
    cfg.stream.T = 10000;
    cfg.alpha = 0.1;
    cfg.M = 500;
    cfg.replications = 20;
    cfg.n_train = 500;
    cfg.master_seed = 707;
    cfg.policies.clear();
    cfg.policies.push_back(dc::PolicyConfig{});  // driftocp
    for (double eta : {0.01, 0.1, 0.5}) {
      dc::PolicyConfig p;
      p.kind = dc::PolicyKind::AciFixed;
      p.eta = eta;
      cfg.policies.push_back(p);
    }
    for (double gamma : {0.5, 0.6}) {
      dc::PolicyConfig p;
      p.kind = dc::PolicyKind::AciDecaying;
      p.gamma = gamma;
      cfg.policies.push_back(p);
    }
    const auto result = dc::run_experiment(cfg);
    drift_regret[s] = result.policies[0].mean_cum_regret_at(10000);
    for (std::size_t a = 0; a < kAci; ++a) {
      aci_regret[s][a] = result.policies[a + 1].mean_cum_regret_at(10000);
      aci_labels[a] = result.policies[a + 1].label;
    }
  }

  bool uniformly_competitive = true;
  for (int s = 0; s < 4; ++s) {
    const double best_aci =
        *std::min_element(aci_regret[s], aci_regret[s] + kAci);
    if (drift_regret[s] > 1.5 * best_aci) uniformly_competitive = false;
  }
  bool every_aci_loses_somewhere = true;
  for (std::size_t a = 0; a < kAci; ++a) {
    bool loses = false;
    for (int s = 0; s < 4; ++s)
      if (aci_regret[s][a] > 2.0 * drift_regret[s]) loses = true;
    if (!loses) every_aci_loses_somewhere = false;
  }

  std::printf("    mean cum_regret(1e4) by setting:\n");
  for (int s = 0; s < 4; ++s) {
    std::printf("      %-14s driftocp=%8.1f", names[s], drift_regret[s]);
    for (std::size_t a = 0; a < kAci; ++a)
      std::printf("  %s=%8.1f", aci_labels[a].c_str(), aci_regret[s][a]);
    std::printf("\n");
  }
  std::printf(
      "    (all estimates share a common floor of about %.0f from the M=500 "
      "coverage estimator)\n",
      mc_regret_floor(500) * 10000.0);
  return {uniformly_competitive && every_aci_loses_somewhere,
          fmt("within 1.5x of best ACI everywhere: %s; every ACI >2x "
              "somewhere: %s",
              uniformly_competitive ? "yes" : "no",
              every_aci_loses_somewhere ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 8. Batch full conformal with a one-step-SGD augmented learner keeps
//    training-conditional coverage near the nominal level.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_full_conformal_coverage() {
  const std::size_t n = 200, n_test = 500, d = 5;
  double total_gap = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    dc::RngStream rng(dc::derive_seed(808, "fullconf", trial));
    dc::FeatureVec beta(d);
    for (auto& b : beta) b = rng.normal();
    auto draw = [&] {
      dc::DataPoint z;
      z.x.resize(d);
      for (auto& v : z.x) v = rng.normal();
      z.y = dc::dot(z.x, beta) + rng.normal();
      return z;
    };
    std::vector<dc::DataPoint> train(n);
    for (auto& z : train) z = draw();
    dc::OnlineSgdLearner learner(dc::LinearParams{dc::FeatureVec(d, 0.0)},
                                 dc::StepsizeSchedule::inverse_sqrt(0.01));
    for (const auto& z : train) learner.observe(z);

    const dc::Alpha alpha(0.1);
    const auto fit = [&](const dc::FeatureVec& x, double y) {
      return learner.augmented_fit(train, x, y);
    };
    std::size_t covered = 0;
    for (std::size_t i = 0; i < n_test; ++i) {
      const auto z = draw();
      if (dc::full_conformal_covers(train, alpha, z.x, z.y, fit)) ++covered;
    }
    total_gap += std::abs(
        static_cast<double>(covered) / static_cast<double>(n_test) - 0.9);
  }
  const double mean_gap = total_gap / 50.0;
  return {mean_gap <= 0.08,
          fmt("mean |coverage - 0.9| = %.4f (<=0.08)", mean_gap)};
}

// Scalar quadratic mean stream (theta - y)^2: update direction 2(theta - y),
// with curvature mu = L = 2 exactly.
class MeanSgd final : public dc::Learner {
 public:
  explicit MeanSgd(dc::StepsizeSchedule s) : schedule_(s) {}
  double predict(const dc::FeatureVec&) const override { return theta_; }
  void observe(const dc::DataPoint& z) override {
    ++step_;
    theta_ -= schedule_.at(step_) * 2.0 * (theta_ - z.y);
  }
  dc::PointPredictor augmented_fit(std::span<const dc::DataPoint>,
                                   const dc::FeatureVec&,
                                   double) const override {
    const double t = theta_;
    return [t](const dc::FeatureVec&) { return t; };
  }
  std::unique_ptr<dc::Learner> clone() const override {
    return std::make_unique<MeanSgd>(*this);
  }
  std::string kind() const override { return "mean_sgd"; }

 private:
  dc::StepsizeSchedule schedule_;
  double theta_ = 0.0;
  std::int64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// 9. Single-replacement stability of capped-inverse SGD.  With gamma*mu = 1
//    the first-index footprint contracts exactly like 1/n, so n*gap is flat
//    along the doubling sweep; replacing a point by itself changes nothing.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_stability() {
  const auto make = [] {
    return std::make_unique<MeanSgd>(
        dc::StepsizeSchedule::capped_inverse(0.5, 2.0));
  };
  const std::vector<dc::FeatureVec> probes = {{}};
  double min_scaled = 1e300, max_scaled = 0.0;
  double zero_gap = -1.0;
  for (std::size_t n : {100u, 200u, 400u, 800u, 1600u, 3200u}) {
    dc::RngStream rng(909);
    std::vector<dc::DataPoint> data(n);
    for (std::size_t i = 0; i < n; ++i)
      data[i] = dc::DataPoint{{}, rng.uniform(-1.0, 1.0),
                              static_cast<std::int64_t>(i) + 1};
    dc::DataPoint replacement = data[0];
    replacement.y += 2.0;
    const double gap = dc::stability_gap(data, 0, replacement, make, probes);
    const double scaled = static_cast<double>(n) * gap;
    min_scaled = std::min(min_scaled, scaled);
    max_scaled = std::max(max_scaled, scaled);
    if (n == 100u) zero_gap = dc::stability_gap(data, 0, data[0], make, probes);
  }
  const double ratio = max_scaled / min_scaled;
  return {ratio <= 5.0 && zero_gap == 0.0,
          fmt("n*gap in [%.4f, %.4f], ratio %.2f (<=5); identity gap %g",
              min_scaled, max_scaled, ratio, zero_gap)};
}

// ---------------------------------------------------------------------------
// 10. The equal-fraction interval union captures the nominal mass of a
//     smooth density as the partition refines.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_pathological_set() {
  const auto beta22_cdf = [](double y) { return y * y * (3.0 - 2.0 * y); };
  const auto mass = [&](std::int64_t n) {
    const auto set = dc::pathological_union(n, dc::Alpha(0.1));
    double total = 0.0;
    for (const auto& iv : set.intervals())
      total += beta22_cdf(iv.hi) - beta22_cdf(iv.lo);
    return total;
  };
  const double g10 = std::abs(mass(10) - 0.9);
  const double g100 = std::abs(mass(100) - 0.9);
  const double g1000 = std::abs(mass(1000) - 0.9);
  return {g1000 <= 0.01 && g100 < g10 && g1000 < g100,
          fmt("|gap| at n=10/100/1000: %.5f / %.5f / %.6f", g10, g100, g1000)};
}

// ---------------------------------------------------------------------------
// 11. Adversarial stream generators hit their analytic targets.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_adversarial_streams() {
  dc::StreamConfig blocks;
  blocks.scenario = dc::Scenario::ExpRateBlocks;
  blocks.T = 400000;
  blocks.n_blocks = 4;
  blocks.eps = 1.0;
  blocks = dc::resolve_stream(blocks);
  dc::RngStream rng(1111);
  std::vector<double> block_a, block_b;
  for (int i = 0; i < 100000; ++i)
    block_a.push_back(dc::sample_at(blocks, 1, rng).y);
  for (int i = 0; i < 100000; ++i)
    block_b.push_back(dc::sample_at(blocks, 100001, rng).y);
  const double ks = dc::empirical_ks(block_a, block_b);
  const bool ks_ok = std::abs(ks - 0.25) <= 0.01;

  bool density_ok = true;
  dc::RngStream sign_rng(22);
  for (std::int64_t k : {2, 5, 16, 64}) {
    for (double eps : {0.05, 0.1, 0.25}) {
      dc::StreamConfig flat;
      flat.scenario = dc::Scenario::PiecewiseFlat;
      flat.T = 10;
      flat.k_pieces = k;
      flat.eps = eps;
      flat.flat_signs.resize(static_cast<std::size_t>(k));
      for (auto& v : flat.flat_signs) v = sign_rng.bernoulli(0.5) ? 1 : -1;
      flat = dc::resolve_stream(flat);
      double integral = 0.0;
      for (std::int64_t j = 0; j < k; ++j)
        integral +=
            dc::piecewise_flat_density(flat, (static_cast<double>(j) + 0.5) /
                                                 static_cast<double>(k)) /
            static_cast<double>(k);
      if (std::abs(integral - 1.0) > 1e-9) density_ok = false;
    }
  }
  return {ks_ok && density_ok,
          fmt("adjacent-block KS %.4f (target 0.25 +- 0.01); densities %s",
              ks, density_ok ? "normalized" : "NOT normalized")};
}

// ---------------------------------------------------------------------------
// 12. Online full conformal end to end on covariate variance shift:
//     rolling coverage re-enters the target band shortly after each change
//     point, and adaptive scores beat the covariate-agnostic baseline on
//     interval width.
// ---------------------------------------------------------------------------
std::pair<bool, std::string> criterion_fullocp_end_to_end() {
  dc::ExperimentConfig cfg;
  cfg.stream.scenario = dc::Scenario::CovShiftVar;
  cfg.stream.T = 2000;
  cfg.stream.d = 10;
  // change points rescaled from {3333, 6667} to the reduced horizon
  cfg.stream.change_points = {667, 1333};
  cfg.alpha = 0.1;
  cfg.M = 100;
  cfg.eval_stride = 10;
  cfg.replications = 10;
  cfg.n_pretrain = 100;
  cfg.n_train = 500;
  cfg.master_seed = 1212;
  dc::PolicyConfig full;
  full.kind = dc::PolicyKind::DriftOcpFull;
  full.grid_points = 256;
  dc::PolicyConfig abs_resp;
  abs_resp.kind = dc::PolicyKind::DriftOcp;
  abs_resp.score_model = dc::ScoreModel::AbsoluteResponse;
  cfg.policies = {full, abs_resp};
  const auto result = dc::run_experiment(cfg);

  int recovered = 0;
  double full_width_sum = 0.0, abs_width_sum = 0.0;
  std::int64_t full_width_n = 0, abs_width_n = 0;
  for (const auto& rep : result.policies[0].replications) {
    if (rep.failed) return {false, "full replication failed: " + rep.failure};
    std::vector<bool> covered;
    for (const auto& rec : rep.trace) {
      covered.push_back(rec.covered);
      if (!std::isinf(rec.width)) {
        full_width_sum += rec.width;
        ++full_width_n;
      }
    }
    const auto rolling = dc::rolling_coverage(covered, 100);
    bool all_cps_recovered = true;
    for (std::int64_t cp : cfg.stream.change_points) {
      bool back = false;
      for (std::int64_t t = cp + 1; t <= cp + 300; ++t) {
        const double r = rolling[static_cast<std::size_t>(t) - 1];
        if (r >= 0.85 && r <= 0.95) {
          back = true;
          break;
        }
      }
      if (!back) all_cps_recovered = false;
    }
    if (all_cps_recovered) ++recovered;
  }
  for (const auto& rep : result.policies[1].replications) {
    if (rep.failed)
      return {false, "baseline replication failed: " + rep.failure};
    for (const auto& rec : rep.trace) {
      if (!std::isinf(rec.width)) {
        abs_width_sum += rec.width;
        ++abs_width_n;
      }
    }
  }
  const double full_width = full_width_sum / static_cast<double>(full_width_n);
  const double abs_width = abs_width_sum / static_cast<double>(abs_width_n);
  return {recovered >= 8 && full_width <= abs_width,
          fmt("coverage recovery %d/10 reps; mean width %.2f (adaptive) vs "
              "%.2f (absolute response)",
              recovered, full_width, abs_width)};
}

}  // namespace

int main() {
  std::printf("driftconform acceptance suite\n");
  run_criterion(1, "unit oracles", criterion_unit_oracles);
  run_criterion(2, "coverage/regret bounds", criterion_fact1);
  run_criterion(3, "calibration identity", criterion_calibration_identity);
  run_criterion(4, "stationary sublinearity", criterion_stationary_sublinearity);
  run_criterion(5, "change-point reactivity", criterion_changepoint_reactivity);
  run_criterion(6, "aci long-term coverage", criterion_aci_long_term);
  run_criterion(7, "four-setting comparison", criterion_policy_comparison);
  run_criterion(8, "full conformal coverage", criterion_full_conformal_coverage);
  run_criterion(9, "sgd stability", criterion_stability);
  run_criterion(10, "interval-union coverage", criterion_pathological_set);
  run_criterion(11, "adversarial streams", criterion_adversarial_streams);
  run_criterion(12, "online full conformal", criterion_fullocp_end_to_end);
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
