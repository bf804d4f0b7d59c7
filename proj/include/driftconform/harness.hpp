#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "driftconform/baselines.hpp"
#include "driftconform/detect.hpp"
#include "driftconform/fullconf.hpp"
#include "driftconform/json_io.hpp"
#include "driftconform/learners.hpp"
#include "driftconform/metrics.hpp"
#include "driftconform/ocp.hpp"
#include "driftconform/quantile.hpp"
#include "driftconform/rng.hpp"
#include "driftconform/streams.hpp"
#include "driftconform/types.hpp"

namespace driftconform {

// Configuration errors carry the offending field name.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class PolicyKind { DriftOcp, DriftOcpFull, AciFixed, AciDecaying, Vacuous };

inline std::string policy_kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::DriftOcp: return "driftocp";
    case PolicyKind::DriftOcpFull: return "driftocp_full";
    case PolicyKind::AciFixed: return "aci_fixed";
    case PolicyKind::AciDecaying: return "aci_decaying";
    case PolicyKind::Vacuous: return "vacuous";
  }
  throw std::logic_error("unknown policy kind");
}

inline PolicyKind policy_kind_from_name(const std::string& name) {
  for (PolicyKind k : {PolicyKind::DriftOcp, PolicyKind::DriftOcpFull,
                       PolicyKind::AciFixed, PolicyKind::AciDecaying,
                       PolicyKind::Vacuous}) {
    if (policy_kind_name(k) == name) return k;
  }
  throw ConfigError("policy.kind unknown: " + name);
}

// Score construction for threshold policies and the model updated online by
// the full-conformal policy.
enum class ScoreModel { Ridge, AbsoluteResponse };

struct PolicyConfig {
  PolicyKind kind = PolicyKind::DriftOcp;
  std::string label;  // output subdirectory; defaults to a descriptive name

  SigmaSchedule sigma = SigmaSchedule::fixed(4.0);
  std::size_t min_window = 10;
  bool warm_start = true;  // initialize q from pretraining residuals

  double eta = 0.1;    // ACI fixed stepsize
  double gamma = 0.5;  // ACI decaying exponent

  ScoreModel score_model = ScoreModel::Ridge;
  double ridge_lambda = 1.0;

  std::size_t grid_points = 512;
  StepsizeSchedule sgd = StepsizeSchedule::inverse_sqrt(0.01);

  std::string resolved_label() const {
    if (!label.empty()) return label;
    char buf[64];
    switch (kind) {
      case PolicyKind::AciFixed:
        std::snprintf(buf, sizeof buf, "aci_eta_%g", eta);
        return buf;
      case PolicyKind::AciDecaying:
        std::snprintf(buf, sizeof buf, "aci_gamma_%g", gamma);
        return buf;
      default: return policy_kind_name(kind);
    }
  }
};

struct ExperimentConfig {
  StreamConfig stream;
  std::vector<PolicyConfig> policies{PolicyConfig{}};
  double alpha = 0.1;
  std::size_t M = 500;
  std::size_t replications = 20;
  std::size_t eval_stride = 1;
  std::size_t rolling_window = 100;
  std::size_t n_train = 500;    // warm-start sample (quantile initialization)
  std::size_t n_pretrain = 0;   // model-fitting sample; 0 reuses the n_train set
  std::uint64_t master_seed = 1;
  std::string out_dir;          // empty: keep results in memory only
  std::size_t threads = 0;      // 0: hardware concurrency

  // Externally produced stream: CSV replay instead of a synthetic scenario.
  // The first replay_warmup_rows rows initialize models and quantiles; the
  // rest form the stream.  Monte-Carlo coverage columns stay empty (no
  // oracle distribution is available for replayed data).
  std::string replay_path;
  std::size_t replay_warmup_rows = 0;
};

inline ExperimentConfig resolve_experiment(ExperimentConfig cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw ConfigError("alpha must lie in (0,1)");
  if (cfg.stream.T < 1) throw ConfigError("T must be >= 1");
  if (cfg.M < 1) throw ConfigError("M must be >= 1");
  if (cfg.replications < 1) throw ConfigError("replications must be >= 1");
  if (cfg.eval_stride < 1) throw ConfigError("eval_stride must be >= 1");
  if (cfg.rolling_window < 1) throw ConfigError("rolling_window must be >= 1");
  if (cfg.policies.empty()) throw ConfigError("policy list must be nonempty");
  if (cfg.replay_path.empty()) {
    try {
      cfg.stream = resolve_stream(cfg.stream);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("stream: ") + e.what());
    }
  }
  if (cfg.replay_path.empty() && cfg.stream.is_cov_shift() &&
      cfg.stream.beta_star.empty()) {
    // beta* is drawn once per experiment and held fixed across replications.
    RngStream rng(derive_seed(cfg.master_seed, "beta_star"));
    cfg.stream.beta_star.resize(cfg.stream.d);
    for (auto& v : cfg.stream.beta_star) v = rng.normal();
  }
  for (auto& p : cfg.policies) {
    if (p.kind == PolicyKind::AciFixed && !(p.eta > 0.0))
      throw ConfigError("policy.eta must be positive");
    if (p.kind == PolicyKind::AciDecaying && !(p.gamma > 0.0))
      throw ConfigError("policy.gamma must be positive");
    if (p.kind == PolicyKind::DriftOcpFull && p.grid_points < 2)
      throw ConfigError("policy.grid_points must be >= 2");
    if (p.score_model == ScoreModel::Ridge && cfg.replay_path.empty() &&
        cfg.stream.is_response_only())
      p.score_model = ScoreModel::AbsoluteResponse;
    if (!(p.ridge_lambda > 0.0))
      throw ConfigError("policy.ridge_lambda must be positive");
  }
  return cfg;
}

// One trace row; cvg_hat and gap are empty at strided-out steps.
struct StepRecord {
  std::int64_t t = 0;
  std::int64_t stage = 0;
  std::int64_t round = 0;
  std::optional<double> q;
  bool covered = false;
  std::optional<double> cvg_hat;
  std::optional<double> gap;
  double cum_regret = 0.0;
  bool drift = false;
  double width = 0.0;
  std::int64_t n_intervals = 0;
};

namespace detail {

class PolicyRuntime {
 public:
  virtual ~PolicyRuntime() = default;

  // Forms the prediction set for the revealed feature.  Must not read z.y.
  virtual void begin_step(const DataPoint& z) = 0;

  // Instantaneous coverage of the set-forming state used at this step.
  // Called between begin_step and finish_step.
  virtual double coverage(const std::vector<DataPoint>& batch,
                          const std::vector<double>& sorted_scores) const = 0;

  // Consumes the response and advances the policy state.
  virtual StepRecord finish_step(const DataPoint& z) = 0;

  // Model whose oracle scores this policy thresholds; null for set-valued
  // or randomized policies.
  virtual const Learner* score_model() const { return nullptr; }
};

// Point-prediction source for threshold policies: a fitted model, or an
// external prediction column indexed by the stream time.
using CenterFn = std::function<double(const DataPoint&)>;

class ThresholdRuntime : public PolicyRuntime {
 public:
  ThresholdRuntime(std::shared_ptr<const Learner> model, CenterFn center_fn)
      : model_(std::move(model)), center_fn_(std::move(center_fn)) {}

  void begin_step(const DataPoint& z) override {
    center_ = center_fn_ ? center_fn_(z) : model_->predict(z.x);
    if (!std::isfinite(center_)) throw std::runtime_error("learner diverged");
    q_used_ = current_q();
    set_ = threshold_set(center_, q_used_);
  }

  double coverage(const std::vector<DataPoint>&,
                  const std::vector<double>& sorted_scores) const override {
    return coverage_from_sorted_scores(sorted_scores, q_used_);
  }

  StepRecord finish_step(const DataPoint& z) override {
    const double score = std::abs(z.y - center_);
    StepRecord rec;
    rec.q = q_used_;
    rec.covered = set_.contains(z.y);
    rec.width = set_.lebesgue();
    rec.n_intervals = static_cast<std::int64_t>(set_.interval_count());
    update(score, rec);
    return rec;
  }

  const Learner* score_model() const override { return model_.get(); }

 protected:
  virtual double current_q() const = 0;
  virtual void update(double score, StepRecord& rec) = 0;

  std::shared_ptr<const Learner> model_;
  CenterFn center_fn_;
  double center_ = 0.0;
  double q_used_ = 0.0;
  PredictionSet set_;
};

class DriftOcpRuntime final : public ThresholdRuntime {
 public:
  DriftOcpRuntime(std::shared_ptr<const Learner> model, CenterFn center_fn,
                  OcpConfig cfg)
      : ThresholdRuntime(std::move(model), std::move(center_fn)),
        engine_(cfg) {}

 private:
  double current_q() const override { return engine_.q(); }

  void update(double score, StepRecord& rec) override {
    rec.stage = engine_.stage();
    rec.round = engine_.round();
    const auto res = engine_.observe(score);
    rec.drift = res.drift;
  }

  DriftOcp engine_;
};

class AciRuntime final : public ThresholdRuntime {
 public:
  AciRuntime(std::shared_ptr<const Learner> model, CenterFn center_fn,
             Alpha alpha, double q0, bool decaying, double eta, double gamma)
      : ThresholdRuntime(std::move(model), std::move(center_fn)),
        alpha_(alpha),
        q_(q0),
        decaying_(decaying),
        eta_(eta),
        gamma_(gamma) {}

 private:
  double current_q() const override { return q_; }

  void update(double score, StepRecord& rec) override {
    ++t_;
    const double eta = decaying_ ? decaying_stepsize(t_, gamma_) : eta_;
    q_ = aci_update(q_, eta, alpha_, score > q_used_);
    rec.stage = 0;
    rec.round = 0;
  }

  Alpha alpha_;
  double q_ = 0.0;
  bool decaying_ = false;
  double eta_ = 0.1;
  double gamma_ = 0.5;
  std::int64_t t_ = 0;
};

class VacuousRuntime final : public PolicyRuntime {
 public:
  VacuousRuntime(Alpha alpha, std::uint64_t seed) : alpha_(alpha), rng_(seed) {}

  void begin_step(const DataPoint&) override {
    set_ = vacuous_step(rng_, alpha_);
  }

  double coverage(const std::vector<DataPoint>&,
                  const std::vector<double>&) const override {
    return set_.is_whole_line() ? 1.0 : 0.0;
  }

  StepRecord finish_step(const DataPoint& z) override {
    StepRecord rec;
    rec.covered = set_.contains(z.y);
    rec.width = set_.lebesgue();
    rec.n_intervals = static_cast<std::int64_t>(set_.interval_count());
    return rec;
  }

 private:
  Alpha alpha_;
  RngStream rng_;
  PredictionSet set_;
};

class FullConformalRuntime final : public PolicyRuntime {
 public:
  FullConformalRuntime(FullOcpConfig cfg, std::unique_ptr<Learner> learner)
      : engine_(cfg, std::move(learner)) {}

  void begin_step(const DataPoint& z) override { set_ = engine_.predict(z.x); }

  double coverage(const std::vector<DataPoint>& batch,
                  const std::vector<double>&) const override {
    if (batch.empty()) throw std::invalid_argument("empty oracle batch");
    std::int64_t covered = 0;
    for (const auto& z : batch)
      if (engine_.strategy_covers(z.x, z.y)) ++covered;
    return static_cast<double>(covered) / static_cast<double>(batch.size());
  }

  StepRecord finish_step(const DataPoint& z) override {
    StepRecord rec;
    rec.stage = engine_.stage();
    rec.round = engine_.round();
    if (const CandidateGrid* g = engine_.grid())
      rec.q = g->hi - g->lo;
    rec.covered = set_.contains(z.y);
    rec.width = set_.lebesgue();
    rec.n_intervals = static_cast<std::int64_t>(set_.interval_count());
    const auto res = engine_.observe(z, set_);
    rec.drift = res.drift;
    return rec;
  }

 private:
  DriftOcpFull engine_;
  PredictionSet set_;
};

}  // namespace detail

// Per-replication output retained in memory for aggregation.
struct ReplicationResult {
  bool failed = false;
  std::string failure;
  std::vector<StepRecord> trace;
};

struct PolicyResult {
  std::string label;
  std::vector<ReplicationResult> replications;

  // Mean over successful replications of the cumulative regret at time t.
  double mean_cum_regret_at(std::int64_t t) const {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& rep : replications) {
      if (rep.failed || rep.trace.size() < static_cast<std::size_t>(t))
        continue;
      total += rep.trace[static_cast<std::size_t>(t) - 1].cum_regret;
      ++n;
    }
    if (n == 0) throw std::runtime_error("no successful replications");
    return total / static_cast<double>(n);
  }
};

struct ExperimentResult {
  ExperimentConfig config;  // resolved
  ScenarioVariation variation;
  std::vector<PolicyResult> policies;
};

// Per-t sample mean and unbiased sample std of each numeric column across
// replications; NaN cells are skipped.  traces[r] is a T x C matrix.
inline void aggregate(const std::vector<std::vector<std::vector<double>>>& traces,
                      std::vector<std::vector<double>>& mean_out,
                      std::vector<std::vector<double>>& std_out) {
  if (traces.empty()) throw std::invalid_argument("no traces to aggregate");
  const std::size_t T = traces.front().size();
  for (const auto& tr : traces)
    if (tr.size() != T)
      throw std::invalid_argument("traces must share the horizon");
  const std::size_t C = T == 0 ? 0 : traces.front().front().size();
  mean_out.assign(T, std::vector<double>(C, std::numeric_limits<double>::quiet_NaN()));
  std_out.assign(T, std::vector<double>(C, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& tr : traces) {
        const double v = tr[t][c];
        if (std::isnan(v)) continue;
        sum += v;
        ++n;
      }
      if (n == 0) continue;
      const double mean = sum / static_cast<double>(n);
      mean_out[t][c] = mean;
      if (n == 1) {
        std_out[t][c] = 0.0;
        continue;
      }
      double ss = 0.0;
      for (const auto& tr : traces) {
        const double v = tr[t][c];
        if (std::isnan(v)) continue;
        ss += (v - mean) * (v - mean);
      }
      std_out[t][c] = std::sqrt(ss / static_cast<double>(n - 1));
    }
  }
}

namespace detail {

inline std::shared_ptr<const Learner> make_score_model(
    const PolicyConfig& policy, const std::vector<DataPoint>& pretrain_set) {
  if (policy.score_model == ScoreModel::AbsoluteResponse)
    return std::make_shared<ConstantLearner>(0.0);
  std::vector<FeatureVec> xs;
  std::vector<double> ys;
  xs.reserve(pretrain_set.size());
  for (const auto& z : pretrain_set) {
    xs.push_back(z.x);
    ys.push_back(z.y);
  }
  return std::make_shared<PretrainedLinearLearner>(
      fit_ridge(xs, ys, policy.ridge_lambda));
}

struct PreparedPolicy {
  std::unique_ptr<PolicyRuntime> runtime;
  std::string label;
};

// Replay bookkeeping: the warmup prefix of the file plus the prediction
// column aligned with the post-warmup stream (step t maps to row
// warmup + t - 1).
struct ReplayView {
  const ReplayStream* data = nullptr;
  std::size_t warmup = 0;

  bool active() const { return data != nullptr; }
  bool has_preds() const { return active() && data->has_preds(); }
  std::size_t stream_size() const { return data->points.size() - warmup; }
  const DataPoint& stream_point(std::int64_t t) const {
    return data->points[warmup + static_cast<std::size_t>(t) - 1];
  }
  double pred_at(std::int64_t t) const {
    return data->preds[warmup + static_cast<std::size_t>(t) - 1];
  }
  double warm_pred(std::size_t i) const { return data->preds[i]; }
};

inline std::vector<PreparedPolicy> prepare_policies(
    const ExperimentConfig& cfg, std::size_t rep,
    const std::vector<DataPoint>& pretrain_set,
    const std::vector<DataPoint>& warm_set, const ReplayView& replay) {
  const Alpha alpha(cfg.alpha);
  std::vector<PreparedPolicy> out;
  // Ridge models are shared across policies with identical lambda.
  std::map<double, std::shared_ptr<const Learner>> ridge_cache;
  std::shared_ptr<const Learner> constant_model;
  const std::size_t dim = replay.active() ? replay.data->d : cfg.stream.d;

  for (const auto& policy : cfg.policies) {
    PreparedPolicy prepared;
    prepared.label = policy.resolved_label();
    std::shared_ptr<const Learner> model;
    CenterFn center_fn;
    const bool external = replay.has_preds() &&
                          policy.score_model == ScoreModel::Ridge &&
                          policy.kind != PolicyKind::Vacuous &&
                          policy.kind != PolicyKind::DriftOcpFull;
    if (external) {
      const ReplayView view = replay;
      center_fn = [view](const DataPoint& z) { return view.pred_at(z.t); };
    } else if (policy.kind != PolicyKind::Vacuous) {
      if (policy.score_model == ScoreModel::AbsoluteResponse) {
        if (!constant_model) constant_model = make_score_model(policy, {});
        model = constant_model;
      } else {
        if (pretrain_set.empty())
          throw ConfigError(
              "policy.score_model=ridge needs pretraining rows "
              "(n_train/n_pretrain or replay_warmup_rows)");
        auto it = ridge_cache.find(policy.ridge_lambda);
        if (it == ridge_cache.end())
          it = ridge_cache
                   .emplace(policy.ridge_lambda,
                            make_score_model(policy, pretrain_set))
                   .first;
        model = it->second;
      }
    }
    double q0 = 0.0;
    if (policy.warm_start && !warm_set.empty() &&
        policy.kind != PolicyKind::Vacuous) {
      std::vector<double> residuals;
      residuals.reserve(warm_set.size());
      for (std::size_t i = 0; i < warm_set.size(); ++i) {
        const double center = external ? replay.warm_pred(i)
                                       : model->predict(warm_set[i].x);
        residuals.push_back(std::abs(warm_set[i].y - center));
      }
      q0 = quantile_of_point_masses(residuals, alpha.level());
    }
    switch (policy.kind) {
      case PolicyKind::DriftOcp: {
        OcpConfig ocp{alpha, policy.sigma, policy.min_window, q0};
        prepared.runtime =
            std::make_unique<DriftOcpRuntime>(model, center_fn, ocp);
        break;
      }
      case PolicyKind::AciFixed:
      case PolicyKind::AciDecaying: {
        prepared.runtime = std::make_unique<AciRuntime>(
            model, center_fn, alpha, q0,
            policy.kind == PolicyKind::AciDecaying, policy.eta, policy.gamma);
        break;
      }
      case PolicyKind::Vacuous: {
        prepared.runtime = std::make_unique<VacuousRuntime>(
            alpha, derive_seed(cfg.master_seed, "policy:" + prepared.label,
                               rep));
        break;
      }
      case PolicyKind::DriftOcpFull: {
        FullOcpConfig full{alpha, policy.sigma, policy.min_window,
                           policy.grid_points, 3.0};
        // The online model starts from the pretrained ridge fit when the
        // dimensions match, otherwise from zero.
        LinearParams init{FeatureVec(dim, 0.0)};
        if (model && model->parameters().size() == dim)
          init.theta = model->parameters();
        prepared.runtime = std::make_unique<FullConformalRuntime>(
            full, std::make_unique<OnlineSgdLearner>(init, policy.sgd));
        break;
      }
    }
    out.push_back(std::move(prepared));
  }
  return out;
}

inline void format_cell(std::string& line, std::optional<double> v) {
  char buf[40];
  if (v.has_value()) {
    std::snprintf(buf, sizeof buf, "%.12g", *v);
    line += buf;
  }
  line += ',';
}

inline std::string step_record_csv_header() {
  return "t,stage,round,q,covered,cvg_hat,gap,cum_regret,drift,width,"
         "n_intervals";
}

inline std::string step_record_csv_row(const StepRecord& r) {
  std::string line;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,",
                static_cast<long long>(r.t), static_cast<long long>(r.stage),
                static_cast<long long>(r.round));
  line += buf;
  format_cell(line, r.q);
  line += r.covered ? "1," : "0,";
  format_cell(line, r.cvg_hat);
  format_cell(line, r.gap);
  format_cell(line, r.cum_regret);
  line += r.drift ? "1," : "0,";
  std::snprintf(buf, sizeof buf, "%.12g,%lld", r.width,
                static_cast<long long>(r.n_intervals));
  line += buf;
  return line;
}

}  // namespace detail

// Runs one replication of every policy in lockstep over a shared stream.
// Oracle batches are derived per (seed, t), so evaluation never perturbs
// the stream and strided evaluation leaves replays bit-exact.
inline std::vector<ReplicationResult> run_replication(
    const ExperimentConfig& cfg, std::size_t rep,
    const ReplayStream* replay_data = nullptr) {
  const Alpha alpha(cfg.alpha);
  ReplayStream loaded;
  if (!cfg.replay_path.empty() && replay_data == nullptr) {
    loaded = load_replay_csv(cfg.replay_path);
    replay_data = &loaded;
  }
  detail::ReplayView replay;
  if (replay_data != nullptr) {
    if (cfg.replay_warmup_rows >= replay_data->points.size())
      throw ConfigError("replay_warmup_rows must leave stream rows");
    replay.data = replay_data;
    replay.warmup = cfg.replay_warmup_rows;
  }

  RngStream stream_rng(derive_seed(cfg.master_seed, "stream", rep));
  RngStream pretrain_rng(derive_seed(cfg.master_seed, "pretrain", rep));

  std::vector<DataPoint> pretrain_set;
  std::vector<DataPoint> warm_set;
  const bool needs_model =
      std::any_of(cfg.policies.begin(), cfg.policies.end(),
                  [](const PolicyConfig& p) {
                    return p.kind != PolicyKind::Vacuous;
                  });
  if (replay.active()) {
    warm_set.assign(replay.data->points.begin(),
                    replay.data->points.begin() +
                        static_cast<std::ptrdiff_t>(replay.warmup));
    pretrain_set = warm_set;
  } else if (needs_model && cfg.n_train + cfg.n_pretrain > 0 &&
             !cfg.stream.is_response_only()) {
    const std::size_t n_pre = cfg.n_pretrain > 0 ? cfg.n_pretrain : cfg.n_train;
    for (std::size_t i = 0; i < n_pre; ++i)
      pretrain_set.push_back(sample_at(cfg.stream, 1, pretrain_rng));
    if (cfg.n_pretrain > 0) {
      RngStream warm_rng(derive_seed(cfg.master_seed, "warmstart", rep));
      for (std::size_t i = 0; i < cfg.n_train; ++i)
        warm_set.push_back(sample_at(cfg.stream, 1, warm_rng));
    } else {
      warm_set = pretrain_set;
    }
  } else if (needs_model && cfg.stream.is_response_only() && cfg.n_train > 0) {
    RngStream warm_rng(derive_seed(cfg.master_seed, "warmstart", rep));
    for (std::size_t i = 0; i < cfg.n_train; ++i)
      warm_set.push_back(sample_at(cfg.stream, 1, warm_rng));
  }

  auto prepared =
      detail::prepare_policies(cfg, rep, pretrain_set, warm_set, replay);
  const std::size_t n_policies = prepared.size();
  const std::int64_t horizon =
      replay.active() ? static_cast<std::int64_t>(replay.stream_size())
                      : cfg.stream.T;
  std::vector<ReplicationResult> results(n_policies);
  for (auto& r : results) r.trace.reserve(static_cast<std::size_t>(horizon));
  std::vector<double> cum_regret(n_policies, 0.0);
  std::vector<bool> alive(n_policies, true);

  std::vector<DataPoint> batch;
  std::map<const Learner*, std::vector<double>> score_cache;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    DataPoint z;
    if (replay.active()) {
      z = replay.stream_point(t);
      z.t = t;
    } else {
      z = sample_at(cfg.stream, t, stream_rng);
    }
    // Replayed streams have no oracle distribution to evaluate against.
    const bool eval = !replay.active() &&
                      (static_cast<std::size_t>(t - 1) % cfg.eval_stride) == 0;
    if (eval) {
      RngStream oracle_rng(derive_seed(cfg.master_seed, "oracle",
                                       rep, static_cast<std::uint64_t>(t)));
      batch = oracle_batch(cfg.stream, t, cfg.M, oracle_rng);
      score_cache.clear();
      for (std::size_t p = 0; p < n_policies; ++p) {
        if (!alive[p]) continue;
        const Learner* model = prepared[p].runtime->score_model();
        if (model == nullptr || score_cache.count(model)) continue;
        std::vector<double> scores;
        scores.reserve(batch.size());
        for (const auto& zb : batch)
          scores.push_back(abs_residual_score(*model, zb.x, zb.y));
        std::sort(scores.begin(), scores.end());
        score_cache.emplace(model, std::move(scores));
      }
    }
    for (std::size_t p = 0; p < n_policies; ++p) {
      if (!alive[p]) continue;
      try {
        auto& rt = *prepared[p].runtime;
        rt.begin_step(z);
        std::optional<double> cvg;
        if (eval) {
          const Learner* model = rt.score_model();
          static const std::vector<double> kNoScores;
          cvg = rt.coverage(batch, model ? score_cache.at(model) : kNoScores);
        }
        StepRecord rec = rt.finish_step(z);
        rec.t = t;
        rec.cvg_hat = cvg;
        if (cvg.has_value()) {
          rec.gap = std::abs(*cvg - alpha.level());
          cum_regret[p] += *rec.gap;
        }
        rec.cum_regret = cum_regret[p];
        results[p].trace.push_back(rec);
      } catch (const std::exception& e) {
        // A diverging replication never aborts the others.
        alive[p] = false;
        results[p].failed = true;
        results[p].failure = e.what();
      }
    }
  }
  return results;
}

namespace detail {

inline std::size_t resolve_threads(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("DRIFTCONFORM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  if (cfg.threads >= 1) return cfg.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

inline void write_trace_file(const std::filesystem::path& path,
                             const std::vector<StepRecord>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << step_record_csv_header() << '\n';
  for (const auto& rec : trace) out << step_record_csv_row(rec) << '\n';
}

inline void write_summary_file(const std::filesystem::path& path,
                               const ExperimentConfig& cfg,
                               const PolicyResult& policy) {
  // Long format: one row per (t, metric) with mean and std across reps.
  std::vector<std::vector<std::vector<double>>> series;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& rep : policy.replications) {
    if (rep.failed) continue;
    std::vector<bool> covered;
    covered.reserve(rep.trace.size());
    for (const auto& r : rep.trace) covered.push_back(r.covered);
    const auto rolling = rolling_coverage(covered, cfg.rolling_window);
    std::vector<std::vector<double>> mat;
    mat.reserve(rep.trace.size());
    for (std::size_t i = 0; i < rep.trace.size(); ++i) {
      const auto& r = rep.trace[i];
      mat.push_back({r.cum_regret, r.q.value_or(nan), rolling[i],
                     std::isinf(r.width) ? nan : r.width});
    }
    series.push_back(std::move(mat));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,metric,mean,std\n";
  if (series.empty()) return;
  std::vector<std::vector<double>> mean, sd;
  aggregate(series, mean, sd);
  static const char* kMetrics[] = {"cum_regret", "q", "rolling_coverage",
                                   "width"};
  char buf[96];
  for (std::size_t t = 0; t < mean.size(); ++t) {
    for (std::size_t c = 0; c < 4; ++c) {
      if (std::isnan(mean[t][c])) continue;
      std::snprintf(buf, sizeof buf, "%zu,%s,%.12g,%.12g\n", t + 1,
                    kMetrics[c], mean[t][c], sd[t][c]);
      out << buf;
    }
  }
}

}  // namespace detail

inline json policy_config_to_json(const PolicyConfig& p) {
  json j;
  j["kind"] = policy_kind_name(p.kind);
  j["label"] = p.resolved_label();
  j["sigma"] = sigma_schedule_to_json(p.sigma);
  j["min_window"] = p.min_window;
  j["warm_start"] = p.warm_start;
  j["eta"] = p.eta;
  j["gamma"] = p.gamma;
  j["score_model"] = p.score_model == ScoreModel::Ridge ? "ridge"
                                                        : "absolute_response";
  j["ridge_lambda"] = p.ridge_lambda;
  j["grid_points"] = p.grid_points;
  j["sgd"] = stepsize_schedule_to_json(p.sgd);
  return j;
}

inline PolicyConfig policy_config_from_json(const json& j) {
  PolicyConfig p;
  if (j.contains("kind"))
    p.kind = policy_kind_from_name(j.at("kind").get<std::string>());
  p.label = j.value("label", p.label);
  try {
    if (j.contains("sigma")) p.sigma = sigma_schedule_from_json(j.at("sigma"));
    if (j.contains("sgd")) p.sgd = stepsize_schedule_from_json(j.at("sgd"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
  p.min_window = j.value("min_window", p.min_window);
  p.warm_start = j.value("warm_start", p.warm_start);
  p.eta = j.value("eta", p.eta);
  p.gamma = j.value("gamma", p.gamma);
  if (j.contains("score_model")) {
    const std::string m = j.at("score_model").get<std::string>();
    if (m == "ridge") p.score_model = ScoreModel::Ridge;
    else if (m == "absolute_response") p.score_model = ScoreModel::AbsoluteResponse;
    else throw ConfigError("policy.score_model unknown: " + m);
  }
  p.ridge_lambda = j.value("ridge_lambda", p.ridge_lambda);
  p.grid_points = j.value("grid_points", p.grid_points);
  return p;
}

inline json experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["stream"] = stream_config_to_json(c.stream);
  if (c.policies.size() == 1) {
    j["policy"] = policy_config_to_json(c.policies.front());
  } else {
    j["policies"] = json::array();
    for (const auto& p : c.policies)
      j["policies"].push_back(policy_config_to_json(p));
  }
  j["alpha"] = c.alpha;
  j["M"] = c.M;
  j["replications"] = c.replications;
  j["eval_stride"] = c.eval_stride;
  j["rolling_window"] = c.rolling_window;
  j["n_train"] = c.n_train;
  j["n_pretrain"] = c.n_pretrain;
  j["master_seed"] = c.master_seed;
  j["out_dir"] = c.out_dir;
  j["threads"] = c.threads;
  j["replay_path"] = c.replay_path;
  j["replay_warmup_rows"] = c.replay_warmup_rows;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("stream")) c.stream = stream_config_from_json(j.at("stream"));
  c.policies.clear();
  if (j.contains("policy"))
    c.policies.push_back(policy_config_from_json(j.at("policy")));
  if (j.contains("policies"))
    for (const auto& pj : j.at("policies"))
      c.policies.push_back(policy_config_from_json(pj));
  if (c.policies.empty()) c.policies.push_back(PolicyConfig{});
  c.alpha = j.value("alpha", c.alpha);
  c.M = j.value("M", c.M);
  c.replications = j.value("replications", c.replications);
  c.eval_stride = j.value("eval_stride", c.eval_stride);
  c.rolling_window = j.value("rolling_window", c.rolling_window);
  c.n_train = j.value("n_train", c.n_train);
  c.n_pretrain = j.value("n_pretrain", c.n_pretrain);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.threads = j.value("threads", c.threads);
  c.replay_path = j.value("replay_path", c.replay_path);
  c.replay_warmup_rows = j.value("replay_warmup_rows", c.replay_warmup_rows);
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  in >> j;
  return experiment_config_from_json(j);
}

// Resolved config, variation bounds and per-policy outcome summary,
// including any failed replications.
inline std::string experiment_meta_json(const ExperimentConfig& cfg,
                                        const ExperimentResult& result,
                                        std::size_t policy_index) {
  const PolicyResult& pol = result.policies.at(policy_index);
  json j;
  j["config"] = experiment_config_to_json(cfg);
  j["policy"] = policy_config_to_json(cfg.policies.at(policy_index));
  j["scenario_variation"] = {{"tv_upper", result.variation.tv_upper},
                             {"ks_upper", result.variation.ks_upper},
                             {"n_cp", result.variation.n_cp}};
  json failed = json::array();
  json finals = json::array();
  double final_regret_sum = 0.0;
  std::size_t ok = 0;
  for (std::size_t r = 0; r < pol.replications.size(); ++r) {
    const auto& rep = pol.replications[r];
    if (rep.failed) {
      failed.push_back({{"replication", r}, {"error", rep.failure}});
      continue;
    }
    if (!rep.trace.empty()) {
      final_regret_sum += rep.trace.back().cum_regret;
      finals.push_back(rep.trace.back().cum_regret);
    }
    ++ok;
  }
  j["failed_replications"] = failed;
  j["successful_replications"] = ok;
  j["final_cum_regret_per_replication"] = finals;
  if (ok > 0)
    j["mean_final_cum_regret"] = final_regret_sum / static_cast<double>(ok);
  return j.dump(2) + "\n";
}

// Runs every replication of every policy, optionally writing traces,
// summaries and metadata under cfg.out_dir (one subdirectory per policy
// when several are configured).  Replications execute in parallel over
// derived seeds; outputs are independent of the thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& raw) {
  ExperimentResult result;
  result.config = resolve_experiment(raw);
  const ExperimentConfig& cfg = result.config;
  if (cfg.replay_path.empty())
    result.variation = scenario_variation(cfg.stream);

  const std::size_t n_policies = cfg.policies.size();
  result.policies.resize(n_policies);
  for (std::size_t p = 0; p < n_policies; ++p) {
    result.policies[p].label = cfg.policies[p].resolved_label();
    result.policies[p].replications.resize(cfg.replications);
  }

  ReplayStream replay_data;
  const bool has_replay = !cfg.replay_path.empty();
  if (has_replay) replay_data = load_replay_csv(cfg.replay_path);

  const std::size_t n_threads =
      std::min(detail::resolve_threads(cfg), cfg.replications);
  std::atomic<std::size_t> next_rep{0};
  std::vector<std::string> errors(cfg.replications);
  auto worker = [&]() {
    for (;;) {
      const std::size_t rep = next_rep.fetch_add(1);
      if (rep >= cfg.replications) return;
      try {
        auto reps =
            run_replication(cfg, rep, has_replay ? &replay_data : nullptr);
        for (std::size_t p = 0; p < n_policies; ++p)
          result.policies[p].replications[rep] = std::move(reps[p]);
      } catch (const std::exception& e) {
        errors[rep] = e.what();
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
    if (errors[rep].empty()) continue;
    for (auto& pol : result.policies) {
      pol.replications[rep].failed = true;
      pol.replications[rep].failure = errors[rep];
    }
  }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    for (std::size_t p = 0; p < n_policies; ++p) {
      const fs::path dir = n_policies == 1
                               ? fs::path(cfg.out_dir)
                               : fs::path(cfg.out_dir) /
                                     result.policies[p].label;
      fs::create_directories(dir);
      for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
        detail::write_trace_file(dir / ("trace_" + std::to_string(rep) +
                                        ".csv"),
                                 result.policies[p].replications[rep].trace);
      }
      detail::write_summary_file(dir / "summary.csv", cfg, result.policies[p]);
      std::ofstream meta(dir / "meta.json", std::ios::binary);
      meta << experiment_meta_json(cfg, result, p);
    }
  }
  return result;
}

}  // namespace driftconform
