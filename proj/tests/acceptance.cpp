// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ffc/harness.hpp"
#include "ffc/matrix_io.hpp"

using namespace ffc;
namespace fs = std::filesystem;

namespace {

const StatusSpace kSpace{3, 0.5};

constexpr double kOracleTol = 1e-12;
constexpr double kOracleSeconds = 1.0;
constexpr double kGammaTol = 1e-6;
constexpr double kGammaFirst = 0.981463;
constexpr double kGammaSecond = 0.999643;
constexpr int kTrials = 10000;
constexpr double kMaxWrongStopMatched = 0.003;
constexpr double kCampaignSeconds = 30.0;
constexpr double kBaselineFailureLo = 0.005;
constexpr double kBaselineFailureHi = 0.10;
constexpr double kMae0 = 1.71;
constexpr double kMae0Tol = 0.15;
constexpr double kGradTol = 1e-5;
constexpr double kGradStep = 1e-5;
constexpr double kMinHeldoutAccuracy = 0.90;
constexpr double kMaxWrongStopPipeline = 0.01;

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RunConfig campaign(ControllerMode mode) {
  RunConfig cfg;
  cfg.trials = kTrials;
  cfg.master_seed = 42;
  cfg.arms = mode == ControllerMode::memory ? ArmSelection::memory : ArmSelection::memoryless;
  cfg.controller.mode = mode;
  return cfg;
}

Verdict oracle_equivalence() {
  Rng rng(1001);
  double worst = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < 1000; ++k) {
    Vector<double> prior(7);
    Matrix<double> m(7, 7);
    for (int i = 0; i < 7; ++i) prior[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    prior[static_cast<int>(rng.uniform() * 7)] += 0.5;
    prior /= prior.sum();
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) m(i, j) = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
      m(i, i) += 0.1;
      m.row(i) /= m.row(i).sum();
    }
    const BeliefD b(kSpace, prior);
    const auto pm = validate_matrix<double>(m, kSpace);
    const int z = static_cast<int>(rng.uniform() * 7) - 3;

    std::vector<double> naive(7);
    double eta = 0;
    for (int i = 0; i < 7; ++i) {
      naive[i] = m(i, z + 3) * prior[i];
      eta += naive[i];
    }
    if (eta == 0) continue;
    const BeliefD post = measurement_update(b, PerceptSignal(z), pm);
    for (int i = 0; i < 7; ++i) worst = std::max(worst, std::abs(post.probs()[i] - naive[i] / eta));
  }
  const double secs = seconds_since(t0);
  return {worst <= kOracleTol && secs < kOracleSeconds, fmt("max |diff| = %.3g, %.3f s", worst, secs)};
}

class ScriptedSensor final : public Sensor {
 public:
  PerceptSignal sense(const EnvState&, Rng&) override { return PerceptSignal(0); }
};

Verdict two_confirmation_stop() {
  ScriptedSensor sensor;
  InsertionEnv env(EnvConfig::defaults(kSpace), 0.0, sensor);
  Rng rng(0);
  const TrialLog log = run_memory_controller(env, table2_matrix(), ControllerConfig{}, rng);
  const bool shape = log.records.size() == 2 && log.stop_iteration == 1;
  const double g0 = log.records.empty() ? 0 : log.records[0].reliability;
  const double g1 = log.records.size() < 2 ? 0 : log.records[1].reliability;
  const bool pass = shape && std::abs(g0 - kGammaFirst) <= kGammaTol && std::abs(g1 - kGammaSecond) <= kGammaTol;
  return {pass, fmt("gamma = %.6f, %.6f; stopped at iteration %d", g0, g1, log.stop_iteration.value_or(-1))};
}

Verdict matched_calibration(const ExperimentResult& memory, double secs) {
  const SummaryReport& s = memory.arms[0].summary;
  const ExperimentResult p100 = run_experiment(paper100_preset());
  const SummaryReport& p = p100.arm(ControllerMode::memory).summary;
  const bool pass = s.wrong_stop_rate <= kMaxWrongStopMatched && s.max_iters_reached == 0 && secs < kCampaignSeconds;
  return {pass, fmt("wrong-stop %.4f%%, capped %d, %.2f s; paper100 memory %d/%d success", 100 * s.wrong_stop_rate,
                    s.max_iters_reached, secs, p.stopped_success, p.trials)};
}

Verdict baseline_failure() {
  const ExperimentResult r = run_experiment(campaign(ControllerMode::memoryless));
  const SummaryReport& s = r.arms[0].summary;
  const bool pass = s.failure_rate >= kBaselineFailureLo && s.failure_rate <= kBaselineFailureHi;
  return {pass, fmt("failure %.3f%% (wrong stops %d, capped %d), required [%.1f%%, %.1f%%]", 100 * s.failure_rate,
                    s.stopped_failure, s.max_iters_reached, 100 * kBaselineFailureLo, 100 * kBaselineFailureHi)};
}

Verdict mae_decay(const ExperimentResult& memory) {
  const MetricsTable& m = memory.arms[0].metrics;
  if (m.size() < 4) return {false, "fewer than four iterations recorded"};
  bool decreasing = true;
  for (int i = 1; i <= 3; ++i) decreasing &= m[i].mae < m[i - 1].mae;
  const bool pass = std::abs(m[0].mae - kMae0) <= kMae0Tol && decreasing;
  // Context only: stopped trials keep their final error.
  std::vector<double> carried(4, 0.0);
  const auto& logs = memory.arms[0].logs;
  for (const auto& log : logs)
    for (std::size_t i = 0; i < carried.size(); ++i)
      carried[i] += std::abs(log.records[std::min(i, log.records.size() - 1)].true_after.value());
  for (double& c : carried) c /= static_cast<double>(logs.size());
  return {pass, fmt("active-trial MAE %.4f, %.4f, %.4f, %.4f (all-trial carry-forward %.4f, %.4f, %.4f, %.4f)",
                    m[0].mae, m[1].mae, m[2].mae, m[3].mae, carried[0], carried[1], carried[2], carried[3])};
}

Verdict memory_beats_perception(const ExperimentResult& memory) {
  const MetricsTable& m = memory.arms[0].metrics;
  int worst_iter = -1;
  double worst_gap = 1.0;
  for (std::size_t i = 1; i < m.size(); ++i) {
    const double gap = m[i].memory_acc - m[i].perception_acc;
    if (gap < worst_gap) {
      worst_gap = gap;
      worst_iter = static_cast<int>(i);
    }
  }
  return {worst_gap >= 0.0, fmt("smallest memory - perception gap %.4f at iteration %d of %zu", worst_gap, worst_iter,
                                m.size())};
}

Verdict gradient_check() {
  const EnvConfig env = EnvConfig::defaults(kSpace);
  Rng data_rng(77);
  const LabeledSet pool = generate_dataset(env, TrajectoryParams{}, offset_grid(env.offset_halfspan_mm, 0.05), 2, data_rng);
  const ClassifierModel stats = train_classifier(pool, kSpace, TrainConfig{.epochs = 1});
  const Eigen::MatrixXd all_x = standardized_features(stats, pool);

  Rng rng(4242);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ClassifierModel m = stats;
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < m.biases.size(); ++i) m.biases[i] = rng.normal();
    const int n = 8 + static_cast<int>(rng.uniform() * 57);
    Eigen::MatrixXd x(n, kFeatureCount);
    std::vector<int> labels;
    for (int r = 0; r < n; ++r) {
      const auto pick = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(pool.size()));
      x.row(r) = all_x.row(pick);
      labels.push_back(pool[pick].label);
    }
    const double l2 = 1e-3 * rng.uniform();
    const LossGradient g = loss_and_gradient(m, x, labels, l2);
    const auto probe = [&](double& param) {
      const double keep = param;
      param = keep + kGradStep;
      const double up = loss_and_gradient(m, x, labels, l2).loss;
      param = keep - kGradStep;
      const double down = loss_and_gradient(m, x, labels, l2).loss;
      param = keep;
      return (up - down) / (2 * kGradStep);
    };
    const auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); };
    for (Eigen::Index i = 0; i < m.weights.size(); ++i)
      worst = std::max(worst, rel(g.grad_weights.data()[i], probe(m.weights.data()[i])));
    for (Eigen::Index i = 0; i < m.biases.size(); ++i)
      worst = std::max(worst, rel(g.grad_biases[i], probe(m.biases[i])));
  }
  return {worst < kGradTol, fmt("worst relative error %.3g over 100 models", worst)};
}

Verdict pipeline() {
  RunConfig cfg = campaign(ControllerMode::memory);
  cfg.env.sensor_mode = SensorMode::trajectory_classified;
  cfg.matrix.kind = MatrixSource::Kind::estimated;
  const PipelineModel pm = default_pipeline_model(cfg.env, cfg.trajectory, cfg.master_seed);
  const ExperimentResult r = run_experiment(cfg);
  const SummaryReport& s = r.arms[0].summary;
  const bool pass = pm.heldout_accuracy >= kMinHeldoutAccuracy && s.wrong_stop_rate <= kMaxWrongStopPipeline;
  return {pass, fmt("held-out accuracy %.2f%%, wrong-stop %.3f%%, capped %d", 100 * pm.heldout_accuracy,
                    100 * s.wrong_stop_rate, s.max_iters_reached)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  std::vector<std::string> texts;
  for (int workers : {1, 7}) {
    RunConfig cfg = campaign(ControllerMode::memory);
    cfg.workers = workers;
    cfg.out_dir = fs::temp_directory_path() / ("ffc_acceptance_w" + std::to_string(workers));
    fs::remove_all(cfg.out_dir);
    run_experiment(cfg);
    texts.push_back(slurp(cfg.out_dir / "trials.jsonl"));
    fs::remove_all(cfg.out_dir);
  }
  const bool pass = !texts[0].empty() && texts[0] == texts[1];
  return {pass, fmt("workers 1 vs 7: %zu vs %zu bytes, %s", texts[0].size(), texts[1].size(),
                    texts[0] == texts[1] ? "identical" : "different")};
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult memory = run_experiment(campaign(ControllerMode::memory));
  const double memory_secs = seconds_since(t0);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"1 measurement update oracle", oracle_equivalence},
      {"2 two-confirmation stop", two_confirmation_stop},
      {"3 matched-model calibration", [&] { return matched_calibration(memory, memory_secs); }},
      {"4 memoryless baseline failures", baseline_failure},
      {"5 MAE decay", [&] { return mae_decay(memory); }},
      {"6 memory vs perception accuracy", [&] { return memory_beats_perception(memory); }},
      {"7 gradient check", gradient_check},
      {"8 synthetic pipeline", pipeline},
      {"9 determinism across workers", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v{false, ""};
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("[%s] %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
