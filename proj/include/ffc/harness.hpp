#pragma once

// Seeded Monte-Carlo insertion campaigns, the per-iteration metric suite and
// the on-disk artifacts (summary.json, metrics.csv, trials.jsonl,
// run_config.json).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffc/controller.hpp"
#include "ffc/perception.hpp"
#include "ffc/sim_env.hpp"

namespace ffc {

enum class ArmSelection { memory, memoryless, both };

struct MatrixSource {
  enum class Kind { table2, file, estimated } kind = Kind::table2;
  std::filesystem::path path;  // Kind::file
  // Kind::estimated: held-out set drawn on a grid, classified, smoothed.
  double alpha = 0.5;
  double heldout_step_mm = 0.05;
  int heldout_reps = 20;
  std::uint64_t heldout_seed = 7;
};

struct RunConfig {
  int trials = 10000;
  std::uint64_t master_seed = 42;
  ArmSelection arms = ArmSelection::memory;
  ControllerConfig controller;
  EnvConfig env = EnvConfig::defaults(StatusSpace{});
  MatrixSource matrix;
  // Trajectory sensor: classifier file; empty means train the default
  // pipeline in-process (see default_pipeline_model).
  std::filesystem::path model_path;
  TrajectoryParams trajectory;
  OffsetSampling offset_sampling = OffsetSampling::uniform;
  std::optional<std::vector<double>> prior;  // ascending s; normalised on load
  int workers = 0;                           // 0 = hardware concurrency
  std::filesystem::path out_dir;

  void validate() const;
};

// 100 trials, both arms, otherwise defaults.
RunConfig paper100_preset();

nlohmann::json run_config_to_json(const RunConfig& cfg);
// Fields absent from `j` keep the values already in `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

struct MetricsRow {
  int iteration = 0;
  int active = 0;
  int revisions = 0;
  std::optional<double> mean_abs_revision;
  double perception_acc = 0.0;
  double memory_acc = 0.0;
  std::optional<double> rel_correct;
  std::optional<double> rel_incorrect;
  double rel_all = 0.0;
  int stopped = 0;
  std::optional<double> stop_success_rate;
  double mae = 0.0;
  double cum_success = 0.0;
};
using MetricsTable = std::vector<MetricsRow>;

struct SummaryReport {
  ControllerMode mode = ControllerMode::memory;
  int trials = 0;
  int stopped_success = 0;
  int stopped_failure = 0;
  int max_iters_reached = 0;
  int belief_resets = 0;
  double success_rate = 0.0;     // stopped_success / trials
  double wrong_stop_rate = 0.0;  // stopped_failure / trials
  double failure_rate = 0.0;     // (stopped_failure + max_iters_reached) / trials
  std::optional<double> mean_iterations_to_stop;  // insertions, i.e. stop_iteration + 1
};

// Iteration i aggregates the trials that have a record at i. Rows with no
// active trial are omitted.
MetricsTable compute_metrics(const std::vector<TrialLog>& logs);
SummaryReport summarize(const std::vector<TrialLog>& logs, ControllerMode mode);

struct ArmResult {
  SummaryReport summary;
  MetricsTable metrics;
  std::vector<TrialLog> logs;
};

struct ExperimentResult {
  std::vector<ArmResult> arms;
  const ArmResult& arm(ControllerMode mode) const;
};

using SensorFactory = std::function<std::unique_ptr<Sensor>()>;

// Runs trials [0, cfg.trials) of one arm. Trial i draws its initial offset and
// every later variate from derive_rng_stream(master_seed, i); results come
// back ordered by trial index whatever the worker count.
std::vector<TrialLog> run_trials(const RunConfig& cfg, ControllerMode mode, const PerceptionMatrixD& filter_matrix,
                                 const SensorFactory& make_sensor);

// Classifier trained on the default synthetic dataset: 0.05 mm grid over the
// environment range, 50 reps, 70/30 stratified split, all seeded from `seed`.
struct PipelineModel {
  ClassifierModel model;
  LabeledSet heldout;
  double heldout_accuracy = 0.0;
};
PipelineModel default_pipeline_model(const EnvConfig& env, const TrajectoryParams& params, std::uint64_t seed,
                                     const TrainConfig& train = {});

// Resolves the matrix and sensor, runs the selected arms and, when
// cfg.out_dir is set, writes every artifact there.
ExperimentResult run_experiment(const RunConfig& cfg);

nlohmann::json summary_to_json(const SummaryReport& s);
nlohmann::json trial_to_json(const TrialLog& log);
TrialLog trial_from_json(const nlohmann::json& j);

void write_metrics_csv(std::ostream& out, const MetricsTable& metrics);
void write_trials_jsonl(std::ostream& out, const std::vector<TrialLog>& logs);
std::vector<TrialLog> read_trials_jsonl(const std::filesystem::path& path);

inline constexpr const char* kMetricsHeader =
    "iteration,revisions,mean_abs_revision,perception_acc,memory_acc,rel_correct,rel_incorrect,rel_all,stopped,"
    "stop_success_rate,mae,cum_success";

// summary.json, metrics.csv, trials.jsonl and run_config.json. With both arms
// each arm's metrics.csv / trials.jsonl go under <dir>/<mode>/.
void write_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const ExperimentResult& result);

}  // namespace ffc
