// ffcsim: command-line front end for insertion campaigns and the perception
// pipeline. Every subcommand exits 0 on success and 1 with a message on error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ffc/harness.hpp"
#include "ffc/matrix_io.hpp"
#include "ffc/perception.hpp"

namespace fs = std::filesystem;
using namespace ffc;

namespace {

void print_summary(const SummaryReport& s) {
  std::printf("%-10s trials=%d success=%d wrong_stop=%d capped=%d success_rate=%.4f failure_rate=%.4f", to_string(s.mode).c_str(),
              s.trials, s.stopped_success, s.stopped_failure, s.max_iters_reached, s.success_rate, s.failure_rate);
  if (s.mean_iterations_to_stop) std::printf(" mean_insertions=%.3f", *s.mean_iterations_to_stop);
  std::printf("\n");
}

struct RunFlags {
  std::string config;
  std::string preset;
  std::string mode;
  int trials = 0;
  std::uint64_t seed = 0;
  double gamma = 0;
  int max_iters = 0;
  std::string matrix;
  bool estimate_matrix = false;
  double alpha = -1;
  std::string model;
  std::string sensor;
  std::string sampling;
  int workers = -1;
  std::string out;
};

int cmd_run(const RunFlags& f, const CLI::App& app) {
  RunConfig cfg;
  if (f.preset == "paper100") cfg = paper100_preset();
  else if (!f.preset.empty()) throw ConfigError("unknown preset '" + f.preset + "' (known: paper100)");
  if (!f.config.empty()) cfg = run_config_from_json(read_json_file(f.config), cfg);

  auto given = [&](const char* name) { return app.count(name) > 0; };
  nlohmann::json overrides = nlohmann::json::object();
  if (given("--mode")) overrides["mode"] = f.mode;
  if (given("--trials")) overrides["trials"] = f.trials;
  if (given("--seed")) overrides["master_seed"] = f.seed;
  if (given("--gamma-target")) overrides["controller"]["gamma_target"] = f.gamma;
  if (given("--max-iters")) overrides["controller"]["max_iterations"] = f.max_iters;
  if (given("--matrix")) overrides["matrix"]["source"] = "file", overrides["matrix"]["path"] = f.matrix;
  if (f.estimate_matrix) overrides["matrix"]["source"] = "estimated";
  if (given("--alpha")) overrides["matrix"]["alpha"] = f.alpha;
  if (given("--model")) overrides["model_path"] = f.model;
  if (given("--sensor")) overrides["env"]["sensor"] = f.sensor;
  if (given("--offset-sampling")) overrides["offset_sampling"] = f.sampling;
  if (given("--workers")) overrides["workers"] = f.workers;
  if (given("--out")) overrides["out"] = f.out;
  cfg = run_config_from_json(overrides, cfg);

  const ExperimentResult result = run_experiment(cfg);
  for (const auto& arm : result.arms) print_summary(arm.summary);
  if (!cfg.out_dir.empty()) std::printf("wrote %s\n", cfg.out_dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reliability-controlled cable insertion: simulator, estimator and experiment harness"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run = app.add_subcommand("run", "run a seeded Monte-Carlo insertion campaign");
  run->add_option("--config", rf.config, "run config JSON (CLI flags override it)");
  run->add_option("--preset", rf.preset, "named preset: paper100");
  run->add_option("--mode", rf.mode, "memory|memoryless|both")->check(CLI::IsMember({"memory", "memoryless", "both"}));
  run->add_option("--trials", rf.trials);
  run->add_option("--seed", rf.seed, "master seed");
  run->add_option("--gamma-target", rf.gamma);
  run->add_option("--max-iters", rf.max_iters);
  run->add_option("--matrix", rf.matrix, "perception matrix JSON (default: built-in measured matrix)");
  run->add_flag("--estimate-matrix", rf.estimate_matrix, "estimate the filter matrix from the classifier");
  run->add_option("--alpha", rf.alpha, "smoothing for an estimated matrix");
  run->add_option("--model", rf.model, "classifier JSON for the trajectory sensor");
  run->add_option("--sensor", rf.sensor, "matrix|trajectory")->check(CLI::IsMember({"matrix", "trajectory"}));
  run->add_option("--offset-sampling", rf.sampling, "uniform|stratified")->check(CLI::IsMember({"uniform", "stratified"}));
  run->add_option("--workers", rf.workers, "worker threads (0 = all cores)");
  run->add_option("--out", rf.out, "output directory");

  std::string synth_out;
  std::uint64_t synth_seed = 1;
  double synth_step = 0.05, synth_test = 0.3;
  int synth_reps = 50;
  TrajectoryParams synth_params;
  int synth_n = 3;
  double synth_delta = 0.5;
  auto* synth = app.add_subcommand("synth", "generate a labelled trajectory dataset (train/test manifests)");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed);
  synth->add_option("--step", synth_step, "grid step in mm");
  synth->add_option("--reps", synth_reps, "trajectories per grid position");
  synth->add_option("--test-fraction", synth_test);
  synth->add_option("--noise", synth_params.noise_sigma);
  synth->add_option("--samples", synth_params.samples);
  synth->add_option("--n", synth_n);
  synth->add_option("--delta", synth_delta);

  std::string train_data, train_out;
  TrainConfig train_cfg;
  int train_n = 3;
  double train_delta = 0.5;
  auto* train = app.add_subcommand("train", "fit the trajectory classifier");
  train->add_option("--data", train_data, "training manifest")->required();
  train->add_option("--out", train_out, "model JSON")->required();
  train->add_option("--lr", train_cfg.learning_rate);
  train->add_option("--epochs", train_cfg.epochs);
  train->add_option("--l2", train_cfg.l2_penalty);
  train->add_option("--n", train_n);
  train->add_option("--delta", train_delta);

  std::string eval_model, eval_data, eval_out;
  double eval_alpha = 0.5;
  auto* eval = app.add_subcommand("eval-matrix", "classifier + held-out set -> perception matrix JSON");
  eval->add_option("--model", eval_model)->required();
  eval->add_option("--data", eval_data, "held-out manifest")->required();
  eval->add_option("--alpha", eval_alpha, "additive smoothing");
  eval->add_option("--out", eval_out, "matrix JSON (stdout if omitted)");

  std::string report_trials, report_out;
  auto* report = app.add_subcommand("report", "recompute metrics.csv and summary from trials.jsonl");
  report->add_option("--trials", report_trials, "trials.jsonl")->required();
  report->add_option("--out", report_out, "output directory (default: next to trials.jsonl)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(rf, *run);

    if (*synth) {
      const EnvConfig env = EnvConfig::defaults(StatusSpace(synth_n, synth_delta));
      Rng rng = derive_rng_stream(synth_seed, 0);
      const LabeledSet data = generate_dataset(env, synth_params, offset_grid(env.offset_halfspan_mm, synth_step), synth_reps, rng);
      Rng split_rng = derive_rng_stream(synth_seed, 1);
      auto [train_set, test_set] = stratified_split(data, synth_test, split_rng);
      fs::create_directories(synth_out);
      write_dataset(fs::path(synth_out) / "train.json", train_set);
      write_dataset(fs::path(synth_out) / "test.json", test_set);
      std::printf("wrote %zu train / %zu test samples to %s\n", train_set.size(), test_set.size(), synth_out.c_str());
      return 0;
    }

    if (*train) {
      const StatusSpace space(train_n, train_delta);
      const LabeledSet data = read_dataset(train_data, space);
      std::vector<double> history;
      const ClassifierModel model = train_classifier(data, space, train_cfg, &history);
      save_model(train_out, model);
      std::printf("final loss %.6f, training accuracy %.4f\n", history.back(), accuracy(model, data));
      return 0;
    }

    if (*eval) {
      const ClassifierModel model = load_model(eval_model);
      const LabeledSet data = read_dataset(eval_data, model.space);
      const PerceptionMatrixD m = estimate_confusion(model, data, eval_alpha);
      if (eval_out.empty()) std::cout << matrix_to_json(m).dump(2) << '\n';
      else save_matrix(eval_out, m);
      std::fprintf(stderr, "held-out accuracy %.4f\n", accuracy(model, data));
      return 0;
    }

    if (*report) {
      const auto logs = read_trials_jsonl(report_trials);
      if (logs.empty()) throw ConfigError(report_trials + ": no trials");
      const fs::path out = report_out.empty() ? fs::path(report_trials).parent_path() : fs::path(report_out);
      if (!out.empty()) fs::create_directories(out);
      const SummaryReport summary = summarize(logs, logs.front().mode);
      {
        std::ofstream csv(out / "metrics.csv");
        if (!csv) throw std::runtime_error("cannot write " + (out / "metrics.csv").string());
        write_metrics_csv(csv, compute_metrics(logs));
      }
      write_json_file(out / "report_summary.json", summary_to_json(summary));
      print_summary(summary);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
