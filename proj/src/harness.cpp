#include "ffc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "ffc/matrix_io.hpp"

namespace ffc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

void RunConfig::validate() const {
  if (trials < 1) throw ConfigError("run: trials must be >= 1");
  if (workers < 0) throw ConfigError("run: workers must be >= 0");
  controller.validate();
  env.validate();
  trajectory.validate();
  if (matrix.kind == MatrixSource::Kind::file && matrix.path.empty())
    throw ConfigError("run: matrix source 'file' needs a path");
  if (!(matrix.alpha >= 0)) throw ConfigError("run: matrix alpha must be >= 0");
  if (prior && static_cast<int>(prior->size()) != env.space.size())
    throw ConfigError("run: prior must have 2n+1 entries");
}

RunConfig paper100_preset() {
  RunConfig cfg;
  cfg.trials = 100;
  cfg.arms = ArmSelection::both;
  return cfg;
}

namespace {

std::string arms_name(ArmSelection a) {
  switch (a) {
    case ArmSelection::memory: return "memory";
    case ArmSelection::memoryless: return "memoryless";
    case ArmSelection::both: return "both";
  }
  return "?";
}

ArmSelection parse_arms(const std::string& s) {
  if (s == "memory") return ArmSelection::memory;
  if (s == "memoryless") return ArmSelection::memoryless;
  if (s == "both") return ArmSelection::both;
  throw ConfigError("unknown mode '" + s + "' (expected memory|memoryless|both)");
}

std::string sensor_name(SensorMode m) { return m == SensorMode::matrix_sampled ? "matrix" : "trajectory"; }

SensorMode parse_sensor(const std::string& s) {
  if (s == "matrix") return SensorMode::matrix_sampled;
  if (s == "trajectory") return SensorMode::trajectory_classified;
  throw ConfigError("unknown sensor '" + s + "' (expected matrix|trajectory)");
}

std::string sampling_name(OffsetSampling m) { return m == OffsetSampling::uniform ? "uniform" : "stratified"; }

OffsetSampling parse_sampling(const std::string& s) {
  if (s == "uniform") return OffsetSampling::uniform;
  if (s == "stratified") return OffsetSampling::stratified;
  throw ConfigError("unknown offset sampling '" + s + "' (expected uniform|stratified)");
}

std::string source_name(MatrixSource::Kind k) {
  switch (k) {
    case MatrixSource::Kind::table2: return "table2";
    case MatrixSource::Kind::file: return "file";
    case MatrixSource::Kind::estimated: return "estimated";
  }
  return "?";
}

MatrixSource::Kind parse_source(const std::string& s) {
  if (s == "table2") return MatrixSource::Kind::table2;
  if (s == "file") return MatrixSource::Kind::file;
  if (s == "estimated") return MatrixSource::Kind::estimated;
  throw ConfigError("unknown matrix source '" + s + "' (expected table2|file|estimated)");
}

json trajectory_to_json(const TrajectoryParams& p) {
  return {{"samples", p.samples},     {"amp_x", p.amp_x},         {"amp_y_scale", p.amp_y_scale},
          {"y_peak_mm", p.y_peak_mm}, {"z_slope", p.z_slope}, {"noise_sigma", p.noise_sigma}};
}

TrajectoryParams trajectory_from_json(const json& j, TrajectoryParams p) {
  p.samples = j.value("samples", p.samples);
  p.amp_x = j.value("amp_x", p.amp_x);
  p.amp_y_scale = j.value("amp_y_scale", p.amp_y_scale);
  p.y_peak_mm = j.value("y_peak_mm", p.y_peak_mm);
  p.z_slope = j.value("z_slope", p.z_slope);
  p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
  return p;
}

}  // namespace

json run_config_to_json(const RunConfig& cfg) {
  json j = {
      {"trials", cfg.trials},
      {"master_seed", cfg.master_seed},
      {"mode", arms_name(cfg.arms)},
      {"controller",
       {{"gamma_target", cfg.controller.gamma_target},
        {"max_iterations", cfg.controller.max_iterations},
        {"on_impossible", to_string(cfg.controller.on_impossible)}}},
      {"env",
       {{"n", cfg.env.space.n()},
        {"delta_mm", cfg.env.space.delta_mm()},
        {"offset_halfspan_mm", cfg.env.offset_halfspan_mm},
        {"sensor", sensor_name(cfg.env.sensor_mode)}}},
      {"matrix",
       {{"source", source_name(cfg.matrix.kind)},
        {"path", cfg.matrix.path.string()},
        {"alpha", cfg.matrix.alpha},
        {"heldout_step_mm", cfg.matrix.heldout_step_mm},
        {"heldout_reps", cfg.matrix.heldout_reps},
        {"heldout_seed", cfg.matrix.heldout_seed}}},
      {"model_path", cfg.model_path.string()},
      {"trajectory", trajectory_to_json(cfg.trajectory)},
      {"offset_sampling", sampling_name(cfg.offset_sampling)},
      {"prior", cfg.prior ? json(*cfg.prior) : json(nullptr)},
      {"workers", cfg.workers},
      {"out", cfg.out_dir.string()},
  };
  return j;
}

RunConfig run_config_from_json(const json& j, RunConfig cfg) {
  try {
    cfg.trials = j.value("trials", cfg.trials);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    if (j.contains("mode")) cfg.arms = parse_arms(j.at("mode").get<std::string>());
    if (j.contains("controller")) {
      const json& c = j.at("controller");
      cfg.controller.gamma_target = c.value("gamma_target", cfg.controller.gamma_target);
      cfg.controller.max_iterations = c.value("max_iterations", cfg.controller.max_iterations);
      if (c.contains("on_impossible"))
        cfg.controller.on_impossible = parse_on_impossible(c.at("on_impossible").get<std::string>());
    }
    if (j.contains("env")) {
      const json& e = j.at("env");
      const StatusSpace space(e.value("n", cfg.env.space.n()), e.value("delta_mm", cfg.env.space.delta_mm()));
      const bool space_changed = !(space == cfg.env.space);
      const SensorMode sensor = e.contains("sensor") ? parse_sensor(e.at("sensor").get<std::string>()) : cfg.env.sensor_mode;
      EnvConfig env = space_changed ? EnvConfig::defaults(space, sensor) : cfg.env;
      env.sensor_mode = sensor;
      env.offset_halfspan_mm = e.value("offset_halfspan_mm", env.offset_halfspan_mm);
      cfg.env = env;
    }
    if (j.contains("matrix")) {
      const json& m = j.at("matrix");
      if (m.contains("source")) cfg.matrix.kind = parse_source(m.at("source").get<std::string>());
      if (m.contains("path")) cfg.matrix.path = m.at("path").get<std::string>();
      cfg.matrix.alpha = m.value("alpha", cfg.matrix.alpha);
      cfg.matrix.heldout_step_mm = m.value("heldout_step_mm", cfg.matrix.heldout_step_mm);
      cfg.matrix.heldout_reps = m.value("heldout_reps", cfg.matrix.heldout_reps);
      cfg.matrix.heldout_seed = m.value("heldout_seed", cfg.matrix.heldout_seed);
    }
    if (j.contains("model_path")) cfg.model_path = j.at("model_path").get<std::string>();
    if (j.contains("trajectory")) cfg.trajectory = trajectory_from_json(j.at("trajectory"), cfg.trajectory);
    if (j.contains("offset_sampling")) cfg.offset_sampling = parse_sampling(j.at("offset_sampling").get<std::string>());
    if (j.contains("prior")) {
      if (j.at("prior").is_null()) cfg.prior.reset();
      else cfg.prior = j.at("prior").get<std::vector<double>>();
    }
    cfg.workers = j.value("workers", cfg.workers);
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// metrics

MetricsTable compute_metrics(const std::vector<TrialLog>& logs) {
  if (logs.empty()) throw std::invalid_argument("compute_metrics: no trial logs");
  std::size_t horizon = 0;
  for (const auto& log : logs) horizon = std::max(horizon, log.records.size());

  MetricsTable table;
  int cumulative = 0;
  const double total = static_cast<double>(logs.size());
  for (std::size_t i = 0; i < horizon; ++i) {
    MetricsRow row;
    row.iteration = static_cast<int>(i);
    int percept_hits = 0, memory_hits = 0, n_correct = 0, stop_success = 0;
    double abs_revision = 0, rel_correct = 0, rel_incorrect = 0, rel_all = 0, abs_status = 0;
    for (const auto& log : logs) {
      if (log.records.size() <= i) continue;
      const IterationRecord& r = log.records[i];
      const int truth = r.true_after.value();
      ++row.active;
      if (r.revised) {
        ++row.revisions;
        abs_revision += std::abs(r.estimate.value() - r.percept.value());
      }
      percept_hits += r.percept.value() == truth;
      const bool correct = r.estimate.value() == truth;
      memory_hits += correct;
      n_correct += correct;
      (correct ? rel_correct : rel_incorrect) += r.reliability;
      rel_all += r.reliability;
      abs_status += std::abs(truth);
      if (log.stop_iteration && static_cast<std::size_t>(*log.stop_iteration) == i) {
        ++row.stopped;
        if (log.outcome == Outcome::stopped_success) {
          ++stop_success;
          ++cumulative;
        }
      }
    }
    if (row.active == 0) continue;
    const double active = row.active;
    if (row.revisions > 0) row.mean_abs_revision = abs_revision / row.revisions;
    row.perception_acc = percept_hits / active;
    row.memory_acc = memory_hits / active;
    if (n_correct > 0) row.rel_correct = rel_correct / n_correct;
    if (row.active - n_correct > 0) row.rel_incorrect = rel_incorrect / (row.active - n_correct);
    row.rel_all = rel_all / active;
    if (row.stopped > 0) row.stop_success_rate = static_cast<double>(stop_success) / row.stopped;
    row.mae = abs_status / active;
    row.cum_success = cumulative / total;
    table.push_back(row);
  }
  return table;
}

SummaryReport summarize(const std::vector<TrialLog>& logs, ControllerMode mode) {
  SummaryReport s;
  s.mode = mode;
  s.trials = static_cast<int>(logs.size());
  double stop_iters = 0;
  int stops = 0;
  for (const auto& log : logs) {
    switch (log.outcome) {
      case Outcome::stopped_success: ++s.stopped_success; break;
      case Outcome::stopped_failure: ++s.stopped_failure; break;
      case Outcome::max_iters_reached: ++s.max_iters_reached; break;
    }
    if (log.stop_iteration) {
      stop_iters += *log.stop_iteration + 1;
      ++stops;
    }
    for (const auto& r : log.records) s.belief_resets += r.belief_reset;
  }
  if (s.trials > 0) {
    s.success_rate = static_cast<double>(s.stopped_success) / s.trials;
    s.wrong_stop_rate = static_cast<double>(s.stopped_failure) / s.trials;
    s.failure_rate = static_cast<double>(s.stopped_failure + s.max_iters_reached) / s.trials;
  }
  if (stops > 0) s.mean_iterations_to_stop = stop_iters / stops;
  return s;
}

const ArmResult& ExperimentResult::arm(ControllerMode mode) const {
  for (const auto& a : arms)
    if (a.summary.mode == mode) return a;
  throw std::out_of_range("experiment has no " + to_string(mode) + " arm");
}

// ---------------------------------------------------------------------------
// campaign

std::vector<TrialLog> run_trials(const RunConfig& cfg, ControllerMode mode, const PerceptionMatrixD& filter_matrix,
                                 const SensorFactory& make_sensor) {
  cfg.validate();
  std::optional<BeliefD> prior;
  if (cfg.prior) {
    Vector<double> p = Eigen::Map<const Vector<double>>(cfg.prior->data(), static_cast<Eigen::Index>(cfg.prior->size()));
    if (!(p.sum() > 0)) throw ConfigError("run: prior must have positive mass");
    p /= p.sum();
    prior = BeliefD(cfg.env.space, std::move(p));
  }

  const auto n = static_cast<std::size_t>(cfg.trials);
  std::vector<TrialLog> logs(n);
  unsigned workers = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      std::unique_ptr<Sensor> sensor = make_sensor();
      ControllerConfig ctl = cfg.controller;
      ctl.mode = mode;
      for (std::size_t i = next++; i < n; i = next++) {
        Rng rng = derive_rng_stream(cfg.master_seed, i);
        const double offset = sample_initial_offset(cfg.env, cfg.offset_sampling, i, rng);
        InsertionEnv env(cfg.env, offset, *sensor);
        TrialLog log = mode == ControllerMode::memory ? run_memory_controller(env, filter_matrix, ctl, rng, prior)
                                                      : run_memoryless_controller(env, ctl, rng);
        log.mode = mode;
        log.trial_id = i;
        log.master_seed = cfg.master_seed;
        logs[i] = std::move(log);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return logs;
}

PipelineModel default_pipeline_model(const EnvConfig& env, const TrajectoryParams& params, std::uint64_t seed,
                                     const TrainConfig& train) {
  Rng data_rng = derive_rng_stream(seed, 0);
  const LabeledSet data = generate_dataset(env, params, offset_grid(env.offset_halfspan_mm, 0.05), 50, data_rng);
  Rng split_rng = derive_rng_stream(seed, 1);
  auto [train_set, test_set] = stratified_split(data, 0.3, split_rng);
  PipelineModel out{train_classifier(train_set, env.space, train), std::move(test_set), 0.0};
  out.heldout_accuracy = accuracy(out.model, out.heldout);
  return out;
}

namespace {

struct ResolvedPerception {
  PerceptionMatrixD matrix;
  std::optional<ClassifierModel> model;
};

ResolvedPerception resolve_perception(const RunConfig& cfg) {
  std::optional<ClassifierModel> model;
  const bool needs_model = cfg.env.sensor_mode == SensorMode::trajectory_classified ||
                           cfg.matrix.kind == MatrixSource::Kind::estimated;
  if (needs_model) {
    if (!cfg.model_path.empty()) model = load_model(cfg.model_path);
    else model = default_pipeline_model(cfg.env, cfg.trajectory, cfg.master_seed).model;
    if (!(model->space == cfg.env.space)) throw ConfigError("run: classifier status space differs from env");
  }

  auto matrix = [&]() -> PerceptionMatrixD {
    switch (cfg.matrix.kind) {
      case MatrixSource::Kind::file: return load_matrix(cfg.matrix.path);
      case MatrixSource::Kind::estimated: {
        Rng rng = derive_rng_stream(cfg.matrix.heldout_seed, 0);
        const LabeledSet heldout = generate_dataset(cfg.env, cfg.trajectory,
                                                    offset_grid(cfg.env.offset_halfspan_mm, cfg.matrix.heldout_step_mm),
                                                    cfg.matrix.heldout_reps, rng);
        return estimate_confusion(*model, heldout, cfg.matrix.alpha);
      }
      case MatrixSource::Kind::table2: break;
    }
    return table2_matrix();
  }();
  if (!(matrix.space() == cfg.env.space))
    throw ConfigError("run: perception matrix status space (n=" + std::to_string(matrix.space().n()) +
                      ") differs from env (n=" + std::to_string(cfg.env.space.n()) + ")");
  return {std::move(matrix), std::move(model)};
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& cfg) {
  cfg.validate();
  const ResolvedPerception perception = resolve_perception(cfg);

  SensorFactory make_sensor;
  if (cfg.env.sensor_mode == SensorMode::trajectory_classified) {
    make_sensor = [&] { return std::make_unique<TrajectorySensor>(*perception.model, cfg.trajectory); };
  } else {
    make_sensor = [&] { return std::make_unique<MatrixSensor>(perception.matrix); };
  }

  std::vector<ControllerMode> modes;
  if (cfg.arms != ArmSelection::memoryless) modes.push_back(ControllerMode::memory);
  if (cfg.arms != ArmSelection::memory) modes.push_back(ControllerMode::memoryless);

  ExperimentResult result;
  for (ControllerMode mode : modes) {
    ArmResult arm;
    arm.logs = run_trials(cfg, mode, perception.matrix, make_sensor);
    arm.metrics = compute_metrics(arm.logs);
    arm.summary = summarize(arm.logs, mode);
    result.arms.push_back(std::move(arm));
  }
  if (!cfg.out_dir.empty()) write_outputs(cfg.out_dir, cfg, result);
  return result;
}

// ---------------------------------------------------------------------------
// serialisation

json summary_to_json(const SummaryReport& s) {
  return {{"mode", to_string(s.mode)},
          {"trials", s.trials},
          {"stopped_success", s.stopped_success},
          {"stopped_failure", s.stopped_failure},
          {"max_iters_reached", s.max_iters_reached},
          {"belief_resets", s.belief_resets},
          {"success_rate", s.success_rate},
          {"wrong_stop_rate", s.wrong_stop_rate},
          {"failure_rate", s.failure_rate},
          {"mean_iterations_to_stop", s.mean_iterations_to_stop ? json(*s.mean_iterations_to_stop) : json(nullptr)}};
}

json trial_to_json(const TrialLog& log) {
  json records = json::array();
  for (const auto& r : log.records) {
    const auto& p = r.belief_after.probs();
    records.push_back({{"i", r.index},
                       {"u", r.action.value()},
                       {"s_before", r.true_before.value()},
                       {"s_after", r.true_after.value()},
                       {"z", r.percept.value()},
                       {"s_hat", r.estimate.value()},
                       {"gamma", r.reliability},
                       {"revised", r.revised},
                       {"reset", r.belief_reset},
                       {"belief", std::vector<double>(p.data(), p.data() + p.size())}});
  }
  const StatusSpace& space = log.records.empty() ? StatusSpace{} : log.records.front().belief_after.space();
  return {{"trial_id", log.trial_id},
          {"master_seed", log.master_seed},
          {"mode", to_string(log.mode)},
          {"n", space.n()},
          {"delta_mm", space.delta_mm()},
          {"initial_offset_mm", log.initial_offset_mm},
          {"outcome", to_string(log.outcome)},
          {"stop_iteration", log.stop_iteration ? json(*log.stop_iteration) : json(nullptr)},
          {"records", records}};
}

TrialLog trial_from_json(const json& j) {
  try {
    TrialLog log;
    log.trial_id = j.at("trial_id").get<std::uint64_t>();
    log.master_seed = j.at("master_seed").get<std::uint64_t>();
    log.mode = parse_controller_mode(j.at("mode").get<std::string>());
    log.initial_offset_mm = j.at("initial_offset_mm").get<double>();
    log.outcome = parse_outcome(j.at("outcome").get<std::string>());
    if (!j.at("stop_iteration").is_null()) log.stop_iteration = j.at("stop_iteration").get<int>();
    const StatusSpace space(j.value("n", 3), j.value("delta_mm", 0.5));
    for (const auto& r : j.at("records")) {
      IterationRecord rec;
      rec.index = r.at("i").get<int>();
      rec.action = ActionCmd(r.at("u").get<int>());
      rec.true_before = Status(r.at("s_before").get<int>());
      rec.true_after = Status(r.at("s_after").get<int>());
      rec.percept = PerceptSignal(r.at("z").get<int>());
      rec.estimate = Status(r.at("s_hat").get<int>());
      rec.reliability = r.at("gamma").get<double>();
      rec.revised = r.at("revised").get<bool>();
      rec.belief_reset = r.value("reset", false);
      const auto probs = r.at("belief").get<std::vector<double>>();
      rec.belief_after = BeliefD(space, Eigen::Map<const Vector<double>>(probs.data(), static_cast<Eigen::Index>(probs.size())));
      log.records.push_back(std::move(rec));
    }
    return log;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("trial log: ") + e.what());
  }
}

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace

void write_metrics_csv(std::ostream& out, const MetricsTable& metrics) {
  out << kMetricsHeader << '\n';
  for (const auto& r : metrics) {
    out << r.iteration << ',' << r.revisions << ',' << num(r.mean_abs_revision) << ',' << num(r.perception_acc) << ','
        << num(r.memory_acc) << ',' << num(r.rel_correct) << ',' << num(r.rel_incorrect) << ',' << num(r.rel_all)
        << ',' << r.stopped << ',' << num(r.stop_success_rate) << ',' << num(r.mae) << ',' << num(r.cum_success)
        << '\n';
  }
}

void write_trials_jsonl(std::ostream& out, const std::vector<TrialLog>& logs) {
  for (const auto& log : logs) out << trial_to_json(log).dump() << '\n';
}

std::vector<TrialLog> read_trials_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<TrialLog> logs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      logs.push_back(trial_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return logs;
}

void write_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json arms = json::object();
  const bool nested = result.arms.size() > 1;
  for (const auto& arm : result.arms) {
    arms[to_string(arm.summary.mode)] = summary_to_json(arm.summary);
    const fs::path arm_dir = nested ? dir / to_string(arm.summary.mode) : dir;
    fs::create_directories(arm_dir);
    {
      std::ofstream out(arm_dir / "metrics.csv");
      if (!out) throw std::runtime_error("cannot write " + (arm_dir / "metrics.csv").string());
      write_metrics_csv(out, arm.metrics);
    }
    {
      std::ofstream out(arm_dir / "trials.jsonl");
      if (!out) throw std::runtime_error("cannot write " + (arm_dir / "trials.jsonl").string());
      write_trials_jsonl(out, arm.logs);
    }
  }
  write_json_file(dir / "summary.json", {{"master_seed", cfg.master_seed}, {"arms", arms}, {"config", run_config_to_json(cfg)}});
  write_json_file(dir / "run_config.json", run_config_to_json(cfg));
}

}  // namespace ffc
