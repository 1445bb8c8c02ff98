#include "ffc/perception.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "ffc/matrix_io.hpp"

namespace ffc {

using nlohmann::json;

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = {
      "final_x", "x_peak_drop", "mean_y", "final_y", "slope_y", "final_z", "mean_z"};
  return names;
}

FeatureVector extract_features(const Trajectory& traj) {
  const Eigen::Index T = traj.rows();
  if (T < 2) throw DegenerateTrajectory("trajectory needs at least 2 samples, got " + std::to_string(T));
  const auto x = traj.col(0);
  const auto y = traj.col(1);
  const auto z = traj.col(2);

  // Least-squares slope of y against t = 1..T.
  const Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(T, 1.0, static_cast<double>(T));
  const Eigen::ArrayXd tc = t - t.mean();
  const double slope = (tc * (y.array() - y.mean())).sum() / tc.square().sum();

  FeatureVector f;
  f << x(T - 1), x.maxCoeff() - x(T - 1), y.mean(), y(T - 1), slope, z(T - 1), z.mean();
  return f;
}

std::vector<double> offset_grid(double halfspan_mm, double step_mm) {
  if (!(step_mm > 0) || !(halfspan_mm >= 0)) throw ConfigError("offset grid: need step > 0 and halfspan >= 0");
  const auto intervals = static_cast<long>(std::llround(2.0 * halfspan_mm / step_mm));
  std::vector<double> out;
  out.reserve(intervals + 1);
  // Built outward from the centre and snapped to 1e-9 mm so the grid is
  // exactly sign-symmetric and lands on region boundaries.
  for (long i = 0; i <= intervals; ++i) {
    const double v = std::round((static_cast<double>(i) - 0.5 * static_cast<double>(intervals)) * step_mm * 1e9) / 1e9;
    out.push_back(std::clamp(v, -halfspan_mm, halfspan_mm));
  }
  return out;
}

LabeledSet generate_dataset(const EnvConfig& env, const TrajectoryParams& params, const std::vector<double>& positions,
                            int reps, Rng& rng) {
  if (reps < 0) throw ConfigError("dataset: reps must be >= 0");
  LabeledSet out;
  out.reserve(positions.size() * static_cast<std::size_t>(reps));
  for (double pos : positions) {
    const EnvState state = init_env(env, pos);
    const int label = status_of(state, env.space).value();
    for (int r = 0; r < reps; ++r) out.push_back({synth_trajectory(state, env.space, params, rng), label, pos});
  }
  return out;
}

std::pair<LabeledSet, LabeledSet> stratified_split(const LabeledSet& data, double test_fraction, Rng& rng) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) throw ConfigError("split: test_fraction must be in [0,1]");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data[i].label].push_back(i);

  std::vector<bool> is_test(data.size(), false);
  for (auto& [label, idx] : by_label) {
    // Fisher-Yates with the project RNG so the split is stable across platforms.
    for (std::size_t i = idx.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
    }
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < n_test; ++k) is_test[idx[k]] = true;
  }
  std::pair<LabeledSet, LabeledSet> out;
  for (std::size_t i = 0; i < data.size(); ++i) (is_test[i] ? out.second : out.first).push_back(data[i]);
  return out;
}

ClassifierModel ClassifierModel::zeros(const StatusSpace& space) {
  const int k = space.size();
  return {space,
          Eigen::MatrixXd::Zero(k, kFeatureCount),
          Eigen::VectorXd::Zero(k),
          Eigen::VectorXd::Zero(kFeatureCount),
          Eigen::VectorXd::Ones(kFeatureCount),
          Eigen::VectorXd::Ones(kFeatureCount)};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(l2_penalty >= 0)) throw ConfigError("train: l2_penalty must be >= 0");
}

Eigen::MatrixXd standardized_features(const ClassifierModel& model, const LabeledSet& data) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), kFeatureCount);
  for (std::size_t i = 0; i < data.size(); ++i) X.row(i) = extract_features(data[i].trajectory).transpose();
  X.rowwise() -= model.feature_means.transpose();
  X.array().rowwise() /= model.feature_stds.transpose().array();
  return X;
}

namespace {

Eigen::MatrixXd softmax_rows(const ClassifierModel& model, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd logits = X * model.weights.transpose();
  logits.rowwise() += model.biases.transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  Eigen::MatrixXd p = logits.array().exp().matrix();
  const Eigen::VectorXd norm = p.rowwise().sum();
  p.array().colwise() /= norm.array();
  return p;
}

std::vector<int> labels_of(const LabeledSet& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(s.label);
  return out;
}

}  // namespace

LossGradient loss_and_gradient(const ClassifierModel& model, const Eigen::MatrixXd& X, const std::vector<int>& labels,
                               double l2_penalty) {
  const auto N = X.rows();
  if (N == 0 || static_cast<std::size_t>(N) != labels.size())
    throw std::invalid_argument("loss_and_gradient: empty batch or label count mismatch");
  const int K = model.num_classes();

  // Log-sum-exp form keeps saturated logits finite.
  Eigen::MatrixXd logits = X * model.weights.transpose();
  logits.rowwise() += model.biases.transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.colwise() - row_max;
  Eigen::MatrixXd p = shifted.array().exp().matrix();
  const Eigen::VectorXd norm = p.rowwise().sum();
  p.array().colwise() /= norm.array();

  double ce = 0.0;
  Eigen::MatrixXd residual = p;  // p - onehot
  for (Eigen::Index i = 0; i < N; ++i) {
    const int c = model.space.index_of(labels[i]);
    if (c < 0 || c >= K) throw std::invalid_argument("loss_and_gradient: label outside status space");
    ce += std::log(norm[i]) - shifted(i, c);
    residual(i, c) -= 1.0;
  }

  LossGradient out;
  out.loss = ce / static_cast<double>(N) + l2_penalty * model.weights.squaredNorm();
  out.grad_weights = residual.transpose() * X / static_cast<double>(N) + 2.0 * l2_penalty * model.weights;
  out.grad_biases = residual.colwise().sum().transpose() / static_cast<double>(N);
  return out;
}

LossGradient loss_and_gradient(const ClassifierModel& model, const LabeledSet& batch, double l2_penalty) {
  return loss_and_gradient(model, standardized_features(model, batch), labels_of(batch), l2_penalty);
}

ClassifierModel train_classifier(const LabeledSet& data, const StatusSpace& space, const TrainConfig& cfg,
                                 std::vector<double>* loss_history) {
  cfg.validate();
  if (data.empty()) throw DegenerateData("training set is empty");
  const int first_label = data.front().label;
  if (std::all_of(data.begin(), data.end(), [&](const LabeledSample& s) { return s.label == first_label; }))
    throw DegenerateData("training set needs at least two classes");

  for (const auto& s : data)
    if (!space.contains(s.label)) throw ConfigError("train: label outside status space");

  ClassifierModel model = ClassifierModel::zeros(space);

  Eigen::MatrixXd raw(static_cast<Eigen::Index>(data.size()), kFeatureCount);
  for (std::size_t i = 0; i < data.size(); ++i) raw.row(i) = extract_features(data[i].trajectory).transpose();
  model.feature_means = raw.colwise().mean().transpose();
  const Eigen::MatrixXd centered = raw.rowwise() - model.feature_means.transpose();
  const Eigen::VectorXd var = centered.array().square().colwise().mean().transpose();
  for (int f = 0; f < kFeatureCount; ++f) {
    if (var[f] > 1e-24) {
      model.feature_stds[f] = std::sqrt(var[f]);
    } else {
      model.feature_stds[f] = 1.0;
      model.feature_mask[f] = 0.0;
    }
  }
  if (model.feature_mask.sum() == 0.0) throw DegenerateData("every feature has zero variance");

  const Eigen::MatrixXd X = (centered.array().rowwise() / model.feature_stds.transpose().array()).matrix();
  const std::vector<int> labels = labels_of(data);

  double lr = cfg.learning_rate;
  LossGradient current = loss_and_gradient(model, X, labels, cfg.l2_penalty);
  if (loss_history) {
    loss_history->clear();
    loss_history->push_back(current.loss);
  }
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int attempt = 0; attempt < 60; ++attempt) {
      ClassifierModel trial = model;
      trial.weights -= lr * (current.grad_weights.array().rowwise() * model.feature_mask.transpose().array()).matrix();
      trial.biases -= lr * current.grad_biases;
      LossGradient next = loss_and_gradient(trial, X, labels, cfg.l2_penalty);
      if (next.loss <= current.loss) {
        model = std::move(trial);
        current = std::move(next);
        break;
      }
      lr *= 0.5;
    }
    if (loss_history) loss_history->push_back(current.loss);
  }
  return model;
}

Eigen::VectorXd class_probabilities(const ClassifierModel& model, const Trajectory& traj) {
  Eigen::MatrixXd x = ((extract_features(traj) - model.feature_means).array() / model.feature_stds.array()).matrix().transpose();
  return softmax_rows(model, x).row(0).transpose();
}

PerceptSignal classify(const ClassifierModel& model, const Trajectory& traj) {
  const Eigen::VectorXd p = class_probabilities(model, traj);
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return PerceptSignal(model.space.value_at(static_cast<int>(best)));
}

double accuracy(const ClassifierModel& model, const LabeledSet& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : data) hits += classify(model, s.trajectory).value() == s.label;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

PerceptionMatrixD estimate_confusion(const ClassifierModel& model, const LabeledSet& heldout, double alpha) {
  const StatusSpace& space = model.space;
  const int k = space.size();
  if (!(alpha >= 0.0)) throw ConfigError("confusion: alpha must be >= 0");
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
  for (const auto& s : heldout) {
    if (!space.contains(s.label)) throw ConfigError("confusion: label outside status space");
    counts(space.index_of(s.label), space.index_of(classify(model, s.trajectory).value())) += 1.0;
  }
  const Eigen::VectorXd totals = counts.rowwise().sum();
  for (int r = 0; r < k; ++r)
    if (totals[r] == 0.0) throw MissingClass(space.value_at(r));

  Eigen::MatrixXd freq = counts.array().colwise() / totals.array();
  const auto raw = validate_matrix<double>(std::move(freq), space, totals);
  return smooth_matrix(raw, alpha);
}

json model_to_json(const ClassifierModel& model) {
  const int k = model.num_classes();
  json weights = json::array();
  for (int c = 0; c < k; ++c) {
    std::vector<double> row(kFeatureCount);
    for (int f = 0; f < kFeatureCount; ++f) row[f] = model.weights(c, f);
    weights.push_back(row);
  }
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"n", model.space.n()},
          {"delta_mm", model.space.delta_mm()},
          {"labels", canonical_labels(model.space)},
          {"features", feature_names()},
          {"weights", weights},
          {"biases", vec(model.biases)},
          {"feature_means", vec(model.feature_means)},
          {"feature_stds", vec(model.feature_stds)},
          {"feature_mask", vec(model.feature_mask)}};
}

ClassifierModel model_from_json(const json& j) {
  try {
    const StatusSpace space(j.at("n").get<int>(), j.value("delta_mm", 0.5));
    if (j.contains("features") && j.at("features").get<std::vector<std::string>>() !=
                                      std::vector<std::string>(feature_names().begin(), feature_names().end()))
      throw ConfigError("model file: feature list does not match this build");
    if (j.contains("labels") && j.at("labels").get<std::vector<std::string>>() != canonical_labels(space))
      throw ConfigError("model file: labels must be in canonical ascending order");
    ClassifierModel m = ClassifierModel::zeros(space);
    const auto w = j.at("weights").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(w.size()) != space.size()) throw ConfigError("model file: wrong number of weight rows");
    for (int c = 0; c < space.size(); ++c) {
      if (static_cast<int>(w[c].size()) != kFeatureCount) throw ConfigError("model file: wrong weight row length");
      for (int f = 0; f < kFeatureCount; ++f) m.weights(c, f) = w[c][f];
    }
    auto read_vec = [&](const char* key, Eigen::VectorXd& dst) {
      const auto v = j.at(key).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(v.size()) != dst.size())
        throw ConfigError(std::string("model file: wrong length for ") + key);
      dst = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    };
    read_vec("biases", m.biases);
    read_vec("feature_means", m.feature_means);
    read_vec("feature_stds", m.feature_stds);
    if (j.contains("feature_mask")) read_vec("feature_mask", m.feature_mask);
    if ((m.feature_stds.array() <= 0).any()) throw ConfigError("model file: feature_stds must be > 0");
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ClassifierModel& model) {
  write_json_file(path, model_to_json(model));
}

ClassifierModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_dataset(const std::filesystem::path& manifest, const LabeledSet& data) {
  namespace fs = std::filesystem;
  const fs::path dir = manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
  const std::string stem = manifest.stem().string();
  const fs::path traj_dir = dir / (stem + "_traj");
  fs::create_directories(traj_dir);
  json entries = json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const fs::path rel = fs::path(stem + "_traj") / ("sample_" + std::to_string(i) + ".csv");
    write_trajectory_csv(dir / rel, data[i].trajectory);
    entries.push_back({{"path", rel.generic_string()}, {"label", label_name(data[i].label)}, {"offset_mm", data[i].offset_mm}});
  }
  write_json_file(manifest, entries);
}

LabeledSet read_dataset(const std::filesystem::path& manifest, const StatusSpace& space) {
  const json entries = read_json_file(manifest);
  if (!entries.is_array()) throw ConfigError(manifest.string() + ": manifest must be a JSON list");
  const auto dir = manifest.has_parent_path() ? manifest.parent_path() : std::filesystem::path(".");
  LabeledSet out;
  out.reserve(entries.size());
  try {
    for (const auto& e : entries) {
      std::filesystem::path p = e.at("path").get<std::string>();
      if (p.is_relative()) p = dir / p;
      out.push_back({read_trajectory_csv(p), parse_label(e.at("label").get<std::string>(), space),
                     e.at("offset_mm").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(manifest.string() + ": " + e.what());
  }
  return out;
}

}  // namespace ffc
