#pragma once

// Perception stage: tactile trajectory -> percept label, plus the confusion
// matrix of that mapping, which becomes the filter's likelihood.
//
// The classifier is multinomial logistic regression over seven hand-picked
// trajectory features, standardised with statistics from the training set.

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "ffc/belief.hpp"
#include "ffc/rng.hpp"
#include "ffc/sim_env.hpp"

namespace ffc {

class DegenerateTrajectory : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateData : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MissingClass : public std::invalid_argument {
 public:
  MissingClass(int s)
      : std::invalid_argument("held-out set has no samples for status " + label_name(s)), status_(s) {}
  int status() const { return status_; }

 private:
  int status_;
};

inline constexpr int kFeatureCount = 7;
using FeatureVector = Eigen::Matrix<double, kFeatureCount, 1>;

// Order is part of the model file contract.
const std::array<std::string, kFeatureCount>& feature_names();

// [final x, max x - final x, mean y, final y, least-squares slope of y over t,
//  final z, mean z]
FeatureVector extract_features(const Trajectory& traj);

struct LabeledSample {
  Trajectory trajectory;
  int label = 0;
  double offset_mm = 0.0;
};
using LabeledSet = std::vector<LabeledSample>;

// Evenly spaced offsets from -halfspan to +halfspan inclusive.
std::vector<double> offset_grid(double halfspan_mm, double step_mm);

// positions x reps trajectories, labelled with status_of. Positions outside
// the environment's range are rejected.
LabeledSet generate_dataset(const EnvConfig& env, const TrajectoryParams& params, const std::vector<double>& positions,
                            int reps, Rng& rng);

// Per-label shuffle and split; each label contributes round(test_fraction * count)
// samples to the test side.
std::pair<LabeledSet, LabeledSet> stratified_split(const LabeledSet& data, double test_fraction, Rng& rng);

struct ClassifierModel {
  StatusSpace space;
  Eigen::MatrixXd weights;        // (2n+1) x F, row c is class value_at(c)
  Eigen::VectorXd biases;         // 2n+1
  Eigen::VectorXd feature_means;  // F
  Eigen::VectorXd feature_stds;   // F, strictly positive
  Eigen::VectorXd feature_mask;   // F, 0 for features frozen out (zero training variance)

  static ClassifierModel zeros(const StatusSpace& space);
  int num_classes() const { return space.size(); }
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2_penalty = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossGradient {
  double loss = 0.0;
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_biases;
};

// Standardised design matrix (N x F) for a model's statistics.
Eigen::MatrixXd standardized_features(const ClassifierModel& model, const LabeledSet& data);

// Mean softmax cross-entropy plus l2_penalty * ||W||^2 (biases unpenalised),
// with exact analytic gradients. `features` is the standardised design matrix
// and `labels` the status values.
LossGradient loss_and_gradient(const ClassifierModel& model, const Eigen::MatrixXd& features,
                               const std::vector<int>& labels, double l2_penalty);
LossGradient loss_and_gradient(const ClassifierModel& model, const LabeledSet& batch, double l2_penalty);

// Full-batch gradient descent from zero weights. A step that would raise the
// loss is undone and the learning rate halved, so the recorded per-epoch loss
// never increases.
ClassifierModel train_classifier(const LabeledSet& data, const StatusSpace& space, const TrainConfig& cfg,
                                 std::vector<double>* loss_history = nullptr);

Eigen::VectorXd class_probabilities(const ClassifierModel& model, const Trajectory& traj);
PerceptSignal classify(const ClassifierModel& model, const Trajectory& traj);
double accuracy(const ClassifierModel& model, const LabeledSet& data);

// Smoothed empirical p(z | s) of `model` on `heldout`; row counts are kept
// with the matrix.
PerceptionMatrixD estimate_confusion(const ClassifierModel& model, const LabeledSet& heldout, double alpha);

nlohmann::json model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const ClassifierModel& model);
ClassifierModel load_model(const std::filesystem::path& path);

// Dataset on disk: one trajectory CSV per sample under `<stem>_traj/` next to
// the manifest, and a
// JSON manifest listing {path, label, offset_mm}, paths relative to it.
void write_dataset(const std::filesystem::path& manifest, const LabeledSet& data);
LabeledSet read_dataset(const std::filesystem::path& manifest, const StatusSpace& space);

// Closes the loop through the classifier: each insertion synthesises a
// trajectory at the current offset and classifies it.
class TrajectorySensor final : public Sensor {
 public:
  TrajectorySensor(ClassifierModel model, TrajectoryParams params)
      : model_(std::move(model)), params_(params) {}
  PerceptSignal sense(const EnvState& state, Rng& rng) override {
    return classify(model_, synth_trajectory(state, model_.space, params_, rng));
  }

 private:
  ClassifierModel model_;
  TrajectoryParams params_;
};

}  // namespace ffc
