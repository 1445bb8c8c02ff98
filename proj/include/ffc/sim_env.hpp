#pragma once

// Simulated insertion world. The cable offset is continuous and centred on
// the socket: the insertable band M is [-delta/2, +delta/2] and each error
// region is delta wide, counted outward. Positive offsets are left errors.

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ffc/belief.hpp"
#include "ffc/rng.hpp"
#include "ffc/status.hpp"

namespace ffc {

class OffsetOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class SensorMode { matrix_sampled, trajectory_classified };

struct EnvConfig {
  StatusSpace space;
  double offset_halfspan_mm;
  SensorMode sensor_mode = SensorMode::matrix_sampled;

  // Halfspan n*delta + delta/2: the outer edge of the last error region.
  static EnvConfig defaults(const StatusSpace& space, SensorMode mode = SensorMode::matrix_sampled) {
    return {space, space.n() * space.delta_mm() + 0.5 * space.delta_mm(), mode};
  }
  void validate() const;
};

struct EnvState {
  double offset_mm = 0.0;
  int insert_count = 0;
};

EnvState init_env(const EnvConfig& cfg, double initial_offset_mm);

// s = 0 inside the M band, otherwise sign(offset) * min(n, ceil((|offset| - delta/2) / delta)).
// Saturates at +-n once the cable leaves the modelled band.
Status status_of(const EnvState& state, const StatusSpace& space);

// offset += u * delta, unclamped.
EnvState apply_action(const EnvState& state, ActionCmd u, const StatusSpace& space);

PerceptSignal sample_percept(const EnvState& state, const PerceptionMatrixD& matrix, Rng& rng);

struct TrajectoryParams {
  int samples = 100;
  double amp_x = 1.0;        // success-bump amplitude
  double amp_y_scale = 1.0;  // shear amplitude scale
  double y_peak_mm = 0.75;   // error magnitude at which shear peaks
  double z_slope = 0.8;      // normal-force growth per mm of error
  double noise_sigma = 0.05;

  void validate() const;
};

// T x 3 time series, columns x, y, z.
using Trajectory = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// Parametric stand-in for the tactile response of one insertion:
//  * inside M, x rises and falls (sin bump) with flat shear and normal force;
//  * with an alignment error m > 0, x ramps up, y ramps with the sign of the
//    offset and amplitude (m/m0)exp(1 - m/m0), z ramps with amplitude z_slope*m.
// Independent N(0, noise_sigma^2) noise on every sample and axis.
Trajectory synth_trajectory(const EnvState& state, const StatusSpace& space, const TrajectoryParams& params,
                            Rng& rng);

// Noise-free amplitudes, exposed for tests and documentation.
double shear_amplitude(double error_mm, const TrajectoryParams& params);
double normal_amplitude(double error_mm, const TrajectoryParams& params);

// CSV with header `t,x,y,z`, t counting from 1.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

// Generative sensor used by the controllers.
class Sensor {
 public:
  virtual ~Sensor() = default;
  virtual PerceptSignal sense(const EnvState& state, Rng& rng) = 0;
};

class MatrixSensor final : public Sensor {
 public:
  explicit MatrixSensor(PerceptionMatrixD matrix) : matrix_(std::move(matrix)) {}
  PerceptSignal sense(const EnvState& state, Rng& rng) override { return sample_percept(state, matrix_, rng); }

 private:
  PerceptionMatrixD matrix_;
};

// One insertion episode's world: the config, the moving cable, and the sensor
// observing it. Owned by a single controller run.
class InsertionEnv {
 public:
  InsertionEnv(EnvConfig cfg, double initial_offset_mm, Sensor& sensor)
      : cfg_(cfg), state_(init_env(cfg, initial_offset_mm)), sensor_(&sensor) {}

  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }
  Status status() const { return status_of(state_, cfg_.space); }

  void apply(ActionCmd u) { state_ = apply_action(state_, u, cfg_.space); }

  // One insertion attempt: returns the percept and counts the insertion.
  PerceptSignal insert(Rng& rng) {
    const PerceptSignal z = sensor_->sense(state_, rng);
    ++state_.insert_count;
    return z;
  }

 private:
  EnvConfig cfg_;
  EnvState state_;
  Sensor* sensor_;
};

// Initial offset draws for a campaign.
enum class OffsetSampling { uniform, stratified };

// uniform: U[-halfspan, halfspan]. stratified: region (trial_index mod 2n+1)
// in ascending-s order, then uniform inside that region's band.
double sample_initial_offset(const EnvConfig& cfg, OffsetSampling mode, std::uint64_t trial_index, Rng& rng);

}  // namespace ffc
