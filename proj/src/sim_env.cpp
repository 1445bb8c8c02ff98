#include "ffc/sim_env.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace ffc {

void EnvConfig::validate() const {
  if (!(offset_halfspan_mm >= 0.5 * space.delta_mm()))
    throw ConfigError("env: offset_halfspan_mm must be >= delta/2");
}

EnvState init_env(const EnvConfig& cfg, double initial_offset_mm) {
  cfg.validate();
  if (!std::isfinite(initial_offset_mm) || std::abs(initial_offset_mm) > cfg.offset_halfspan_mm) {
    throw OffsetOutOfRange("initial offset " + std::to_string(initial_offset_mm) + " mm outside +-" +
                           std::to_string(cfg.offset_halfspan_mm) + " mm");
  }
  return EnvState{initial_offset_mm, 0};
}

Status status_of(const EnvState& state, const StatusSpace& space) {
  const double delta = space.delta_mm();
  const double mag = std::abs(state.offset_mm);
  if (mag <= 0.5 * delta) return Status(0);
  const double bins = std::ceil((mag - 0.5 * delta) / delta);
  const int k = static_cast<int>(std::min<double>(space.n(), bins));
  return Status(state.offset_mm > 0 ? k : -k);
}

EnvState apply_action(const EnvState& state, ActionCmd u, const StatusSpace& space) {
  EnvState next = state;
  next.offset_mm += u.value() * space.delta_mm();
  return next;
}

PerceptSignal sample_percept(const EnvState& state, const PerceptionMatrixD& matrix, Rng& rng) {
  const StatusSpace& space = matrix.space();
  const int s = status_of(state, space).value();
  const int idx = rng.categorical(matrix.rows().row(space.index_of(s)));
  return PerceptSignal(space.value_at(idx));
}

void TrajectoryParams::validate() const {
  if (samples < 2) throw ConfigError("trajectory: samples must be >= 2");
  if (amp_x < 0 || amp_y_scale < 0 || z_slope < 0 || noise_sigma < 0)
    throw ConfigError("trajectory: amplitudes and noise must be >= 0");
  if (!(y_peak_mm > 0)) throw ConfigError("trajectory: y_peak_mm must be > 0");
}

double shear_amplitude(double error_mm, const TrajectoryParams& p) {
  const double ratio = error_mm / p.y_peak_mm;
  return p.amp_y_scale * ratio * std::exp(1.0 - ratio);
}

double normal_amplitude(double error_mm, const TrajectoryParams& p) { return p.z_slope * error_mm; }

Trajectory synth_trajectory(const EnvState& state, const StatusSpace& space, const TrajectoryParams& p, Rng& rng) {
  p.validate();
  const int T = p.samples;
  const double error = std::max(0.0, std::abs(state.offset_mm) - 0.5 * space.delta_mm());
  const double sign = state.offset_mm > 0 ? 1.0 : (state.offset_mm < 0 ? -1.0 : 0.0);

  Trajectory traj(T, 3);
  const double ay = shear_amplitude(error, p);
  const double az = normal_amplitude(error, p);
  for (int t = 1; t <= T; ++t) {
    const double r = static_cast<double>(t) / T;
    if (error == 0.0) {
      traj.row(t - 1) << p.amp_x * std::sin(std::numbers::pi * r), 0.0, 0.0;
    } else {
      traj.row(t - 1) << p.amp_x * r, sign * ay * r, az * r;
    }
  }
  if (p.noise_sigma > 0) {
    for (int t = 0; t < T; ++t)
      for (int a = 0; a < 3; ++a) traj(t, a) += p.noise_sigma * rng.normal();
  }
  return traj;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "t,x,y,z\n";
  for (Eigen::Index t = 0; t < traj.rows(); ++t)
    out << (t + 1) << ',' << traj(t, 0) << ',' << traj(t, 1) << ',' << traj(t, 2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,x,y,z", 0) != 0)
    throw ConfigError(path.string() + ": expected header t,x,y,z");
  std::vector<std::array<double, 3>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string cell;
    std::array<double, 4> v{};
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(ss, cell, ',')) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
      try {
        v[c] = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    rows.push_back({v[1], v[2], v[3]});
  }
  Trajectory traj(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) traj.row(i) << rows[i][0], rows[i][1], rows[i][2];
  return traj;
}

double sample_initial_offset(const EnvConfig& cfg, OffsetSampling mode, std::uint64_t trial_index, Rng& rng) {
  const double h = cfg.offset_halfspan_mm;
  if (mode == OffsetSampling::uniform) return rng.uniform(-h, h);

  const StatusSpace& space = cfg.space;
  const double delta = space.delta_mm();
  const int s = space.value_at(static_cast<int>(trial_index % static_cast<std::uint64_t>(space.size())));
  const int k = std::abs(s);
  double lo = k == 0 ? -0.5 * delta : 0.5 * delta + (k - 1) * delta;
  double hi = k == 0 ? 0.5 * delta : 0.5 * delta + k * delta;
  if (k == space.n()) hi = std::max(hi, h);  // outermost region absorbs any extra span
  hi = std::min(hi, h);
  if (k > 0) lo = std::min(lo, hi);
  double x = rng.uniform(lo, hi);
  if (k > 0 && x == lo) x = std::nextafter(lo, hi);  // the inner edge belongs to the next region in
  return s < 0 ? -x : x;
}

}  // namespace ffc
