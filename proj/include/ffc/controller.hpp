#pragma once

// Reliability-controlled insertion loop and the memoryless baseline.
//
// Iterations are indexed from 0. Iteration 0 inserts at the initial offset
// (action 0); iteration i > 0 first applies u = -s_hat of iteration i - 1.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ffc/belief.hpp"
#include "ffc/rng.hpp"
#include "ffc/sim_env.hpp"

namespace ffc {

enum class ControllerMode { memory, memoryless };
enum class OnImpossible { reset_uniform, abort };

struct ControllerConfig {
  double gamma_target = 0.999;
  int max_iterations = 20;
  ControllerMode mode = ControllerMode::memory;
  OnImpossible on_impossible = OnImpossible::reset_uniform;

  void validate() const;
};

struct IterationRecord {
  int index = 0;
  ActionCmd action;
  Status true_before;
  Status true_after;
  PerceptSignal percept;
  Status estimate;
  double reliability = 0.0;
  bool revised = false;
  // The belief was reset to uniform because the percept was impossible under it.
  bool belief_reset = false;
  BeliefD belief_after;

  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

enum class Outcome { stopped_success, stopped_failure, max_iters_reached };

struct TrialLog {
  ControllerMode mode = ControllerMode::memory;
  std::uint64_t trial_id = 0;
  std::uint64_t master_seed = 0;
  double initial_offset_mm = 0.0;
  std::vector<IterationRecord> records;
  Outcome outcome = Outcome::max_iters_reached;
  std::optional<int> stop_iteration;

  friend bool operator==(const TrialLog&, const TrialLog&) = default;
};

std::string to_string(ControllerMode m);
std::string to_string(OnImpossible m);
std::string to_string(Outcome o);
ControllerMode parse_controller_mode(const std::string& s);
OnImpossible parse_on_impossible(const std::string& s);
Outcome parse_outcome(const std::string& s);

inline ActionCmd select_action(Status estimate) { return ActionCmd(-estimate.value()); }

// Stop iff the estimate is M and its reliability strictly exceeds the target.
inline bool should_stop(Status estimate, double reliability, const ControllerConfig& cfg) {
  return estimate.value() == 0 && reliability > cfg.gamma_target;
}

// `prior` defaults to uniform over the matrix's status space.
TrialLog run_memory_controller(InsertionEnv& env, const PerceptionMatrixD& matrix, const ControllerConfig& cfg,
                               Rng& rng, const std::optional<BeliefD>& prior = std::nullopt);

// Trusts each percept: stops on the first M, otherwise corrects by -z. The
// recorded belief is a point mass on z (reliability 1).
TrialLog run_memoryless_controller(InsertionEnv& env, const ControllerConfig& cfg, Rng& rng);

}  // namespace ffc
