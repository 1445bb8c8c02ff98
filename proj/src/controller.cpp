#include "ffc/controller.hpp"

namespace ffc {

void ControllerConfig::validate() const {
  if (!(gamma_target > 0.0 && gamma_target < 1.0)) throw ConfigError("controller: gamma_target must be in (0,1)");
  if (max_iterations < 1) throw ConfigError("controller: max_iterations must be >= 1");
}

std::string to_string(ControllerMode m) { return m == ControllerMode::memory ? "memory" : "memoryless"; }

std::string to_string(OnImpossible m) { return m == OnImpossible::abort ? "abort" : "reset_uniform"; }

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::stopped_success: return "stopped_success";
    case Outcome::stopped_failure: return "stopped_failure";
    case Outcome::max_iters_reached: return "max_iters_reached";
  }
  return "?";
}

ControllerMode parse_controller_mode(const std::string& s) {
  if (s == "memory") return ControllerMode::memory;
  if (s == "memoryless") return ControllerMode::memoryless;
  throw ConfigError("unknown controller mode '" + s + "' (expected memory|memoryless)");
}

OnImpossible parse_on_impossible(const std::string& s) {
  if (s == "reset_uniform") return OnImpossible::reset_uniform;
  if (s == "abort") return OnImpossible::abort;
  throw ConfigError("unknown on_impossible '" + s + "' (expected reset_uniform|abort)");
}

Outcome parse_outcome(const std::string& s) {
  if (s == "stopped_success") return Outcome::stopped_success;
  if (s == "stopped_failure") return Outcome::stopped_failure;
  if (s == "max_iters_reached") return Outcome::max_iters_reached;
  throw ConfigError("unknown outcome '" + s + "'");
}

namespace {

void finish(TrialLog& log, const InsertionEnv& env, int i) {
  log.stop_iteration = i;
  log.outcome = env.status().value() == 0 ? Outcome::stopped_success : Outcome::stopped_failure;
}

}  // namespace

TrialLog run_memory_controller(InsertionEnv& env, const PerceptionMatrixD& matrix, const ControllerConfig& cfg,
                               Rng& rng, const std::optional<BeliefD>& prior) {
  cfg.validate();
  const StatusSpace& space = matrix.space();
  if (!(space == env.config().space)) throw ConfigError("memory controller: matrix and environment spaces differ");
  if (prior && !(prior->space() == space)) throw ConfigError("memory controller: prior has the wrong space");

  TrialLog log;
  log.initial_offset_mm = env.state().offset_mm;
  BeliefD belief = prior ? *prior : uniform_belief<double>(space);
  ActionCmd u(0);

  for (int i = 0; i < cfg.max_iterations; ++i) {
    IterationRecord rec;
    rec.index = i;
    rec.action = u;
    rec.true_before = env.status();

    belief = shift_update(belief, u);
    env.apply(u);
    rec.true_after = env.status();
    rec.percept = env.insert(rng);

    try {
      belief = measurement_update(belief, rec.percept, matrix);
    } catch (const ImpossibleObservation&) {
      if (cfg.on_impossible == OnImpossible::abort) throw;
      belief = measurement_update(uniform_belief<double>(space), rec.percept, matrix);
      rec.belief_reset = true;
    }

    const EstimateD est = map_estimate(belief);
    rec.estimate = est.status;
    rec.reliability = est.reliability;
    rec.revised = est.status.value() != rec.percept.value();
    rec.belief_after = belief;
    log.records.push_back(std::move(rec));

    if (should_stop(est.status, est.reliability, cfg)) {
      finish(log, env, i);
      return log;
    }
    u = select_action(est.status);
  }
  log.outcome = Outcome::max_iters_reached;
  return log;
}

TrialLog run_memoryless_controller(InsertionEnv& env, const ControllerConfig& cfg, Rng& rng) {
  cfg.validate();
  const StatusSpace& space = env.config().space;

  TrialLog log;
  log.mode = ControllerMode::memoryless;
  log.initial_offset_mm = env.state().offset_mm;
  ActionCmd u(0);

  for (int i = 0; i < cfg.max_iterations; ++i) {
    IterationRecord rec;
    rec.index = i;
    rec.action = u;
    rec.true_before = env.status();
    env.apply(u);
    rec.true_after = env.status();
    rec.percept = env.insert(rng);
    rec.estimate = Status(rec.percept.value());
    rec.reliability = 1.0;
    Vector<double> point = Vector<double>::Zero(space.size());
    point[space.index_of(rec.percept.value())] = 1.0;
    rec.belief_after = BeliefD(space, std::move(point));
    log.records.push_back(std::move(rec));

    if (log.records.back().percept.value() == 0) {
      finish(log, env, i);
      return log;
    }
    u = select_action(log.records.back().estimate);
  }
  log.outcome = Outcome::max_iters_reached;
  return log;
}

}  // namespace ffc
