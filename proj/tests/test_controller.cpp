#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ffc/controller.hpp"
#include "ffc/matrix_io.hpp"

using namespace ffc;

namespace {

const StatusSpace kSpace{3, 0.5};
const EnvConfig kEnv = EnvConfig::defaults(kSpace);

// Replays a fixed percept sequence, repeating the last entry when exhausted.
class ScriptedSensor final : public Sensor {
 public:
  explicit ScriptedSensor(std::vector<int> script) : script_(std::move(script)) {}
  PerceptSignal sense(const EnvState&, Rng&) override {
    const int z = script_[std::min(next_, script_.size() - 1)];
    ++next_;
    return PerceptSignal(z);
  }

 private:
  std::vector<int> script_;
  std::size_t next_ = 0;
};

// Alternates -1, +1, -1, ... forever.
class AlternatingSensor final : public Sensor {
 public:
  PerceptSignal sense(const EnvState&, Rng&) override { return PerceptSignal((k_++ % 2 == 0) ? -1 : 1); }

 private:
  int k_ = 0;
};

PerceptionMatrixD identity() { return validate_matrix<double>(Matrix<double>::Identity(7, 7), kSpace); }

ControllerConfig memory_cfg() { return ControllerConfig{}; }

ControllerConfig memoryless_cfg() {
  ControllerConfig c;
  c.mode = ControllerMode::memoryless;
  return c;
}

}  // namespace

TEST_CASE("select_action") {
  CHECK(select_action(Status(0)).value() == 0);
  CHECK(select_action(Status(-1)).value() == 1);
  CHECK(select_action(Status(3)).value() == -3);
}

TEST_CASE("should_stop") {
  const ControllerConfig cfg;
  CHECK(should_stop(Status(0), 0.9995, cfg));
  CHECK_FALSE(should_stop(Status(0), 0.9815, cfg));
  CHECK_FALSE(should_stop(Status(1), 0.99999, cfg));
  CHECK_FALSE(should_stop(Status(0), 0.999, cfg));  // strict inequality
}

TEST_CASE("controller config validation") {
  ControllerConfig c;
  c.gamma_target = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.gamma_target = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ControllerConfig{};
  c.max_iterations = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("memory controller needs two confirming M percepts") {
  ScriptedSensor sensor({0, 0});
  InsertionEnv env(kEnv, 0.0, sensor);
  Rng rng(1);
  const TrialLog log = run_memory_controller(env, table2_matrix(), memory_cfg(), rng);
  REQUIRE(log.records.size() == 2);
  CHECK(log.records[0].reliability == doctest::Approx(0.9814626196781422).epsilon(1e-12));
  CHECK(log.records[1].reliability == doctest::Approx(0.9996433893642525).epsilon(1e-12));
  CHECK(log.records[0].action.value() == 0);
  CHECK(log.records[1].action.value() == 0);
  CHECK(log.stop_iteration == 1);
  CHECK(log.outcome == Outcome::stopped_success);
  CHECK(env.state().insert_count == 2);
}

TEST_CASE("memory controller does not trust a wrong first percept") {
  // True R2 (offset -1.0); first percept R1.
  ScriptedSensor sensor({-1, -1, 0, 0, 0});
  InsertionEnv env(kEnv, -1.0, sensor);
  Rng rng(1);
  const TrialLog log = run_memory_controller(env, table2_matrix(), memory_cfg(), rng);
  REQUIRE(log.records.size() >= 2);
  CHECK(log.records[0].true_after.value() == -2);
  CHECK(log.records[0].estimate.value() == -1);
  CHECK(log.records[1].action.value() == 1);
  CHECK(log.records[1].true_before.value() == -2);
  CHECK(log.records[1].true_after.value() == -1);
  // R1 again after a +1 shift: the belief has moved the R2 mass to R1 and the
  // M mass to L1, so the next command is another +1 rather than a stop.
  CHECK(log.records[1].estimate.value() == -1);
  CHECK(log.records[2].action.value() == 1);
}

TEST_CASE("memory controller with a noiseless sensor") {
  for (double offset : {-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5}) {
    MatrixSensor sensor(identity());
    InsertionEnv env(kEnv, offset, sensor);
    Rng rng(2);
    const TrialLog log = run_memory_controller(env, identity(), memory_cfg(), rng);
    CHECK(log.outcome == Outcome::stopped_success);
    CHECK(static_cast<int>(log.records.size()) <= kSpace.n() + 1);
    if (offset == 0.0) CHECK(log.stop_iteration == 0);
    if (offset != 0.0) CHECK(log.stop_iteration == 1);
  }
}

TEST_CASE("impossible observation handling") {
  // After an M percept the belief has no L3 mass; an L3 percept is then impossible.
  {
    ScriptedSensor sensor({0, 3, 0, 0, 0});
    InsertionEnv env(kEnv, 0.0, sensor);
    Rng rng(0);
    const TrialLog log = run_memory_controller(env, table2_matrix(), memory_cfg(), rng);
    REQUIRE(log.records.size() >= 2);
    CHECK_FALSE(log.records[0].belief_reset);
    CHECK(log.records[1].belief_reset);
    CHECK(log.records[1].estimate.value() == 3);
    const BeliefD fresh = measurement_update(uniform_belief<double>(kSpace), PerceptSignal(3), table2_matrix());
    CHECK(log.records[1].belief_after == fresh);
    CHECK(log.records[1].reliability == fresh.at(3));
  }
  {
    ScriptedSensor sensor({0, 3});
    InsertionEnv env(kEnv, 0.0, sensor);
    Rng rng(0);
    ControllerConfig cfg;
    cfg.on_impossible = OnImpossible::abort;
    CHECK_THROWS_AS(run_memory_controller(env, table2_matrix(), cfg, rng), ImpossibleObservation);
  }
}

TEST_CASE("memoryless baseline") {
  {
    ScriptedSensor sensor({0});
    InsertionEnv env(kEnv, -0.6, sensor);  // true R1, percept M
    Rng rng(0);
    const TrialLog log = run_memoryless_controller(env, memoryless_cfg(), rng);
    CHECK(log.records.size() == 1);
    CHECK(log.stop_iteration == 0);
    CHECK(log.outcome == Outcome::stopped_failure);
  }
  {
    MatrixSensor sensor(identity());
    InsertionEnv env(kEnv, 0.0, sensor);
    Rng rng(0);
    const TrialLog log = run_memoryless_controller(env, memoryless_cfg(), rng);
    CHECK(log.stop_iteration == 0);
    CHECK(log.outcome == Outcome::stopped_success);
    CHECK(log.records[0].reliability == 1.0);
    CHECK_FALSE(log.records[0].revised);
  }
  {
    AlternatingSensor sensor;
    InsertionEnv env(kEnv, -0.6, sensor);
    Rng rng(0);
    const TrialLog log = run_memoryless_controller(env, memoryless_cfg(), rng);
    CHECK(log.outcome == Outcome::max_iters_reached);
    CHECK(log.records.size() == 20);
    CHECK_FALSE(log.stop_iteration.has_value());
    for (std::size_t i = 1; i < log.records.size(); ++i)
      CHECK(std::abs(log.records[i].action.value()) == 1);
  }
}

TEST_CASE("memory controller invariants on random matched trials") {
  const PerceptionMatrixD t2 = table2_matrix();
  const ControllerConfig cfg = memory_cfg();
  MatrixSensor sensor(t2);
  int stops = 0, successes = 0;
  constexpr int kTrials = 10000;
  for (int t = 0; t < kTrials; ++t) {
    Rng rng = derive_rng_stream(99, t);
    InsertionEnv env(kEnv, rng.uniform(-1.75, 1.75), sensor);
    const TrialLog log = run_memory_controller(env, t2, cfg, rng);
    REQUIRE(!log.records.empty());
    CHECK(static_cast<int>(log.records.size()) <= cfg.max_iterations);
    CHECK(log.records[0].action.value() == 0);
    for (std::size_t i = 0; i < log.records.size(); ++i) {
      const auto& r = log.records[i];
      CHECK(r.reliability == r.belief_after.at(r.estimate.value()));
      CHECK(r.revised == (r.estimate.value() != r.percept.value()));
      CHECK(std::abs(r.belief_after.mass() - 1.0) <= 1e-12);
      if (i + 1 < log.records.size()) CHECK(log.records[i + 1].action.value() == -r.estimate.value());
    }
    if (log.stop_iteration) {
      const auto& last = log.records.back();
      CHECK(last.estimate.value() == 0);
      CHECK(last.reliability > cfg.gamma_target);
      CHECK((log.outcome == Outcome::stopped_success) == (last.true_after.value() == 0));
      ++stops;
      successes += log.outcome == Outcome::stopped_success;
    }
  }
  // Posterior calibration: the success fraction among stops is consistent
  // with at least gamma_target (99% two-sided Wilson interval upper bound).
  const double z = 2.5758293035489;
  const double p = static_cast<double>(successes) / stops;
  const double denom = 1 + z * z / stops;
  const double centre = (p + z * z / (2.0 * stops)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / stops + z * z / (4.0 * stops * stops)) / denom;
  INFO("stops=" << stops << " successes=" << successes);
  CHECK(centre + half >= cfg.gamma_target);
}
