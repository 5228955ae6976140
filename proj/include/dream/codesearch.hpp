#pragma once

/**
 * Dual-phase tree search for program synthesis.
 *
 * Each tree node holds one complete program and its pass rate over the
 * visible tests. Plans (repair or solution strategies) are sampled per node,
 * scored by the reward model, and tried best-first. Executing a plan samples
 * candidate programs, scores them purely by visible pass rate, and keeps the
 * best as a child node. The walk descends only when the child's pass rate
 * strictly exceeds its parent's; otherwise it backtracks to the next ranked
 * plan at the nearest node on the path with plans left. A pass rate of 1.0
 * ends the search. Hidden tests are evaluated for reporting only.
 *
 * The executor is pluggable: a planted in-process executor serves tests and
 * desk-scale runs, and a subprocess executor speaks a line-JSON protocol with
 * a wall-clock timeout. The engine never executes code in-process.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dream/budget.hpp"
#include "dream/core.hpp"
#include "dream/generation.hpp"
#include "dream/reward.hpp"

namespace dream::code {

struct TestCase {
  std::string input;     // stdin payload or assertion text
  std::string expected;  // empty for assertion-style tests
};

struct CodeTask {
  std::string id;
  std::string prompt;
  std::vector<TestCase> visible_tests;  // must be non-empty
  std::vector<TestCase> hidden_tests;   // evaluation only
};

enum class Verdict { pass, fail, error, timeout };

struct RunOutcome {
  Verdict verdict = Verdict::error;
  std::string message;
  double duration_ms = 0.0;
};

class Executor {
 public:
  virtual ~Executor() = default;
  /// Must be deterministic per (program, test) within a run.
  virtual RunOutcome run(const std::string& program, const TestCase& test) = 0;
};

/// Fraction of tests passed; error and timeout verdicts count as failures.
/// failed_out, when given, collects the indices of non-passing tests.
double pass_rate(const std::string& program, const std::vector<TestCase>& tests,
                 Executor& executor, std::vector<int>* failed_out = nullptr);

struct CodeSearchConfig {
  int plan_budget = 4;      // plans sampled per node
  int exec_budget = 4;      // programs sampled per plan
  int plan_required = 1;    // plan early stop: this many above tau_p1
  double tau_p1 = 1.0;
  double tau_p2 = 0.0;
  double tau_e1 = 1.0;      // a candidate above this stops program sampling
  double tau_e2 = 0.0;      // all candidates at or below this extend
  int m1 = 0;
  int m2 = 0;
  std::int64_t max_total_samples = 1000;  // generation budget (plans + programs)
};

/// Derives the code-search knobs from a SearchConfig (plan_budget from N1,
/// exec_budget from N2, thresholds and extensions carried over).
CodeSearchConfig code_config_from_search(const core::SearchConfig& cfg);

struct CodeNode {
  std::string program;
  std::string plan;  // plan that produced this program
  double pass_rate = 0.0;
  std::vector<int> failed_tests;  // visible-test indices, cached at creation
  int parent = -1;
  std::vector<int> children;
  int depth = 0;
};

struct RankedPlan {
  std::string text;
  double reward = 0.0;
  int sample_index = 0;
};

struct CodeSearchResult {
  std::string best_program;
  double best_visible_rate = 0.0;
  bool solved = false;            // hit pass rate 1.0 on visible tests
  bool budget_exhausted = false;
  int programs_generated = 0;
  core::BudgetLedger ledger;
  std::vector<CodeNode> nodes;    // explored tree, index 0 is the root
  bool weak_accept = false;       // best program passes all visible tests
  bool accept = false;            // ... and all hidden tests
};

struct CodeSearchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Samples plans for a node and returns them reward-descending (ties by draw
/// order), honoring the early-stop and extension rules.
std::vector<RankedPlan> rank_plans(const CodeTask& task,
                                   const core::Trajectory& conditioning,
                                   const CodeSearchConfig& cfg,
                                   gen::GenerationBackend& backend,
                                   rm::RewardBackend& reward,
                                   core::BudgetLedger& ledger, int depth,
                                   budget::SamplingMode mode);

struct ExecutedPlan {
  std::string program;
  double pass_rate = 0.0;
  std::vector<int> failed_tests;
  int programs_drawn = 0;
};

/// Samples up to exec_budget programs under a plan, evaluating pass rates in
/// draw order: a rate above tau_e1 (or an exact 1.0) stops sampling, and a
/// full quota at or below tau_e2 may draw m2 extra. Returns the best program
/// (ties to the earliest); no parseable program yields pass rate 0.
ExecutedPlan execute_plan(const CodeTask& task, const core::Trajectory& conditioning,
                          const std::string& plan, const CodeSearchConfig& cfg,
                          gen::GenerationBackend& backend, Executor& executor,
                          core::BudgetLedger& ledger, int depth,
                          budget::SamplingMode mode);

CodeSearchResult run_codetree_dream(const CodeTask& task, const CodeSearchConfig& cfg,
                                    gen::GenerationBackend& backend,
                                    rm::RewardBackend& reward, Executor& executor,
                                    budget::SamplingMode mode =
                                        budget::SamplingMode::overrequest);

// ============================================================================
// Executors
// ============================================================================

/// Deterministic in-process executor: each (program, test) passes with a
/// planted probability derived from a seed. Serves tests, oracles, and
/// hermetic desk-scale experiments.
class PlantedExecutor : public Executor {
 public:
  PlantedExecutor(std::uint64_t seed, double pass_prob);
  RunOutcome run(const std::string& program, const TestCase& test) override;

 private:
  std::uint64_t seed_;
  double pass_prob_;
};

/// Runs `command` through /bin/sh per invocation, writes one JSON request
/// line {"program": ..., "test": ..., "expected": ...} to its stdin, and
/// reads one JSON response line {"verdict": "pass"|"fail"|"error"|"timeout",
/// "message": ..., "duration_ms": ...}. The child is killed at the wall-clock
/// timeout and the run reported as a timeout verdict.
class SubprocessExecutor : public Executor {
 public:
  SubprocessExecutor(std::string command, int timeout_ms);
  RunOutcome run(const std::string& program, const TestCase& test) override;

 private:
  std::string command_;
  int timeout_ms_;
};

/// Generation backend emitting nonce-tagged plans and programs for planted
/// code experiments; pairs with PlantedExecutor.
class PlantedCodeBackend : public gen::GenerationBackend {
 public:
  explicit PlantedCodeBackend(std::uint64_t run_seed);
  gen::GenResult generate(const gen::GenRequest& request) override;
  std::string id() const override { return "planted-code"; }

 private:
  std::uint64_t seed_;
};

}  // namespace dream::code
