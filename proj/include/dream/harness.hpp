#pragma once

/**
 * Experiment runner: task ingestion, strategy dispatch, seed management,
 * frontier CSV emission, and synthetic suite generation.
 *
 * A run is deterministic end to end for hermetic backends: per-task seeds
 * derive from (sweep seed, task id, repeat index), aggregation uses integer
 * accumulators keyed by task order, and CSV emission formats numbers
 * identically every time, so equal inputs give byte-identical outputs at any
 * parallelism level.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dream/codesearch.hpp"
#include "dream/core.hpp"
#include "dream/reward.hpp"
#include "dream/search.hpp"
#include "dream/synthetic.hpp"

namespace dream::harness {

enum class Method { majority, unit_beam, dream, dream_plus, codetree_dream };

Method method_from_string(const std::string& name);
std::string method_to_string(Method method);

struct RemoteEndpoints {
  std::string generation_endpoint;
  std::string reward_endpoint;
  int timeout_ms = 5000;
  int retries = 2;
};

struct ExperimentConfig {
  Method method = Method::dream;
  core::SearchConfig search;
  std::string backend = "synthetic";  // synthetic | remote | planted
  std::string task_file;
  std::string task_format = "synthetic";  // synthetic | questions | code
  std::vector<std::uint64_t> seeds = {1};
  int runs_per_task = 1;
  std::string out_path = "frontier.csv";
  int majority_k = 4;
  std::string sampling_mode = "overrequest";  // or "sequential"
  rm::OracleNoise oracle_noise;
  RemoteEndpoints remote;
  std::string few_shot_bank;
  std::string executor_command;  // subprocess executor for remote code runs
  int executor_timeout_ms = 2000;
  double planted_pass_prob = 0.5;
  std::int64_t code_budget = 400;  // generation samples per code task
  int parallelism = 1;
};

/// Parses the JSON config file. Search keys use the conventional symbols
/// (N1, N2, n1, n2, m1, m2, tau_p1, tau_p2, tau_e1, tau_e2, max_steps).
/// DREAM_GENERATION_ENDPOINT / DREAM_REWARD_ENDPOINT environment variables
/// override the remote endpoints. Throws std::invalid_argument on bad input.
ExperimentConfig load_experiment_config(const std::string& path);

/// Validates cross-field constraints (method/backend/format compatibility,
/// non-empty seeds, search config invariants).
const ExperimentConfig& validate_experiment_config(const ExperimentConfig& cfg);

// ============================================================================
// Task ingestion
// ============================================================================

struct TaskSet {
  std::string format;
  std::vector<synth::SyntheticTaskSpec> synthetic;
  std::vector<core::Question> questions;
  std::vector<code::CodeTask> code;

  std::size_t size() const {
    return synthetic.size() + questions.size() + code.size();
  }
};

/// Line-delimited JSON records; malformed lines fail with their line number
/// and duplicate ids are rejected by name. An empty file yields an empty set
/// and a warning.
TaskSet load_tasks(const std::string& path, const std::string& format,
                   std::string* warning = nullptr);

// ============================================================================
// Running experiments
// ============================================================================

struct FrontierRow {
  std::string method;
  std::string fingerprint;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double mean_tokens = 0.0;
  double mean_samples = 0.0;
  double early_stop_fraction = 0.0;
};

struct ExperimentResult {
  std::vector<FrontierRow> rows;
  std::vector<std::string> task_log;  // one JSON line per (task, seed, run)
  int tasks_attempted = 0;
  int tasks_failed = 0;
};

std::string config_fingerprint(const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg, const TaskSet& tasks);

/// CSV sorted by (method, mean_tokens); a companion "<path>.plot" file holds
/// (log10 tokens, accuracy) pairs. Re-emitting equal rows is byte-identical.
void emit_frontier(const std::vector<FrontierRow>& rows, const std::string& path);

std::vector<FrontierRow> read_frontier(const std::string& path);

// ============================================================================
// Synthetic suite generation
// ============================================================================

struct SpecSuiteOptions {
  int count = 20;
  int steps = 3;
  std::string profile = "mixed";  // easy | hard | mixed | uniform
  std::uint64_t seed = 1;
  double p_min = 0.5, p_max = 0.95;  // uniform profile ranges
  double q_min = 0.5, q_max = 0.95;
};

std::vector<synth::SyntheticTaskSpec> generate_spec_suite(const SpecSuiteOptions& options);

void write_spec_suite(const std::vector<synth::SyntheticTaskSpec>& specs,
                      std::ostream& out);

}  // namespace dream::harness
