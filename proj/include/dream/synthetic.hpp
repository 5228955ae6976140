#pragma once

/**
 * Planted-difficulty task model and exact oracles.
 *
 * A synthetic task plants per-step success probabilities: a plan sampled at
 * step s is viable with probability p_s, and an execution conditioned on a
 * viable plan succeeds with probability q_s. Conditioned on a dead-end plan
 * (or an already-broken prefix) executions never succeed. That absorbing
 * structure is what makes every strategy's success probability a closed form,
 * so the search engines can be checked against exact numbers at desk scale.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "dream/core.hpp"

namespace dream::synth {

struct StepDifficulty {
  double plan_success = 1.0;  // p_s
  double exec_success = 1.0;  // q_s
};

struct SyntheticTaskSpec {
  std::string id = "task";
  std::vector<StepDifficulty> steps;
  std::string answer = "42";
  int plan_cost = 1;  // c_p, generation units per plan sample
  int exec_cost = 1;  // c_e, generation units per execution sample
};

/// Throws std::invalid_argument on an ill-formed spec (no steps,
/// probabilities outside [0,1], non-positive costs).
const SyntheticTaskSpec& validate_spec(const SyntheticTaskSpec& spec);

enum class StrategyKind {
  majority_vote,
  unit_beam,
  dream,
  dream_plus,
};

struct OracleReport {
  std::string strategy;
  double success_prob = 0.0;
  double expected_cost = 0.0;       // generation units
  double expected_plan_draws = 0.0; // planning samples per run, where modeled
  double expected_exec_draws = 0.0;
  double success_stderr = 0.0;      // Monte Carlo only
  double cost_stderr = 0.0;         // Monte Carlo only
  std::int64_t runs = 0;            // Monte Carlo only
};

/// Best-of-k whole pairs per step: success = prod_s [1-(1-p_s q_s)^k].
OracleReport closed_form_unit(const SyntheticTaskSpec& spec, int k_pairs);

/// k1 plans then k2 executions per step with a perfect reward oracle:
/// success = prod_s [(1-(1-p_s)^k1)(1-(1-q_s)^k2)].
OracleReport closed_form_dual(const SyntheticTaskSpec& spec, int k1, int k2);

/// Exact enumeration of the early-stop / extension automaton under a perfect
/// reward oracle. Restricted to beam widths n1 = n2 = 1; wider beams are
/// covered by Monte Carlo. Rejects noisy-oracle settings.
OracleReport closed_form_dream_plus(const SyntheticTaskSpec& spec,
                                    const core::SearchConfig& cfg);

struct MonteCarloOptions {
  std::int64_t runs = 10000;
  std::uint64_t seed = 1;
  int shards = 1;         // per-run seeds derive from the run index, so the
                          // shard count never changes results
  int majority_k = 4;     // sample count for the majority-vote strategy
};

/// Runs the real engine against the synthetic backend `runs` times and
/// reports the empirical success rate and mean cost with standard errors.
OracleReport monte_carlo(const SyntheticTaskSpec& spec,
                         const core::SearchConfig& cfg, StrategyKind strategy,
                         const MonteCarloOptions& options);

}  // namespace dream::synth
