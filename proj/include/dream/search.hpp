#pragma once

/**
 * Search strategies over the plan/execution reasoning tree.
 *
 *  - run_majority_vote: independent full trajectories, modal answer wins.
 *  - run_unit_beam:     beam search over whole plan+execution pairs, each
 *                       pair scored once by an execution-phase reward query.
 *  - run_dream:         dual-phase search; plans and executions are sampled,
 *                       scored, and pruned in separate passes.
 *  - run_dream_plus:    dual-phase search with the two-threshold budget
 *                       rules: sampling stops early once enough candidates
 *                       clear tau_1, and a scope whose whole quota falls
 *                       below tau_2 may draw up to m extra samples.
 *
 * Budget semantics per step: step 1 planning draws up to N1 candidates
 * globally and stops early once n1 exceed tau_p1; later steps draw up to
 * N1/n1 per beam and the per-beam stop requires N1/n1 above tau_p1.
 * Execution scopes draw up to N2/n2 per beam with the same all-above stop
 * rule. The asymmetry between step 1 and later steps is deliberate.
 *
 * Sampling runs either in over-request mode (draw the scope's quota in one
 * batch, replay results in draw order, charge only up to the stopping point)
 * or strict-sequential mode (one draw at a time, for backends where
 * over-requesting is costly). Because backend draws are counter-based, the
 * two modes produce identical results.
 */

#include <optional>
#include <string>
#include <vector>

#include "dream/budget.hpp"
#include "dream/core.hpp"
#include "dream/generation.hpp"
#include "dream/reward.hpp"

namespace dream::search {

using SamplingMode = budget::SamplingMode;

struct SearchContext {
  core::Question question;
  SamplingMode sampling = SamplingMode::overrequest;
  gen::SampleParams params;
  int score_retries = 0;
};

struct PhaseOutcome {
  std::vector<core::ScoredCandidate> accepted;  // reward-descending
  int drawn = 0;
  bool early_stopped = false;  // every scope in the phase stopped early
  bool extended = false;       // some scope drew extension samples
};

struct SearchResult {
  core::Trajectory best;
  std::vector<core::Trajectory> beam_final;
  core::BudgetLedger ledger;
  int steps_taken = 0;
};

/// A beam that has committed to a plan and awaits its executions.
struct PlannedBeam {
  core::Trajectory prefix;
  std::string plan;
  double plan_reward = 0.0;
  int plan_sample_index = 0;
};

struct SearchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// k highest-reward candidates, ties resolved toward the earlier draw.
std::vector<core::ScoredCandidate> select_top(std::vector<core::ScoredCandidate> pool,
                                              int k);

PhaseOutcome expand_planning(const SearchContext& ctx,
                             const std::vector<core::Trajectory>& beams, int step,
                             const core::SearchConfig& cfg,
                             gen::GenerationBackend& backend, rm::RewardBackend& reward,
                             core::BudgetLedger& ledger);

PhaseOutcome expand_execution(const SearchContext& ctx,
                              const std::vector<PlannedBeam>& beams, int step,
                              const core::SearchConfig& cfg,
                              gen::GenerationBackend& backend, rm::RewardBackend& reward,
                              core::BudgetLedger& ledger);

SearchResult run_dream_plus(const SearchContext& ctx, const core::SearchConfig& cfg,
                            gen::GenerationBackend& backend, rm::RewardBackend& reward);

/// run_dream_plus with early stop and extension disabled, whatever the
/// thresholds in cfg say.
SearchResult run_dream(const SearchContext& ctx, const core::SearchConfig& cfg,
                       gen::GenerationBackend& backend, rm::RewardBackend& reward);

/// Unit beam search over plan+execution pairs, using N2/n2 as budget and
/// width. Budget rules apply exactly as configured, so a config with
/// disabled thresholds gives the fixed-budget baseline and an active config
/// gives the budget-adjusted variant.
SearchResult run_unit_beam(const SearchContext& ctx, const core::SearchConfig& cfg,
                           gen::GenerationBackend& backend, rm::RewardBackend& reward);

SearchResult run_majority_vote(const SearchContext& ctx, int k,
                               gen::GenerationBackend& backend);

}  // namespace dream::search
