#pragma once

/**
 * Core domain types for dual-phase search.
 *
 * Everything here is a plain value type: questions, reasoning steps,
 * trajectories, the search configuration, scored candidates, and the
 * budget ledger that every strategy charges its sampling against.
 * Types are immutable in spirit (copy, don't mutate shared state), so
 * they are safe to pass across threads.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dream::core {

// ============================================================================
// Deterministic hashing / sampling primitives
// ============================================================================
//
// All randomness in the engine is counter-based: a sample's value is a pure
// function of (run seed, content of what it conditions on, draw index).
// This is what makes results independent of batching, sharding, and
// concurrency schedules.

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Uniform double in [0, 1) from a 64-bit hash state.
inline double unit_uniform(std::uint64_t h) {
  return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

// ============================================================================
// Canonical answer comparison
// ============================================================================

/// Trim whitespace, case-fold, strip trailing punctuation.
std::string canonical_answer(std::string_view raw);

/// Canonical string equality, with numeric comparison when both sides
/// parse as numbers ("42" matches "42.0").
bool answers_match(std::string_view a, std::string_view b);

// ============================================================================
// Domain types
// ============================================================================

enum class Phase { planning, execution };

inline const char* phase_name(Phase p) {
  return p == Phase::planning ? "planning" : "execution";
}

struct Question {
  std::string id;
  std::string text;
  std::optional<std::string> gold_answer;
};

/// One reasoning unit: a plan (subgoal) plus the execution that resolves it.
/// A step may temporarily carry only a plan while its execution is pending.
struct Step {
  std::string plan;
  std::string execution;
  std::optional<double> plan_reward;
  std::optional<double> exec_reward;

  bool operator==(const Step&) const = default;
};

struct Trajectory {
  std::string question_id;
  std::vector<Step> steps;
  bool finished = false;
  std::optional<std::string> final_answer;

  bool operator==(const Trajectory&) const = default;
};

/// All search symbols in one place. Field names are role-based; the harness
/// config file keys them by the conventional symbols (N1, n1, tau_p1, ...).
struct SearchConfig {
  int planning_budget = 8;     // N1
  int execution_budget = 8;    // N2
  int planning_beam = 2;       // n1
  int execution_beam = 2;      // n2
  int planning_extension = 0;  // m1
  int execution_extension = 0; // m2
  double plan_stop_threshold = 1.0;    // tau_p1
  double plan_extend_threshold = 0.0;  // tau_p2
  double exec_stop_threshold = 1.0;    // tau_e1
  double exec_extend_threshold = 0.0;  // tau_e2
  int max_steps = 10;

  bool operator==(const SearchConfig&) const = default;
};

/// Throws std::invalid_argument naming the first violated invariant,
/// e.g. "N1 not divisible by n1". Returns the config unchanged otherwise.
SearchConfig validate_config(const SearchConfig& cfg);

/// Copy of cfg with early stop and extension disabled: thresholds moved to
/// the unreachable ends of (0,1) rewards and extensions zeroed. Used to run
/// the budget-adjusted engines as their fixed-budget baselines.
SearchConfig disable_budget_rules(SearchConfig cfg);

struct ScoredCandidate {
  Trajectory prefix;
  Phase phase = Phase::planning;
  std::string new_plan;
  std::optional<std::string> new_execution;
  std::optional<double> new_plan_reward;  // plan score carried into exec candidates
  double reward = 0.0;
  int sample_index = 0;
};

// ============================================================================
// Budget ledger
// ============================================================================

struct LedgerKey {
  int step = 0;  // 1-based, mirrors "Plan 1:" numbering
  Phase phase = Phase::planning;

  auto operator<=>(const LedgerKey&) const = default;
};

/// Sampling outcome of a single scope (one sampling episode: the global
/// step-1 pool or one beam's quota at a later step).
struct ScopeStats {
  std::int64_t drawn = 0;
  std::int64_t tokens = 0;
  bool early_stopped = false;
  bool extended = false;
  std::int64_t extension_samples = 0;
  std::int64_t discarded = 0;
};

/// Per (step, phase) accounting. A key can cover several scopes (one per
/// beam); early_stopped means every scope at the key stopped early, while
/// extended means at least one scope drew extension samples. The two flags
/// are therefore mutually exclusive within one run's record.
struct LedgerEntry {
  std::int64_t samples_drawn = 0;
  std::int64_t tokens_charged = 0;
  bool early_stopped = false;
  bool extended = false;
  std::int64_t extension_samples = 0;
  std::int64_t scopes = 0;
  std::int64_t scopes_early_stopped = 0;
  std::int64_t scopes_extended = 0;
  std::int64_t discarded = 0;

  bool operator==(const LedgerEntry&) const = default;
};

class BudgetLedger {
 public:
  void record_scope(int step, Phase phase, const ScopeStats& stats);

  const std::map<LedgerKey, LedgerEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  std::int64_t total_samples() const;
  std::int64_t total_tokens() const;
  std::int64_t total_scopes() const;
  std::int64_t total_scopes_early_stopped() const;

  /// Fraction of sampling scopes that triggered the early-stop rule.
  double early_stop_fraction() const;

  /// Additive merge: integers summed, booleans OR-ed per key.
  void merge(const BudgetLedger& other);

 private:
  std::map<LedgerKey, LedgerEntry> entries_;
};

BudgetLedger ledger_merge(const BudgetLedger& a, const BudgetLedger& b);

}  // namespace dream::core
