#pragma once

/**
 * Process reward scoring.
 *
 * A backend scores the pair of logits for the "+" / "-" judgment tokens;
 * reward_from_logits turns that pair into a probability via the two-way
 * softmax. Scores therefore always live strictly inside (0,1) and all
 * thresholds compare in one domain.
 *
 * Backends:
 *  - OracleRewardBackend: deterministic judge for synthetic tasks, with an
 *    optional flip/jitter noise model. Scores clamp to
 *    [epsilon_floor, 1 - epsilon_floor].
 *  - ScriptedRewardBackend: replays a fixed reward sequence (tests).
 *  - RemoteRewardBackend (remote.hpp): HTTP JSON scoring service.
 */

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "dream/core.hpp"

namespace dream::rm {

inline constexpr double kEpsilonFloor = 1e-6;

struct RewardQuery {
  std::string question_text;
  std::vector<core::Step> prior_steps;
  std::string current_text;
  core::Phase phase = core::Phase::planning;
};

struct LogitPair {
  double logit_plus = 0.0;
  double logit_minus = 0.0;
};

/// softmax(l)_+ = exp(l+) / (exp(l+) + exp(l-)), computed as the logistic of
/// (l+ - l-) so it stays stable for differences up to ~700. Rejects
/// non-finite input.
double reward_from_logits(const LogitPair& logits);

/// Inverse map used by backends that decide a probability first.
LogitPair logits_from_probability(double probability);

/// The reward model input: question, serialized prior steps, and the text
/// under evaluation, tagged with its phase.
std::string build_context(const RewardQuery& query);

/// Transport-level scoring failure; retryable.
struct RewardTransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class RewardBackend {
 public:
  virtual ~RewardBackend() = default;
  virtual LogitPair logits(const RewardQuery& query) = 0;
  virtual std::string id() const = 0;
};

struct ScoreOutcome {
  std::optional<double> reward;
  std::string error;

  bool ok() const { return reward.has_value(); }
};

/// Scores one query, retrying transport failures up to `retries` extra
/// attempts. A persistent failure yields an empty outcome; the caller
/// discards the candidate and records it in the ledger.
ScoreOutcome score(const RewardQuery& query, RewardBackend& backend, int retries = 0);

/// Order-preserving batch scoring; per-element failures are reported
/// positionally. Throws on an empty batch.
std::vector<ScoreOutcome> batch_score(const std::vector<RewardQuery>& queries,
                                      RewardBackend& backend, int retries = 0);

// ============================================================================
// Oracle backend
// ============================================================================

struct OracleNoise {
  double flip_prob = 0.0;   // chance the correct/incorrect judgment inverts
  double jitter = 0.0;      // uniform +/- jitter added to the clamped score
};

/// Judges a candidate by whether the synthetic path is still viable: a
/// planning candidate must extend a viable prefix without a dead-end tag, an
/// execution candidate must also avoid the stuck tag. Correct maps to
/// 1 - epsilon_floor and incorrect to epsilon_floor before noise. All
/// randomness derives from (query content, run seed), so scoring is
/// deterministic and batch-partition independent.
class OracleRewardBackend : public RewardBackend {
 public:
  explicit OracleRewardBackend(std::uint64_t run_seed, OracleNoise noise = {});

  LogitPair logits(const RewardQuery& query) override;
  std::string id() const override { return "oracle"; }

  bool judge(const RewardQuery& query) const;

 private:
  std::uint64_t seed_;
  OracleNoise noise_;
};

// ============================================================================
// Scripted backend
// ============================================================================

/// Replays a fixed sequence of rewards in call order. Exhausting the script
/// is an error; tests size it to the exact expected draw count.
class ScriptedRewardBackend : public RewardBackend {
 public:
  explicit ScriptedRewardBackend(std::vector<double> rewards);

  LogitPair logits(const RewardQuery& query) override;
  std::string id() const override { return "scripted"; }

  std::size_t consumed() const { return consumed_; }
  std::size_t remaining() const { return script_.size(); }

 private:
  std::deque<double> script_;
  std::size_t consumed_ = 0;
};

}  // namespace dream::rm
