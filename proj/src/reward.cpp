#include "dream/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dream/generation.hpp"

namespace dream::rm {

double reward_from_logits(const LogitPair& logits) {
  if (!std::isfinite(logits.logit_plus) || !std::isfinite(logits.logit_minus)) {
    throw std::invalid_argument("non-finite logits");
  }
  const double d = logits.logit_plus - logits.logit_minus;
  if (d >= 0.0) {
    return 1.0 / (1.0 + std::exp(-d));
  }
  const double e = std::exp(d);
  return e / (1.0 + e);
}

LogitPair logits_from_probability(double probability) {
  const double p = std::clamp(probability, kEpsilonFloor, 1.0 - kEpsilonFloor);
  const double d = std::log(p / (1.0 - p));
  return LogitPair{d / 2.0, -d / 2.0};
}

std::string build_context(const RewardQuery& query) {
  std::string out = "Question: " + query.question_text + "\n";
  out += gen::serialize_steps(query.prior_steps);
  out += query.phase == core::Phase::planning ? "Plan: " : "Execution: ";
  out += query.current_text;
  return out;
}

ScoreOutcome score(const RewardQuery& query, RewardBackend& backend, int retries) {
  if (query.current_text.empty()) {
    return ScoreOutcome{{}, "empty candidate text"};
  }
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    try {
      return ScoreOutcome{reward_from_logits(backend.logits(query)), ""};
    } catch (const RewardTransportError& e) {
      last_error = e.what();
    } catch (const std::exception& e) {
      return ScoreOutcome{{}, e.what()};  // not retryable
    }
  }
  return ScoreOutcome{{}, last_error};
}

std::vector<ScoreOutcome> batch_score(const std::vector<RewardQuery>& queries,
                                      RewardBackend& backend, int retries) {
  if (queries.empty()) throw std::invalid_argument("empty batch");
  std::vector<ScoreOutcome> out;
  out.reserve(queries.size());
  for (const RewardQuery& q : queries) out.push_back(score(q, backend, retries));
  return out;
}

// ============================================================================
// Oracle backend
// ============================================================================

OracleRewardBackend::OracleRewardBackend(std::uint64_t run_seed, OracleNoise noise)
    : seed_(core::hash_combine(run_seed, 0x6f7261636cULL)), noise_(noise) {}

bool OracleRewardBackend::judge(const RewardQuery& query) const {
  core::Trajectory prefix;
  prefix.steps = query.prior_steps;
  if (!gen::trajectory_viable(prefix)) return false;
  if (query.phase == core::Phase::planning) {
    return gen::plan_viable(query.current_text);
  }
  // Execution candidates may be a bare execution or a concatenated
  // plan+execution pair; both tags must be absent either way.
  return gen::plan_viable(query.current_text) &&
         gen::execution_viable(query.current_text);
}

LogitPair OracleRewardBackend::logits(const RewardQuery& query) {
  bool correct = judge(query);
  double jitter = 0.0;
  if (noise_.flip_prob > 0.0 || noise_.jitter > 0.0) {
    const std::uint64_t h =
        core::hash_combine(seed_, core::fnv1a(build_context(query)));
    if (noise_.flip_prob > 0.0 &&
        core::unit_uniform(core::hash_combine(h, 1)) < noise_.flip_prob) {
      correct = !correct;
    }
    if (noise_.jitter > 0.0) {
      jitter = (core::unit_uniform(core::hash_combine(h, 2)) * 2.0 - 1.0) * noise_.jitter;
    }
  }
  const double base = correct ? 1.0 - kEpsilonFloor : kEpsilonFloor;
  return logits_from_probability(base + jitter);
}

// ============================================================================
// Scripted backend
// ============================================================================

ScriptedRewardBackend::ScriptedRewardBackend(std::vector<double> rewards)
    : script_(rewards.begin(), rewards.end()) {}

LogitPair ScriptedRewardBackend::logits(const RewardQuery& query) {
  (void)query;
  if (script_.empty()) throw std::runtime_error("scripted reward stream exhausted");
  const double r = script_.front();
  script_.pop_front();
  ++consumed_;
  return logits_from_probability(r);
}

}  // namespace dream::rm
