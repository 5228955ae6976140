#include "dream/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "dream/generation.hpp"
#include "dream/reward.hpp"
#include "dream/search.hpp"

namespace dream::synth {

const SyntheticTaskSpec& validate_spec(const SyntheticTaskSpec& spec) {
  if (spec.steps.empty()) throw std::invalid_argument("spec has no steps");
  for (const StepDifficulty& s : spec.steps) {
    if (!(s.plan_success >= 0.0 && s.plan_success <= 1.0)) {
      throw std::invalid_argument("plan_success outside [0,1]");
    }
    if (!(s.exec_success >= 0.0 && s.exec_success <= 1.0)) {
      throw std::invalid_argument("exec_success outside [0,1]");
    }
  }
  if (spec.plan_cost <= 0) throw std::invalid_argument("plan_cost not positive");
  if (spec.exec_cost <= 0) throw std::invalid_argument("exec_cost not positive");
  return spec;
}

OracleReport closed_form_unit(const SyntheticTaskSpec& spec, int k_pairs) {
  validate_spec(spec);
  if (k_pairs < 1) throw std::invalid_argument("k_pairs must be at least 1");
  double success = 1.0;
  double cost = 0.0;
  for (const StepDifficulty& s : spec.steps) {
    success *= 1.0 - std::pow(1.0 - s.plan_success * s.exec_success, k_pairs);
    cost += static_cast<double>(k_pairs) * (spec.plan_cost + spec.exec_cost);
  }
  OracleReport r;
  r.strategy = "unit_beam";
  r.success_prob = success;
  r.expected_cost = cost;
  r.expected_plan_draws = static_cast<double>(k_pairs) * spec.steps.size();
  r.expected_exec_draws = r.expected_plan_draws;
  return r;
}

OracleReport closed_form_dual(const SyntheticTaskSpec& spec, int k1, int k2) {
  validate_spec(spec);
  if (k1 < 1 || k2 < 1) throw std::invalid_argument("k1 and k2 must be at least 1");
  double success = 1.0;
  double cost = 0.0;
  for (const StepDifficulty& s : spec.steps) {
    const double plan_hit = 1.0 - std::pow(1.0 - s.plan_success, k1);
    const double exec_hit = 1.0 - std::pow(1.0 - s.exec_success, k2);
    success *= plan_hit * exec_hit;
    cost += static_cast<double>(k1) * spec.plan_cost +
            static_cast<double>(k2) * spec.exec_cost;
  }
  OracleReport r;
  r.strategy = "dream";
  r.success_prob = success;
  r.expected_cost = cost;
  r.expected_plan_draws = static_cast<double>(k1) * spec.steps.size();
  r.expected_exec_draws = static_cast<double>(k2) * spec.steps.size();
  return r;
}

// ============================================================================
// Enumeration of the early-stop / extension automaton (beam width 1)
// ============================================================================

namespace {

// A draw scores 1 - eps when correct and eps when incorrect, so whether a
// draw counts as "above tau_1" or "below tau_2" depends only on correctness
// and on where the thresholds sit relative to the score floor.
struct ScopeModel {
  double p = 0.5;      // per-draw success probability
  int quota = 1;
  int required = 1;    // early-stop count of above-tau_1 draws
  int extension = 0;   // m
  bool correct_above_tau1 = false;
  bool incorrect_above_tau1 = false;
  bool correct_below_tau2 = false;
  bool incorrect_below_tau2 = false;
};

struct ScopeDistribution {
  double ok = 0.0;          // P(at least one correct draw kept)
  double expected_draws = 0.0;
  double early_stop = 0.0;  // P(stop rule fired within the base quota)
  double extended = 0.0;    // P(at least one extension draw happened)
};

// Exhaustive forward pass over (draws so far, correct count) states with the
// sequential stop rule absorbed exactly where it fires.
ScopeDistribution enumerate_scope(const ScopeModel& m) {
  ScopeDistribution out;

  auto above_count = [&](int correct, int total) {
    int c = 0;
    if (m.correct_above_tau1) c += correct;
    if (m.incorrect_above_tau1) c += total - correct;
    return c;
  };
  auto all_below_tau2 = [&](int correct, int total) {
    const int incorrect = total - correct;
    if (correct > 0 && !m.correct_below_tau2) return false;
    if (incorrect > 0 && !m.incorrect_below_tau2) return false;
    return true;
  };
  auto absorb = [&](double mass, int draws, int correct, bool base_pass) {
    out.expected_draws += mass * draws;
    if (correct > 0) out.ok += mass;
    if (base_pass) out.early_stop += mass;
  };

  // alive[c] = probability of reaching the current draw count with c corrects
  // and no stop yet.
  std::vector<double> alive(1, 1.0);
  for (int t = 1; t <= m.quota; ++t) {
    std::vector<double> next(t + 1, 0.0);
    for (int c = 0; c < static_cast<int>(alive.size()); ++c) {
      if (alive[c] == 0.0) continue;
      next[c + 1] += alive[c] * m.p;
      next[c] += alive[c] * (1.0 - m.p);
    }
    for (int c = 0; c <= t; ++c) {
      if (next[c] == 0.0) continue;
      if (above_count(c, t) >= m.required) {
        absorb(next[c], t, c, /*base_pass=*/true);
        next[c] = 0.0;
      }
    }
    alive.swap(next);
  }

  // Base quota exhausted without a stop: decide extension per state.
  std::vector<double> extending(alive.size(), 0.0);
  for (int c = 0; c < static_cast<int>(alive.size()); ++c) {
    if (alive[c] == 0.0) continue;
    if (m.extension > 0 && all_below_tau2(c, m.quota)) {
      extending[c] = alive[c];
      out.extended += alive[c];
    } else {
      absorb(alive[c], m.quota, c, /*base_pass=*/false);
    }
  }

  alive.swap(extending);
  for (int t = m.quota + 1; t <= m.quota + m.extension; ++t) {
    std::vector<double> next(t + 1, 0.0);
    for (int c = 0; c < static_cast<int>(alive.size()); ++c) {
      if (alive[c] == 0.0) continue;
      next[c + 1] += alive[c] * m.p;
      next[c] += alive[c] * (1.0 - m.p);
    }
    const bool last = t == m.quota + m.extension;
    for (int c = 0; c < static_cast<int>(next.size()); ++c) {
      if (next[c] == 0.0) continue;
      if (above_count(c, t) >= m.required || last) {
        absorb(next[c], t, c, /*base_pass=*/false);
        next[c] = 0.0;
      }
    }
    alive.swap(next);
  }
  return out;
}

}  // namespace

OracleReport closed_form_dream_plus(const SyntheticTaskSpec& spec,
                                    const core::SearchConfig& cfg_in) {
  validate_spec(spec);
  const core::SearchConfig cfg = core::validate_config(cfg_in);
  if (cfg.planning_beam != 1 || cfg.execution_beam != 1) {
    throw std::invalid_argument("enumeration oracle requires n1 = n2 = 1");
  }

  const double lo = rm::kEpsilonFloor;
  const double hi = 1.0 - rm::kEpsilonFloor;

  auto plan_model = [&](int step_index, double p) {
    ScopeModel m;
    m.p = p;
    m.quota = cfg.planning_budget;  // N1 and N1/n1 coincide at width 1
    m.required = step_index == 0 ? cfg.planning_beam : cfg.planning_budget;
    m.extension = cfg.planning_extension;
    m.correct_above_tau1 = hi > cfg.plan_stop_threshold;
    m.incorrect_above_tau1 = lo > cfg.plan_stop_threshold;
    m.correct_below_tau2 = hi < cfg.plan_extend_threshold;
    m.incorrect_below_tau2 = lo < cfg.plan_extend_threshold;
    return m;
  };
  auto exec_model = [&](double q) {
    ScopeModel m;
    m.p = q;
    m.quota = cfg.execution_budget;
    m.required = cfg.execution_budget;
    m.extension = cfg.execution_extension;
    m.correct_above_tau1 = hi > cfg.exec_stop_threshold;
    m.incorrect_above_tau1 = lo > cfg.exec_stop_threshold;
    m.correct_below_tau2 = hi < cfg.exec_extend_threshold;
    m.incorrect_below_tau2 = lo < cfg.exec_extend_threshold;
    return m;
  };

  const int steps = std::min<int>(cfg.max_steps, static_cast<int>(spec.steps.size()));
  const bool reaches_end = steps == static_cast<int>(spec.steps.size());

  double alive = 1.0;
  double plan_draws = 0.0;
  double exec_draws = 0.0;
  for (int s = 0; s < steps; ++s) {
    const StepDifficulty& d = spec.steps[s];
    const ScopeDistribution plan_live = enumerate_scope(plan_model(s, d.plan_success));
    const ScopeDistribution plan_dead = enumerate_scope(plan_model(s, 0.0));
    const ScopeDistribution exec_live = enumerate_scope(exec_model(d.exec_success));
    const ScopeDistribution exec_dead = enumerate_scope(exec_model(0.0));

    plan_draws += alive * plan_live.expected_draws + (1.0 - alive) * plan_dead.expected_draws;
    exec_draws += alive * (plan_live.ok * exec_live.expected_draws +
                           (1.0 - plan_live.ok) * exec_dead.expected_draws) +
                  (1.0 - alive) * exec_dead.expected_draws;
    alive *= plan_live.ok * exec_live.ok;
  }

  OracleReport r;
  r.strategy = "dream_plus";
  r.success_prob = reaches_end ? alive : 0.0;
  r.expected_plan_draws = plan_draws;
  r.expected_exec_draws = exec_draws;
  r.expected_cost = plan_draws * spec.plan_cost + exec_draws * spec.exec_cost;
  return r;
}

// ============================================================================
// Monte Carlo through the real engine
// ============================================================================

namespace {

const char* strategy_name(StrategyKind s) {
  switch (s) {
    case StrategyKind::majority_vote: return "majority";
    case StrategyKind::unit_beam: return "unit_beam";
    case StrategyKind::dream: return "dream";
    case StrategyKind::dream_plus: return "dream_plus";
  }
  return "unknown";
}

struct Accumulator {
  std::int64_t successes = 0;
  std::int64_t cost_sum = 0;
  std::int64_t cost_sq_sum = 0;
};

}  // namespace

OracleReport monte_carlo(const SyntheticTaskSpec& spec, const core::SearchConfig& cfg,
                         StrategyKind strategy, const MonteCarloOptions& options) {
  validate_spec(spec);
  core::validate_config(cfg);
  if (options.runs < 1) throw std::invalid_argument("runs must be at least 1");
  const int shards = std::max(1, options.shards);

  core::Question question;
  question.id = spec.id;
  question.text = "synthetic task " + spec.id;
  question.gold_answer = spec.answer;

  auto run_range = [&](std::int64_t begin, std::int64_t end, Accumulator& acc) {
    for (std::int64_t r = begin; r < end; ++r) {
      const std::uint64_t run_seed =
          core::hash_combine(options.seed, static_cast<std::uint64_t>(r));
      gen::SyntheticGenerationBackend backend(spec, run_seed);
      rm::OracleRewardBackend oracle(run_seed);
      search::SearchContext ctx;
      ctx.question = question;
      ctx.params.max_steps = cfg.max_steps;

      search::SearchResult result;
      switch (strategy) {
        case StrategyKind::majority_vote:
          result = search::run_majority_vote(ctx, options.majority_k, backend);
          break;
        case StrategyKind::unit_beam:
          result = search::run_unit_beam(ctx, cfg, backend, oracle);
          break;
        case StrategyKind::dream:
          result = search::run_dream(ctx, cfg, backend, oracle);
          break;
        case StrategyKind::dream_plus:
          result = search::run_dream_plus(ctx, cfg, backend, oracle);
          break;
      }
      const bool success = result.best.finished && result.best.final_answer &&
                           core::answers_match(*result.best.final_answer, spec.answer);
      const std::int64_t cost = result.ledger.total_tokens();
      acc.successes += success ? 1 : 0;
      acc.cost_sum += cost;
      acc.cost_sq_sum += cost * cost;
    }
  };

  std::vector<Accumulator> accs(shards);
  if (shards == 1) {
    run_range(0, options.runs, accs[0]);
  } else {
    std::vector<std::thread> threads;
    const std::int64_t chunk = (options.runs + shards - 1) / shards;
    for (int s = 0; s < shards; ++s) {
      const std::int64_t begin = s * chunk;
      const std::int64_t end = std::min<std::int64_t>(options.runs, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back([&, begin, end, s] { run_range(begin, end, accs[s]); });
    }
    for (std::thread& t : threads) t.join();
  }

  Accumulator total;
  for (const Accumulator& a : accs) {
    total.successes += a.successes;
    total.cost_sum += a.cost_sum;
    total.cost_sq_sum += a.cost_sq_sum;
  }

  const double n = static_cast<double>(options.runs);
  OracleReport r;
  r.strategy = strategy_name(strategy);
  r.runs = options.runs;
  r.success_prob = static_cast<double>(total.successes) / n;
  r.expected_cost = static_cast<double>(total.cost_sum) / n;
  r.success_stderr = std::sqrt(r.success_prob * (1.0 - r.success_prob) / n);
  const double mean_sq = static_cast<double>(total.cost_sq_sum) / n;
  const double var = std::max(0.0, mean_sq - r.expected_cost * r.expected_cost);
  r.cost_stderr = std::sqrt(var / n);
  return r;
}

}  // namespace dream::synth
