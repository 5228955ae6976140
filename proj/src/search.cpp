#include "dream/search.hpp"

#include <algorithm>
#include <cassert>
#include <map>

namespace dream::search {

namespace {

using budget::RawDraw;
using budget::ScopeSpec;
using budget::ScoredDraw;

int per_beam_quota(int total_budget, int width) { return total_budget / width; }

PhaseOutcome finish_phase(std::vector<core::ScoredCandidate> pool,
                          const std::vector<core::ScopeStats>& scope_stats, int keep,
                          int step, const char* phase_label) {
  PhaseOutcome out;
  for (const core::ScopeStats& s : scope_stats) {
    out.drawn += static_cast<int>(s.drawn);
    out.extended = out.extended || s.extended;
  }
  out.early_stopped =
      !scope_stats.empty() &&
      std::all_of(scope_stats.begin(), scope_stats.end(),
                  [](const core::ScopeStats& s) { return s.early_stopped; });
  if (pool.empty()) {
    throw SearchError("no " + std::string(phase_label) + " candidates at step " +
                      std::to_string(step));
  }
  out.accepted = select_top(std::move(pool), keep);
  return out;
}

std::vector<RawDraw> to_draws(gen::GenResult r) {
  std::vector<RawDraw> draws;
  draws.reserve(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    draws.push_back(RawDraw{std::move(r.texts[i]), "", r.token_counts[i],
                            static_cast<bool>(r.finished_flags[i])});
  }
  return draws;
}

}  // namespace

std::vector<core::ScoredCandidate> select_top(std::vector<core::ScoredCandidate> pool,
                                              int k) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  std::sort(pool.begin(), pool.end(),
            [](const core::ScoredCandidate& a, const core::ScoredCandidate& b) {
              if (a.reward != b.reward) return a.reward > b.reward;
              return a.sample_index < b.sample_index;
            });
  if (pool.size() > static_cast<std::size_t>(k)) pool.resize(k);
  return pool;
}

PhaseOutcome expand_planning(const SearchContext& ctx,
                             const std::vector<core::Trajectory>& beams, int step,
                             const core::SearchConfig& cfg,
                             gen::GenerationBackend& backend, rm::RewardBackend& reward,
                             core::BudgetLedger& ledger) {
  // Finished beams pass through unexpanded; at least one beam must be open.
  std::vector<const core::Trajectory*> open;
  for (const core::Trajectory& b : beams) {
    if (!b.finished) open.push_back(&b);
  }
  if (open.empty()) throw std::invalid_argument("no unfinished beams to expand");

  // Step 1 samples one global pool of up to N1 and needs n1 above tau_p1 to
  // stop; later steps sample N1/n1 per beam and the per-beam stop requires
  // N1/n1 above threshold.
  struct Job {
    const core::Trajectory* prefix;
    ScopeSpec spec;
  };
  std::vector<Job> jobs;
  if (step == 1) {
    if (open.size() != 1) {
      throw std::invalid_argument("step 1 expands a single root beam");
    }
    jobs.push_back(Job{open.front(),
                       ScopeSpec{cfg.planning_budget, cfg.planning_beam,
                                 cfg.plan_stop_threshold, cfg.plan_extend_threshold,
                                 cfg.planning_extension}});
  } else {
    const int quota = per_beam_quota(cfg.planning_budget, cfg.planning_beam);
    for (const core::Trajectory* b : open) {
      jobs.push_back(Job{b, ScopeSpec{quota, quota, cfg.plan_stop_threshold,
                                      cfg.plan_extend_threshold,
                                      cfg.planning_extension}});
    }
  }

  std::vector<core::ScoredCandidate> pool;
  std::vector<core::ScopeStats> stats;
  int next_index = 0;
  for (const Job& job : jobs) {
    const core::Trajectory& prefix = *job.prefix;
    budget::DrawFn draw = [&](int first, int count) {
      return to_draws(gen::sample_plans(ctx.question.text, prefix, count, backend,
                                        ctx.params, first));
    };
    budget::ScoreFn scorer = [&](const RawDraw& d) {
      rm::RewardQuery q{ctx.question.text, prefix.steps, d.text, core::Phase::planning};
      return rm::score(q, reward, ctx.score_retries);
    };
    budget::ScopeOutcome scope = budget::run_scope(job.spec, ctx.sampling, draw, scorer);
    ledger.record_scope(step, core::Phase::planning, scope.stats);
    stats.push_back(scope.stats);
    for (ScoredDraw& kept : scope.kept) {
      core::ScoredCandidate c;
      c.prefix = prefix;
      c.phase = core::Phase::planning;
      c.new_plan = std::move(kept.draw.text);
      c.reward = kept.reward;
      c.sample_index = next_index++;
      pool.push_back(std::move(c));
    }
  }
  return finish_phase(std::move(pool), stats, cfg.planning_beam, step, "planning");
}

PhaseOutcome expand_execution(const SearchContext& ctx,
                              const std::vector<PlannedBeam>& beams, int step,
                              const core::SearchConfig& cfg,
                              gen::GenerationBackend& backend, rm::RewardBackend& reward,
                              core::BudgetLedger& ledger) {
  if (beams.empty()) throw std::invalid_argument("no planned beams to expand");
  for (const PlannedBeam& b : beams) {
    if (b.plan.empty()) throw std::invalid_argument("beam without a selected plan");
  }

  const int quota = per_beam_quota(cfg.execution_budget, cfg.execution_beam);
  std::vector<core::ScoredCandidate> pool;
  std::vector<core::ScopeStats> stats;
  int next_index = 0;
  for (const PlannedBeam& beam : beams) {
    const ScopeSpec spec{quota, quota, cfg.exec_stop_threshold,
                         cfg.exec_extend_threshold, cfg.execution_extension};
    budget::DrawFn draw = [&](int first, int count) {
      return to_draws(gen::sample_executions(ctx.question.text, beam.prefix, beam.plan,
                                             count, backend, ctx.params, first));
    };
    budget::ScoreFn scorer = [&](const RawDraw& d) {
      std::vector<core::Step> prior = beam.prefix.steps;
      prior.push_back(core::Step{beam.plan, "", beam.plan_reward, {}});
      rm::RewardQuery q{ctx.question.text, std::move(prior), d.text,
                        core::Phase::execution};
      return rm::score(q, reward, ctx.score_retries);
    };
    budget::ScopeOutcome scope = budget::run_scope(spec, ctx.sampling, draw, scorer);
    ledger.record_scope(step, core::Phase::execution, scope.stats);
    stats.push_back(scope.stats);
    for (ScoredDraw& kept : scope.kept) {
      core::ScoredCandidate c;
      c.prefix = beam.prefix;
      c.phase = core::Phase::execution;
      c.new_plan = beam.plan;
      c.new_execution = std::move(kept.draw.text);
      c.new_plan_reward = beam.plan_reward;
      c.reward = kept.reward;
      c.sample_index = next_index++;
      pool.push_back(std::move(c));
    }
  }
  return finish_phase(std::move(pool), stats, cfg.execution_beam, step, "execution");
}

// ----------------------------------------------------------------------------
// Strategies
// ----------------------------------------------------------------------------

namespace {

struct BeamState {
  core::Trajectory traj;
  double last_reward = 0.0;
  int last_index = 0;
};

core::Trajectory make_root(const core::Question& q) {
  core::Trajectory t;
  t.question_id = q.id;
  return t;
}

SearchResult finalize(std::vector<BeamState> finished, std::vector<BeamState> open,
                      core::BudgetLedger ledger, int steps_taken) {
  std::vector<BeamState> all = std::move(finished);
  all.insert(all.end(), std::make_move_iterator(open.begin()),
             std::make_move_iterator(open.end()));
  assert(!all.empty());
  std::size_t best = 0;
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i].last_reward > all[best].last_reward ||
        (all[i].last_reward == all[best].last_reward &&
         all[i].last_index < all[best].last_index)) {
      best = i;
    }
  }
  SearchResult result;
  result.best = all[best].traj;
  result.beam_final.reserve(all.size());
  for (BeamState& b : all) result.beam_final.push_back(std::move(b.traj));
  result.ledger = std::move(ledger);
  result.steps_taken = steps_taken;
  return result;
}

BeamState candidate_to_beam(const core::ScoredCandidate& c) {
  BeamState b;
  b.traj = c.prefix;
  core::Step step;
  step.plan = c.new_plan;
  step.execution = c.new_execution.value_or("");
  step.plan_reward = c.new_plan_reward;
  step.exec_reward = c.reward;
  b.traj.steps.push_back(std::move(step));
  if (c.new_execution && gen::contains_final_answer(*c.new_execution)) {
    b.traj.finished = true;
    b.traj.final_answer = gen::extract_final_answer(*c.new_execution);
  }
  b.last_reward = c.reward;
  b.last_index = c.sample_index;
  return b;
}

}  // namespace

SearchResult run_dream_plus(const SearchContext& ctx, const core::SearchConfig& cfg_in,
                            gen::GenerationBackend& backend,
                            rm::RewardBackend& reward) {
  const core::SearchConfig cfg = core::validate_config(cfg_in);
  core::BudgetLedger ledger;
  std::vector<BeamState> open;
  open.push_back(BeamState{make_root(ctx.question), 0.0, 0});
  std::vector<BeamState> finished;
  int steps_taken = 0;

  for (int step = 1; step <= cfg.max_steps && !open.empty(); ++step) {
    steps_taken = step;
    std::vector<core::Trajectory> beams;
    beams.reserve(open.size());
    for (const BeamState& b : open) beams.push_back(b.traj);

    const PhaseOutcome plans =
        expand_planning(ctx, beams, step, cfg, backend, reward, ledger);
    std::vector<PlannedBeam> planned;
    planned.reserve(plans.accepted.size());
    for (const core::ScoredCandidate& c : plans.accepted) {
      planned.push_back(PlannedBeam{c.prefix, c.new_plan, c.reward, c.sample_index});
    }

    const PhaseOutcome execs =
        expand_execution(ctx, planned, step, cfg, backend, reward, ledger);
    open.clear();
    for (const core::ScoredCandidate& c : execs.accepted) {
      BeamState b = candidate_to_beam(c);
      if (b.traj.finished) {
        finished.push_back(std::move(b));
      } else {
        open.push_back(std::move(b));
      }
    }
  }
  return finalize(std::move(finished), std::move(open), std::move(ledger), steps_taken);
}

SearchResult run_dream(const SearchContext& ctx, const core::SearchConfig& cfg,
                       gen::GenerationBackend& backend, rm::RewardBackend& reward) {
  return run_dream_plus(ctx, core::disable_budget_rules(core::validate_config(cfg)),
                        backend, reward);
}

SearchResult run_unit_beam(const SearchContext& ctx, const core::SearchConfig& cfg_in,
                           gen::GenerationBackend& backend,
                           rm::RewardBackend& reward) {
  const core::SearchConfig cfg = core::validate_config(cfg_in);
  core::BudgetLedger ledger;
  std::vector<BeamState> open;
  open.push_back(BeamState{make_root(ctx.question), 0.0, 0});
  std::vector<BeamState> finished;
  int steps_taken = 0;

  for (int step = 1; step <= cfg.max_steps && !open.empty(); ++step) {
    steps_taken = step;
    std::vector<core::ScoredCandidate> pool;
    std::vector<core::ScopeStats> stats;
    int next_index = 0;

    const int quota = step == 1
                          ? cfg.execution_budget
                          : per_beam_quota(cfg.execution_budget, cfg.execution_beam);
    const int required = step == 1
                             ? cfg.execution_beam
                             : per_beam_quota(cfg.execution_budget, cfg.execution_beam);
    const std::size_t scope_count = step == 1 ? 1 : open.size();

    for (std::size_t bi = 0; bi < scope_count; ++bi) {
      const core::Trajectory& prefix = open[bi].traj;
      const ScopeSpec spec{quota, required, cfg.exec_stop_threshold,
                           cfg.exec_extend_threshold, cfg.execution_extension};
      // One unit draw = a whole pair: a plan and the execution sampled under
      // it, charged together and scored as a single candidate.
      budget::DrawFn draw = [&](int first, int count) {
        std::vector<RawDraw> draws;
        draws.reserve(count);
        for (int j = 0; j < count; ++j) {
          gen::GenResult p = gen::sample_plans(ctx.question.text, prefix, 1, backend,
                                               ctx.params, first + j);
          if (p.texts.empty()) break;
          gen::GenResult e = gen::sample_executions(ctx.question.text, prefix,
                                                    p.texts[0], 1, backend, ctx.params,
                                                    0);
          if (e.texts.empty()) break;
          draws.push_back(RawDraw{std::move(p.texts[0]), std::move(e.texts[0]),
                                  p.token_counts[0] + e.token_counts[0],
                                  static_cast<bool>(e.finished_flags[0])});
        }
        return draws;
      };
      budget::ScoreFn scorer = [&](const RawDraw& d) {
        rm::RewardQuery q{ctx.question.text, prefix.steps, d.text + "\n" + d.exec_part,
                          core::Phase::execution};
        return rm::score(q, reward, ctx.score_retries);
      };
      budget::ScopeOutcome scope = budget::run_scope(spec, ctx.sampling, draw, scorer);
      ledger.record_scope(step, core::Phase::execution, scope.stats);
      stats.push_back(scope.stats);
      for (ScoredDraw& kept : scope.kept) {
        core::ScoredCandidate c;
        c.prefix = prefix;
        c.phase = core::Phase::execution;
        c.new_plan = std::move(kept.draw.text);
        c.new_execution = std::move(kept.draw.exec_part);
        c.reward = kept.reward;
        c.sample_index = next_index++;
        pool.push_back(std::move(c));
      }
    }

    const PhaseOutcome outcome =
        finish_phase(std::move(pool), stats, cfg.execution_beam, step, "pair");
    open.clear();
    for (const core::ScoredCandidate& c : outcome.accepted) {
      BeamState b = candidate_to_beam(c);
      b.traj.steps.back().plan_reward.reset();  // pairs carry one joint score
      if (b.traj.finished) {
        finished.push_back(std::move(b));
      } else {
        open.push_back(std::move(b));
      }
    }
  }
  return finalize(std::move(finished), std::move(open), std::move(ledger), steps_taken);
}

SearchResult run_majority_vote(const SearchContext& ctx, int k,
                               gen::GenerationBackend& backend) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  gen::GenResult raw;
  const std::vector<core::Trajectory> trajectories =
      gen::sample_full_trajectories(ctx.question, k, backend, ctx.params, &raw);

  core::BudgetLedger ledger;
  int steps_taken = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    core::ScopeStats stats;
    stats.drawn = 1;
    stats.tokens = i < raw.token_counts.size() ? raw.token_counts[i] : 0;
    ledger.record_scope(1, core::Phase::execution, stats);
    steps_taken = std::max(steps_taken, static_cast<int>(trajectories[i].steps.size()));
  }

  // Modal canonical answer; a tie goes to the earliest-sampled trajectory
  // among the tied answers.
  std::map<std::string, std::pair<int, std::size_t>> votes;  // count, first index
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (!trajectories[i].finished || !trajectories[i].final_answer) continue;
    const std::string key = core::canonical_answer(*trajectories[i].final_answer);
    auto [it, inserted] = votes.try_emplace(key, 0, i);
    it->second.first += 1;
  }

  SearchResult result;
  result.ledger = std::move(ledger);
  result.steps_taken = steps_taken;
  result.beam_final = trajectories;
  if (votes.empty()) {
    result.best = trajectories.front();  // nothing finished; flagged as such
    return result;
  }
  std::size_t winner = trajectories.size();
  int best_count = -1;
  for (const auto& [key, entry] : votes) {
    const auto [count, first] = entry;
    if (count > best_count || (count == best_count && first < winner)) {
      best_count = count;
      winner = first;
    }
  }
  result.best = trajectories[winner];
  return result;
}

}  // namespace dream::search
