#include <doctest.h>

#include <cmath>
#include <random>

#include "dream/budget.hpp"
#include "dream/search.hpp"
#include "test_helpers.hpp"

using namespace dream;

namespace {

core::ScoredCandidate cand(double reward, int index) {
  core::ScoredCandidate c;
  c.reward = reward;
  c.sample_index = index;
  c.new_plan = "p" + std::to_string(index);
  return c;
}

search::SearchContext plain_ctx(const synth::SyntheticTaskSpec& spec) {
  return testutil::make_ctx(spec);
}

bool same_result(const search::SearchResult& a, const search::SearchResult& b) {
  return a.best == b.best && a.beam_final == b.beam_final &&
         a.steps_taken == b.steps_taken && a.ledger.entries() == b.ledger.entries();
}

}  // namespace

TEST_SUITE("search") {

TEST_CASE("select_top keeps the highest rewards with draw-order ties") {
  auto top = search::select_top({cand(0.3, 0), cand(0.9, 1), cand(0.7, 2)}, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].reward == 0.9);
  CHECK(top[1].reward == 0.7);

  top = search::select_top({cand(0.5, 0), cand(0.5, 1)}, 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].sample_index == 0);

  top = search::select_top({cand(0.4, 0)}, 3);
  CHECK(top.size() == 1);

  CHECK(search::select_top({}, 2).empty());
  CHECK_THROWS_AS(search::select_top({cand(0.4, 0)}, 0), std::invalid_argument);
}

TEST_CASE("step-1 planning stops early once n1 candidates clear tau_p1") {
  const auto spec = testutil::flat_spec(1, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 3);
  rm::ScriptedRewardBackend rewards({0.95, 0.5, 0.92});
  auto cfg = testutil::make_config(8, 2, 8, 2, 2, 0, 0.9, 0.2, 0.9, 0.2);
  core::BudgetLedger ledger;
  core::Trajectory root;

  const search::PhaseOutcome out = search::expand_planning(
      plain_ctx(spec), {root}, 1, cfg, backend, rewards, ledger);
  CHECK(out.drawn == 3);
  CHECK(out.early_stopped);
  CHECK_FALSE(out.extended);
  REQUIRE(out.accepted.size() == 2);
  CHECK(out.accepted[0].reward == doctest::Approx(0.95).epsilon(1e-9));
  CHECK(out.accepted[1].reward == doctest::Approx(0.92).epsilon(1e-9));
  CHECK(rewards.remaining() == 0);

  const core::LedgerEntry& entry =
      ledger.entries().at(core::LedgerKey{1, core::Phase::planning});
  CHECK(entry.samples_drawn == 3);
  CHECK(entry.early_stopped);
}

TEST_CASE("step-1 planning extends when the whole quota scores below tau_p2") {
  const auto spec = testutil::flat_spec(1, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 3);
  rm::ScriptedRewardBackend rewards({0.1, 0.15, 0.05, 0.12, 0.18, 0.11});
  auto cfg = testutil::make_config(4, 2, 8, 2, 2, 0, 0.9, 0.2, 0.9, 0.2);
  core::BudgetLedger ledger;
  core::Trajectory root;

  const search::PhaseOutcome out = search::expand_planning(
      plain_ctx(spec), {root}, 1, cfg, backend, rewards, ledger);
  CHECK(out.drawn == 6);
  CHECK(out.extended);
  CHECK_FALSE(out.early_stopped);
  REQUIRE(out.accepted.size() == 2);
  CHECK(out.accepted[0].reward == doctest::Approx(0.18).epsilon(1e-9));
  CHECK(out.accepted[1].reward == doctest::Approx(0.15).epsilon(1e-9));

  const core::LedgerEntry& entry =
      ledger.entries().at(core::LedgerKey{1, core::Phase::planning});
  CHECK(entry.extension_samples == 2);
  CHECK(entry.extended);
  CHECK_FALSE(entry.early_stopped);
}

TEST_CASE("execution early stop fires when the per-beam quota all clears tau_e1") {
  const auto spec = testutil::flat_spec(2, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 5);
  rm::ScriptedRewardBackend rewards({0.91, 0.93});
  auto cfg = testutil::make_config(8, 2, 4, 2, 0, 0, 1.0, 0.0, 0.9, 0.2);
  core::BudgetLedger ledger;

  core::Trajectory root;
  const gen::GenResult plan = gen::sample_plans("q", root, 1, backend, {});
  search::PlannedBeam beam{root, plan.texts[0], 0.95, 0};

  const search::PhaseOutcome out = search::expand_execution(
      plain_ctx(spec), {beam}, 1, cfg, backend, rewards, ledger);
  CHECK(out.drawn == 2);
  CHECK(out.early_stopped);
  REQUIRE(out.accepted.size() == 2);
  CHECK(out.accepted[0].reward == doctest::Approx(0.93).epsilon(1e-9));
}

TEST_CASE("execution selection is a global top-k across beams") {
  const auto spec = testutil::flat_spec(2, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 6);
  rm::ScriptedRewardBackend rewards({0.8, 0.6, 0.7, 0.5});
  auto cfg = testutil::make_config(8, 2, 4, 2);  // thresholds disabled
  core::BudgetLedger ledger;

  core::Trajectory root;
  const gen::GenResult plans = gen::sample_plans("q", root, 2, backend, {});
  std::vector<search::PlannedBeam> beams = {
      {root, plans.texts[0], 0.9, 0},
      {root, plans.texts[1], 0.9, 1},
  };
  const search::PhaseOutcome out = search::expand_execution(
      plain_ctx(spec), beams, 1, cfg, backend, rewards, ledger);
  CHECK(out.drawn == 4);
  REQUIRE(out.accepted.size() == 2);
  CHECK(out.accepted[0].reward == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(out.accepted[1].reward == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("budget automaton invariants over random scopes") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    budget::ScopeSpec spec;
    spec.quota = 1 + static_cast<int>(rng() % 6);
    spec.required_above = 1 + static_cast<int>(rng() % spec.quota);
    spec.tau1 = 0.2 + 0.7 * uniform(rng);
    spec.tau2 = spec.tau1 * uniform(rng);
    spec.extension_limit = static_cast<int>(rng() % 4);

    std::deque<double> stream;
    for (int i = 0; i < spec.quota + spec.extension_limit + 4; ++i) {
      stream.push_back(uniform(rng));
    }
    budget::DrawFn draw = [&](int first, int count) {
      std::vector<budget::RawDraw> out;
      for (int i = 0; i < count; ++i) {
        out.push_back(budget::RawDraw{"text" + std::to_string(first + i), "", 1, false});
      }
      return out;
    };
    std::deque<double> replay = stream;
    budget::ScoreFn score = [&](const budget::RawDraw&) {
      const double r = replay.front();
      replay.pop_front();
      return rm::ScoreOutcome{r, ""};
    };
    const auto mode = trial % 2 == 0 ? budget::SamplingMode::overrequest
                                     : budget::SamplingMode::sequential;
    const budget::ScopeOutcome out = budget::run_scope(spec, mode, draw, score);

    CHECK(out.stats.drawn <= spec.quota + spec.extension_limit);
    CHECK(out.kept.size() <= static_cast<std::size_t>(out.stats.drawn));
    CHECK_FALSE((out.stats.early_stopped && out.stats.extended));

    if (out.stats.early_stopped) {
      CHECK(out.stats.drawn <= spec.quota);
      int above = 0;
      for (const auto& k : out.kept) above += k.reward > spec.tau1 ? 1 : 0;
      CHECK(above == spec.required_above);
      CHECK(out.stats.extension_samples == 0);
    }
    if (out.stats.extended) {
      CHECK(out.stats.drawn > spec.quota);
      CHECK(out.stats.extension_samples == out.stats.drawn - spec.quota);
      int base_kept = 0;
      for (const auto& k : out.kept) {
        if (base_kept < spec.quota) CHECK(k.reward < spec.tau2);
        ++base_kept;
        if (base_kept == spec.quota) break;
      }
    }
    if (!out.stats.early_stopped && !out.stats.extended) {
      CHECK(out.stats.drawn == spec.quota);
    }
  }
}

TEST_CASE("accepted plan is correct with probability 1-(1-p)^2") {
  // p = 0.5, two draws, perfect oracle: 0.75 by enumeration.
  const auto cfg = testutil::make_config(2, 1, 2, 1);
  int viable = 0;
  const int runs = 20000;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t seed = core::hash_combine(555, r);
    const auto spec = testutil::flat_spec(1, 0.5, 1.0);
    gen::SyntheticGenerationBackend backend(spec, seed);
    rm::OracleRewardBackend oracle(seed);
    core::BudgetLedger ledger;
    core::Trajectory root;
    const search::PhaseOutcome out = search::expand_planning(
        plain_ctx(spec), {root}, 1, cfg, backend, oracle, ledger);
    viable += gen::plan_viable(out.accepted[0].new_plan) ? 1 : 0;
  }
  const double fraction = static_cast<double>(viable) / runs;
  CHECK(std::abs(fraction - 0.75) <= 3.0 * std::sqrt(0.75 * 0.25 / runs));
}

TEST_CASE("accepted execution is correct with probability 1-(1-q)^2") {
  const auto cfg = testutil::make_config(2, 1, 2, 1);
  int viable = 0;
  const int runs = 20000;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t seed = core::hash_combine(777, r);
    const auto spec = testutil::flat_spec(2, 1.0, 0.5);
    gen::SyntheticGenerationBackend backend(spec, seed);
    rm::OracleRewardBackend oracle(seed);
    core::BudgetLedger ledger;
    core::Trajectory root;
    const gen::GenResult plan = gen::sample_plans("q", root, 1, backend, {});
    search::PlannedBeam beam{root, plan.texts[0], 1.0 - rm::kEpsilonFloor, 0};
    const search::PhaseOutcome out = search::expand_execution(
        plain_ctx(spec), {beam}, 1, cfg, backend, oracle, ledger);
    viable += gen::execution_viable(*out.accepted[0].new_execution) ? 1 : 0;
  }
  const double fraction = static_cast<double>(viable) / runs;
  CHECK(std::abs(fraction - 0.75) <= 3.0 * std::sqrt(0.75 * 0.25 / runs));
}

TEST_CASE("degenerate single-step task succeeds in one step") {
  const auto spec = testutil::flat_spec(1, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 9);
  rm::OracleRewardBackend oracle(9);
  const auto cfg = testutil::make_config(4, 2, 4, 2, 0, 0, 0.5, 0.2, 0.5, 0.2);
  const search::SearchResult result =
      search::run_dream_plus(plain_ctx(spec), cfg, backend, oracle);
  CHECK(result.steps_taken == 1);
  CHECK(result.best.finished);
  CHECK(result.best.final_answer == "42");
}

TEST_CASE("thresholds at the score ceiling reduce to the fixed-budget ledger") {
  const auto spec = testutil::flat_spec(3, 0.6, 0.6);
  const auto cfg_plus = testutil::make_config(4, 2, 4, 2, 0, 0, 1.0 - rm::kEpsilonFloor,
                                              0.0, 1.0 - rm::kEpsilonFloor, 0.0);
  gen::SyntheticGenerationBackend b1(spec, 21);
  rm::OracleRewardBackend o1(21);
  const search::SearchResult plus =
      search::run_dream_plus(plain_ctx(spec), cfg_plus, b1, o1);

  gen::SyntheticGenerationBackend b2(spec, 21);
  rm::OracleRewardBackend o2(21);
  const search::SearchResult dream =
      search::run_dream(plain_ctx(spec), cfg_plus, b2, o2);
  CHECK(plus.ledger.entries() == dream.ledger.entries());
  CHECK(same_result(plus, dream));
}

TEST_CASE("dream draws the exact quota everywhere") {
  const auto spec = testutil::flat_spec(3, 0.5, 0.5);
  gen::SyntheticGenerationBackend backend(spec, 33);
  rm::OracleRewardBackend oracle(33);
  const auto cfg =
      testutil::make_config(4, 2, 4, 2, 3, 3, 0.9, 0.3, 0.9, 0.3, 10);
  const search::SearchResult result =
      search::run_dream(plain_ctx(spec), cfg, backend, oracle);

  for (int step = 1; step <= 3; ++step) {
    const core::LedgerEntry& plan_entry =
        result.ledger.entries().at(core::LedgerKey{step, core::Phase::planning});
    CHECK(plan_entry.samples_drawn == 4);  // N1 at step 1, 2 beams x N1/n1 later
    CHECK_FALSE(plan_entry.early_stopped);
    CHECK_FALSE(plan_entry.extended);
    CHECK(plan_entry.extension_samples == 0);
    const core::LedgerEntry& exec_entry =
        result.ledger.entries().at(core::LedgerKey{step, core::Phase::execution});
    CHECK(exec_entry.samples_drawn == 4);  // 2 beams x N2/n2
    CHECK_FALSE(exec_entry.early_stopped);
  }
}

TEST_CASE("run_dream ignores configured thresholds entirely") {
  const auto spec = testutil::flat_spec(2, 0.7, 0.7);
  const auto cfg = testutil::make_config(4, 2, 4, 2, 2, 2, 0.6, 0.3, 0.6, 0.3);
  gen::SyntheticGenerationBackend b1(spec, 51);
  rm::OracleRewardBackend o1(51);
  const search::SearchResult via_dream =
      search::run_dream(plain_ctx(spec), cfg, b1, o1);

  gen::SyntheticGenerationBackend b2(spec, 51);
  rm::OracleRewardBackend o2(51);
  const search::SearchResult via_plus = search::run_dream_plus(
      plain_ctx(spec), core::disable_budget_rules(cfg), b2, o2);
  CHECK(same_result(via_dream, via_plus));
}

TEST_CASE("over-request and sequential modes agree") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = testutil::flat_spec(2 + static_cast<int>(rng() % 2),
                                          0.3 + 0.6 * (rng() % 100) / 100.0,
                                          0.3 + 0.6 * (rng() % 100) / 100.0);
    const auto cfg = testutil::make_config(4, 2, 4, 2, 1, 1, 0.5, 0.25, 0.5, 0.25);
    const std::uint64_t seed = rng();

    search::SearchContext over = plain_ctx(spec);
    over.sampling = search::SamplingMode::overrequest;
    gen::SyntheticGenerationBackend b1(spec, seed);
    rm::OracleRewardBackend o1(seed);
    const search::SearchResult a = search::run_dream_plus(over, cfg, b1, o1);

    search::SearchContext seq = plain_ctx(spec);
    seq.sampling = search::SamplingMode::sequential;
    gen::SyntheticGenerationBackend b2(spec, seed);
    rm::OracleRewardBackend o2(seed);
    const search::SearchResult b = search::run_dream_plus(seq, cfg, b2, o2);
    CHECK(same_result(a, b));
  }
}

TEST_CASE("unit beam succeeds surely on a deterministic task") {
  const auto spec = testutil::flat_spec(2, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 71);
  rm::OracleRewardBackend oracle(71);
  const auto cfg = testutil::make_config(4, 2, 4, 2);
  const search::SearchResult result =
      search::run_unit_beam(plain_ctx(spec), cfg, backend, oracle);
  CHECK(result.best.finished);
  CHECK(result.best.final_answer == "42");
}

TEST_CASE("unit beam charges k pairs' worth of tokens per step") {
  auto spec = testutil::flat_spec(2, 1.0, 1.0);
  spec.plan_cost = 2;
  spec.exec_cost = 3;
  gen::SyntheticGenerationBackend backend(spec, 73);
  rm::OracleRewardBackend oracle(73);
  const auto cfg = testutil::make_config(4, 2, 4, 2);
  const search::SearchResult result =
      search::run_unit_beam(plain_ctx(spec), cfg, backend, oracle);
  for (int step = 1; step <= 2; ++step) {
    const core::LedgerEntry& entry =
        result.ledger.entries().at(core::LedgerKey{step, core::Phase::execution});
    CHECK(entry.samples_drawn == 4);
    CHECK(entry.tokens_charged == 4 * (2 + 3));
  }
  CHECK(result.ledger.entries().count(core::LedgerKey{1, core::Phase::planning}) == 0);
}

TEST_CASE("unit beam per-step success matches 1-(1-pq)^k") {
  // p = q = 0.5, k = 2 pairs: 0.4375 by enumeration.
  const auto cfg = testutil::make_config(2, 1, 2, 1);
  int correct = 0;
  const int runs = 20000;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t seed = core::hash_combine(881, r);
    const auto spec = testutil::flat_spec(1, 0.5, 0.5);
    gen::SyntheticGenerationBackend backend(spec, seed);
    rm::OracleRewardBackend oracle(seed);
    const search::SearchResult result =
        search::run_unit_beam(plain_ctx(spec), cfg, backend, oracle);
    correct += result.best.final_answer == "42" ? 1 : 0;
  }
  const double fraction = static_cast<double>(correct) / runs;
  CHECK(std::abs(fraction - 0.4375) <= 3.0 * std::sqrt(0.4375 * 0.5625 / runs));
}

TEST_CASE("majority vote picks the modal answer with earliest-sample ties") {
  testutil::ScriptedGenerationBackend backend;
  backend.trajectory_texts = {"Plan 1: a\nExecution 1: x\n#### 7\n",
                              "Plan 1: b\nExecution 1: y\n#### 7\n",
                              "Plan 1: c\nExecution 1: z\n#### 9\n"};
  search::SearchContext ctx;
  ctx.question = core::Question{"q", "text", "7"};
  const search::SearchResult majority = search::run_majority_vote(ctx, 3, backend);
  CHECK(majority.best.final_answer == "7");

  testutil::ScriptedGenerationBackend tie_backend;
  tie_backend.trajectory_texts = {"Plan 1: a\nExecution 1: x\n#### A\n",
                                  "Plan 1: b\nExecution 1: y\n#### B\n"};
  const search::SearchResult tie = search::run_majority_vote(ctx, 2, tie_backend);
  CHECK(tie.best.final_answer == "A");

  testutil::ScriptedGenerationBackend unfinished_backend;
  unfinished_backend.trajectory_texts = {"Plan 1: a\nExecution 1: x\n",
                                         "Plan 1: b\nExecution 1: y\n"};
  const search::SearchResult unfinished =
      search::run_majority_vote(ctx, 2, unfinished_backend);
  CHECK_FALSE(unfinished.best.finished);
}

TEST_CASE("majority vote win rate matches the binomial enumeration") {
  // Per-trajectory correctness 0.6, k = 3: 0.6^3 + 3*0.6^2*0.4 = 0.648.
  int correct = 0;
  const int runs = 20000;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t seed = core::hash_combine(991, r);
    const auto spec = testutil::flat_spec(1, 0.6, 1.0);
    gen::SyntheticGenerationBackend backend(spec, seed);
    const search::SearchResult result =
        search::run_majority_vote(plain_ctx(spec), 3, backend);
    correct += result.best.final_answer == "42" ? 1 : 0;
  }
  const double fraction = static_cast<double>(correct) / runs;
  CHECK(std::abs(fraction - 0.648) <= 3.0 * std::sqrt(0.648 * 0.352 / runs));
}

TEST_CASE("searches that never finish return the best path flagged unfinished") {
  const auto spec = testutil::flat_spec(4, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 17);
  rm::OracleRewardBackend oracle(17);
  auto cfg = testutil::make_config(4, 2, 4, 2);
  cfg.max_steps = 2;
  search::SearchContext ctx = plain_ctx(spec);
  ctx.params.max_steps = 2;
  const search::SearchResult result =
      search::run_dream_plus(ctx, cfg, backend, oracle);
  CHECK(result.steps_taken == 2);
  CHECK_FALSE(result.best.finished);
  CHECK(result.best.steps.size() == 2);
}

TEST_CASE("finished beams pass through planning unexpanded") {
  const auto spec = testutil::flat_spec(2, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 23);
  rm::OracleRewardBackend oracle(23);
  const auto cfg = testutil::make_config(4, 2, 4, 2);
  core::BudgetLedger ledger;

  core::Trajectory done;
  done.question_id = spec.id;
  done.steps.push_back(core::Step{"subgoal a", "progress b\n#### 42", {}, {}});
  done.finished = true;
  done.final_answer = "42";
  core::Trajectory open;
  open.question_id = spec.id;
  open.steps.push_back(core::Step{"subgoal c", "progress d", {}, {}});

  const search::PhaseOutcome out = search::expand_planning(
      plain_ctx(spec), {done, open}, 2, cfg, backend, oracle, ledger);
  CHECK(out.drawn == 2);  // one open beam's quota only
  const core::LedgerEntry& entry =
      ledger.entries().at(core::LedgerKey{2, core::Phase::planning});
  CHECK(entry.scopes == 1);
  for (const core::ScoredCandidate& c : out.accepted) {
    CHECK_FALSE(c.prefix.finished);
  }

  CHECK_THROWS_AS(search::expand_planning(plain_ctx(spec), {done}, 2, cfg, backend,
                                          oracle, ledger),
                  std::invalid_argument);
}

TEST_CASE("scoring failures discard candidates and land in the ledger") {
  const auto spec = testutil::flat_spec(1, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 19);
  testutil::PeriodicFailureRewardBackend flaky(2);  // every 2nd call fails
  const auto cfg = testutil::make_config(4, 2, 4, 2);
  core::BudgetLedger ledger;
  core::Trajectory root;
  const search::PhaseOutcome out = search::expand_planning(
      plain_ctx(spec), {root}, 1, cfg, backend, flaky, ledger);
  CHECK(out.accepted.size() == 2);
  const core::LedgerEntry& entry =
      ledger.entries().at(core::LedgerKey{1, core::Phase::planning});
  CHECK(entry.discarded == 2);
  CHECK(entry.samples_drawn == 4);
}

TEST_CASE("an all-failing reward backend is a step failure") {
  const auto spec = testutil::flat_spec(1, 1.0, 1.0);
  gen::SyntheticGenerationBackend backend(spec, 20);
  testutil::FlakyRewardBackend dead(1 << 20);
  const auto cfg = testutil::make_config(4, 2, 4, 2);
  core::BudgetLedger ledger;
  core::Trajectory root;
  CHECK_THROWS_AS(search::expand_planning(plain_ctx(spec), {root}, 1, cfg, backend,
                                          dead, ledger),
                  search::SearchError);
}

}  // TEST_SUITE("search")
