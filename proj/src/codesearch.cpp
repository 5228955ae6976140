#include "dream/codesearch.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <map>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace dream::code {

double pass_rate(const std::string& program, const std::vector<TestCase>& tests,
                 Executor& executor, std::vector<int>* failed_out) {
  if (tests.empty()) throw std::invalid_argument("visible test set is empty");
  int passed = 0;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const RunOutcome outcome = executor.run(program, tests[i]);
    if (outcome.verdict == Verdict::pass) {
      ++passed;
    } else if (failed_out != nullptr) {
      failed_out->push_back(static_cast<int>(i));
    }
  }
  return static_cast<double>(passed) / static_cast<double>(tests.size());
}

CodeSearchConfig code_config_from_search(const core::SearchConfig& cfg) {
  CodeSearchConfig out;
  out.plan_budget = cfg.planning_budget;
  out.exec_budget = cfg.execution_budget;
  out.plan_required = cfg.planning_beam;
  out.tau_p1 = cfg.plan_stop_threshold;
  out.tau_p2 = cfg.plan_extend_threshold;
  out.tau_e1 = cfg.exec_stop_threshold;
  out.tau_e2 = cfg.exec_extend_threshold;
  out.m1 = cfg.planning_extension;
  out.m2 = cfg.execution_extension;
  return out;
}

std::vector<RankedPlan> rank_plans(const CodeTask& task,
                                   const core::Trajectory& conditioning,
                                   const CodeSearchConfig& cfg,
                                   gen::GenerationBackend& backend,
                                   rm::RewardBackend& reward,
                                   core::BudgetLedger& ledger, int depth,
                                   budget::SamplingMode mode) {
  budget::ScopeSpec spec;
  spec.quota = cfg.plan_budget;
  spec.required_above = cfg.plan_required;
  spec.tau1 = cfg.tau_p1;
  spec.tau2 = cfg.tau_p2;
  spec.extension_limit = cfg.m1;

  gen::SampleParams params;
  budget::DrawFn draw = [&](int first, int count) {
    gen::GenResult r =
        gen::sample_plans(task.prompt, conditioning, count, backend, params, first);
    std::vector<budget::RawDraw> draws;
    for (std::size_t i = 0; i < r.size(); ++i) {
      draws.push_back(budget::RawDraw{std::move(r.texts[i]), "", r.token_counts[i],
                                      static_cast<bool>(r.finished_flags[i])});
    }
    return draws;
  };
  budget::ScoreFn scorer = [&](const budget::RawDraw& d) {
    rm::RewardQuery q{task.prompt, conditioning.steps, d.text, core::Phase::planning};
    return rm::score(q, reward);
  };

  budget::ScopeOutcome scope = budget::run_scope(spec, mode, draw, scorer);
  ledger.record_scope(depth + 1, core::Phase::planning, scope.stats);

  std::vector<RankedPlan> plans;
  plans.reserve(scope.kept.size());
  for (std::size_t i = 0; i < scope.kept.size(); ++i) {
    plans.push_back(RankedPlan{std::move(scope.kept[i].draw.text),
                               scope.kept[i].reward, static_cast<int>(i)});
  }
  std::sort(plans.begin(), plans.end(), [](const RankedPlan& a, const RankedPlan& b) {
    if (a.reward != b.reward) return a.reward > b.reward;
    return a.sample_index < b.sample_index;
  });
  return plans;
}

ExecutedPlan execute_plan(const CodeTask& task, const core::Trajectory& conditioning,
                          const std::string& plan, const CodeSearchConfig& cfg,
                          gen::GenerationBackend& backend, Executor& executor,
                          core::BudgetLedger& ledger, int depth,
                          budget::SamplingMode mode) {
  if (plan.empty()) throw std::invalid_argument("empty plan");

  budget::ScopeSpec spec;
  spec.quota = cfg.exec_budget;
  spec.required_above = 1;  // one candidate above tau_e1 stops sampling
  spec.tau1 = cfg.tau_e1;
  spec.tau2 = cfg.tau_e2;
  spec.extension_limit = cfg.m2;
  spec.extend_on_leq = true;
  spec.stop_at_perfect = true;

  gen::SampleParams params;
  budget::DrawFn draw = [&](int first, int count) {
    gen::GenResult r = gen::sample_executions(task.prompt, conditioning, plan, count,
                                              backend, params, first);
    std::vector<budget::RawDraw> draws;
    for (std::size_t i = 0; i < r.size(); ++i) {
      draws.push_back(budget::RawDraw{std::move(r.texts[i]), "", r.token_counts[i],
                                      false});
    }
    return draws;
  };
  // The execution reward is purely the visible pass rate. Failing test
  // indices are cached per program so nothing is ever executed twice.
  std::map<std::string, std::vector<int>> failures;
  budget::ScoreFn scorer = [&](const budget::RawDraw& d) {
    if (d.text.empty()) return rm::ScoreOutcome{{}, "empty program"};
    std::vector<int> failed;
    const double rate = pass_rate(d.text, task.visible_tests, executor, &failed);
    failures[d.text] = std::move(failed);
    return rm::ScoreOutcome{rate, ""};
  };

  budget::ScopeOutcome scope = budget::run_scope(spec, mode, draw, scorer);
  ledger.record_scope(depth + 1, core::Phase::execution, scope.stats);

  ExecutedPlan best;
  best.programs_drawn = static_cast<int>(scope.stats.drawn);
  for (budget::ScoredDraw& kept : scope.kept) {
    if (best.program.empty() || kept.reward > best.pass_rate) {
      best.program = std::move(kept.draw.text);
      best.pass_rate = kept.reward;
    }
  }
  if (const auto it = failures.find(best.program); it != failures.end()) {
    best.failed_tests = it->second;
  }
  return best;
}

namespace {

// One conditioning step per ancestor: its plan plus the program it produced
// and which visible tests still fail (cached on the node at creation).
core::Trajectory build_conditioning(const std::vector<CodeNode>& nodes, int index,
                                    const CodeTask& task) {
  std::vector<int> chain;
  for (int at = index; at >= 0; at = nodes[at].parent) chain.push_back(at);
  std::reverse(chain.begin(), chain.end());

  core::Trajectory t;
  t.question_id = task.id;
  for (const int at : chain) {
    const CodeNode& node = nodes[at];
    if (node.program.empty()) continue;  // root placeholder
    std::string feedback = node.program + "\nfailing tests:";
    for (const int f : node.failed_tests) feedback += " " + std::to_string(f);
    core::Step step;
    step.plan = node.plan.empty() ? "initial attempt" : node.plan;
    step.execution = feedback;
    t.steps.push_back(std::move(step));
  }
  return t;
}

}  // namespace

CodeSearchResult run_codetree_dream(const CodeTask& task, const CodeSearchConfig& cfg,
                                    gen::GenerationBackend& backend,
                                    rm::RewardBackend& reward, Executor& executor,
                                    budget::SamplingMode mode) {
  if (task.visible_tests.empty()) {
    throw std::invalid_argument("code task requires visible tests");
  }

  CodeSearchResult result;
  result.nodes.push_back(CodeNode{});  // root: no program, pass rate 0

  std::vector<std::vector<RankedPlan>> plans(1);
  std::vector<std::size_t> cursor(1, 0);
  std::vector<bool> ranked(1, false);

  int current = 0;
  while (true) {
    if (result.ledger.total_samples() >= cfg.max_total_samples) {
      result.budget_exhausted = true;
      break;
    }

    // Nearest node on the path from current to the root with plans left.
    int node = -1;
    for (int at = current; at >= 0; at = result.nodes[at].parent) {
      if (!ranked[at]) {
        const core::Trajectory conditioning =
            build_conditioning(result.nodes, at, task);
        plans[at] = rank_plans(task, conditioning, cfg, backend, reward,
                               result.ledger, result.nodes[at].depth, mode);
        ranked[at] = true;
      }
      if (cursor[at] < plans[at].size()) {
        node = at;
        break;
      }
    }
    if (node < 0) break;  // every plan on the path is exhausted

    const RankedPlan& plan = plans[node][cursor[node]++];
    const core::Trajectory conditioning =
        build_conditioning(result.nodes, node, task);
    const ExecutedPlan executed =
        execute_plan(task, conditioning, plan.text, cfg, backend, executor,
                     result.ledger, result.nodes[node].depth, mode);
    result.programs_generated += executed.programs_drawn;

    CodeNode child;
    child.program = executed.program;
    child.plan = plan.text;
    child.pass_rate = executed.pass_rate;
    child.failed_tests = executed.failed_tests;
    child.parent = node;
    child.depth = result.nodes[node].depth + 1;
    const int child_index = static_cast<int>(result.nodes.size());
    result.nodes.push_back(child);
    result.nodes[node].children.push_back(child_index);
    plans.emplace_back();
    cursor.push_back(0);
    ranked.push_back(false);

    if (!child.program.empty() &&
        (result.best_program.empty() ||
         child.pass_rate > result.best_visible_rate)) {
      result.best_visible_rate = child.pass_rate;
      result.best_program = child.program;
    }

    if (child.pass_rate >= 1.0) {
      result.solved = true;
      break;
    }
    // Descend only on a strict improvement; a tie gives no evidence of
    // progress and backtracks.
    if (child.pass_rate > result.nodes[node].pass_rate) {
      current = child_index;
    } else {
      current = node;
    }
  }

  result.weak_accept = !result.best_program.empty() && result.best_visible_rate >= 1.0;
  if (!result.best_program.empty() && !task.hidden_tests.empty()) {
    const double hidden =
        pass_rate(result.best_program, task.hidden_tests, executor);
    result.accept = result.weak_accept && hidden >= 1.0;
  } else {
    result.accept = result.weak_accept && task.hidden_tests.empty();
  }
  return result;
}

// ============================================================================
// Executors
// ============================================================================

PlantedExecutor::PlantedExecutor(std::uint64_t seed, double pass_prob)
    : seed_(core::hash_combine(seed, 0x65786563ULL)), pass_prob_(pass_prob) {}

RunOutcome PlantedExecutor::run(const std::string& program, const TestCase& test) {
  std::uint64_t h = core::hash_combine(seed_, core::fnv1a(program));
  h = core::hash_combine(h, core::fnv1a(test.input));
  h = core::hash_combine(h, core::fnv1a(test.expected));
  const bool pass = core::unit_uniform(h) < pass_prob_;
  return RunOutcome{pass ? Verdict::pass : Verdict::fail, "", 0.0};
}

SubprocessExecutor::SubprocessExecutor(std::string command, int timeout_ms)
    : command_(std::move(command)), timeout_ms_(timeout_ms) {
  signal(SIGPIPE, SIG_IGN);  // a dead child must not take the engine down
}

RunOutcome SubprocessExecutor::run(const std::string& program, const TestCase& test) {
  nlohmann::json request;
  request["program"] = program;
  request["test"] = test.input;
  request["expected"] = test.expected;
  const std::string payload = request.dump() + "\n";

  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
    return RunOutcome{Verdict::error, "pipe failed", 0.0};
  }
  const pid_t pid = fork();
  if (pid < 0) {
    return RunOutcome{Verdict::error, "fork failed", 0.0};
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);

  ssize_t written = write(in_pipe[1], payload.data(), payload.size());
  (void)written;
  close(in_pipe[1]);

  std::string response;
  char buf[4096];
  bool timed_out = false;
  int remaining = timeout_ms_;
  while (true) {
    pollfd pfd{out_pipe[0], POLLIN, 0};
    const int rc = poll(&pfd, 1, remaining > 0 ? remaining : 0);
    if (rc <= 0) {
      timed_out = true;
      break;
    }
    const ssize_t n = read(out_pipe[0], buf, sizeof(buf));
    if (n <= 0) break;
    response.append(buf, static_cast<std::size_t>(n));
    if (response.find('\n') != std::string::npos) break;
  }
  close(out_pipe[0]);
  if (timed_out) {
    kill(pid, SIGKILL);
    waitpid(pid, nullptr, 0);
    return RunOutcome{Verdict::timeout, "wall-clock timeout",
                      static_cast<double>(timeout_ms_)};
  }
  int status = 0;
  waitpid(pid, &status, 0);

  try {
    const nlohmann::json reply = nlohmann::json::parse(response);
    const std::string verdict = reply.value("verdict", "error");
    RunOutcome out;
    out.message = reply.value("message", "");
    out.duration_ms = reply.value("duration_ms", 0.0);
    if (verdict == "pass") out.verdict = Verdict::pass;
    else if (verdict == "fail") out.verdict = Verdict::fail;
    else if (verdict == "timeout") out.verdict = Verdict::timeout;
    else out.verdict = Verdict::error;
    return out;
  } catch (const std::exception& e) {
    return RunOutcome{Verdict::error, std::string("bad executor reply: ") + e.what(),
                      0.0};
  }
}

PlantedCodeBackend::PlantedCodeBackend(std::uint64_t run_seed)
    : seed_(core::hash_combine(run_seed, 0x636f6465ULL)) {}

gen::GenResult PlantedCodeBackend::generate(const gen::GenRequest& request) {
  gen::GenResult out;
  for (int j = 0; j < request.k; ++j) {
    const int idx = request.first_sample_index + j;
    std::uint64_t h = core::hash_combine(seed_, gen::prefix_fingerprint(request.prefix));
    h = core::hash_combine(h, request.mode == gen::GenMode::plan ? 1u : 2u);
    if (request.plan) h = core::hash_combine(h, core::fnv1a(*request.plan));
    h = core::hash_combine(h, static_cast<std::uint64_t>(idx));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(core::mix64(h)));
    if (request.mode == gen::GenMode::plan) {
      out.texts.push_back("revise " + std::string(buf));
      out.token_counts.push_back(8);
    } else {
      out.texts.push_back("candidate " + std::string(buf));
      out.token_counts.push_back(32);
    }
    out.finished_flags.push_back(false);
  }
  return out;
}

}  // namespace dream::code
