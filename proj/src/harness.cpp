#include "dream/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dream/generation.hpp"
#include "dream/remote.hpp"

namespace dream::harness {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return std::string(buf);
}

std::uint64_t env_or(std::string* target, const char* name) {
  if (const char* value = std::getenv(name); value != nullptr && *value != '\0') {
    *target = value;
    return 1;
  }
  return 0;
}

}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "majority") return Method::majority;
  if (name == "unit_beam") return Method::unit_beam;
  if (name == "dream") return Method::dream;
  if (name == "dream_plus") return Method::dream_plus;
  if (name == "codetree_dream") return Method::codetree_dream;
  throw std::invalid_argument("unknown method: " + name);
}

std::string method_to_string(Method method) {
  switch (method) {
    case Method::majority: return "majority";
    case Method::unit_beam: return "unit_beam";
    case Method::dream: return "dream";
    case Method::dream_plus: return "dream_plus";
    case Method::codetree_dream: return "codetree_dream";
  }
  return "unknown";
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument("config parse error: " + std::string(e.what()));
  }

  ExperimentConfig cfg;
  try {
    cfg.method = method_from_string(j.value("method", "dream"));
    cfg.backend = j.value("backend", std::string("synthetic"));
    cfg.task_file = j.value("task_file", std::string());
    cfg.task_format = j.value("task_format", std::string("synthetic"));
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    cfg.runs_per_task = j.value("runs_per_task", 1);
    cfg.out_path = j.value("out", std::string("frontier.csv"));
    cfg.majority_k = j.value("majority_k", 4);
    cfg.sampling_mode = j.value("sampling_mode", std::string("overrequest"));
    cfg.parallelism = j.value("parallelism", 1);
    cfg.few_shot_bank = j.value("few_shot_bank", std::string());
    cfg.executor_command = j.value("executor_command", std::string());
    cfg.executor_timeout_ms = j.value("executor_timeout_ms", 2000);
    cfg.planted_pass_prob = j.value("planted_pass_prob", 0.5);
    cfg.code_budget = j.value("code_budget", 400);

    if (j.contains("search")) {
      const nlohmann::json& s = j["search"];
      cfg.search.planning_budget = s.value("N1", cfg.search.planning_budget);
      cfg.search.execution_budget = s.value("N2", cfg.search.execution_budget);
      cfg.search.planning_beam = s.value("n1", cfg.search.planning_beam);
      cfg.search.execution_beam = s.value("n2", cfg.search.execution_beam);
      cfg.search.planning_extension = s.value("m1", cfg.search.planning_extension);
      cfg.search.execution_extension = s.value("m2", cfg.search.execution_extension);
      cfg.search.plan_stop_threshold = s.value("tau_p1", cfg.search.plan_stop_threshold);
      cfg.search.plan_extend_threshold =
          s.value("tau_p2", cfg.search.plan_extend_threshold);
      cfg.search.exec_stop_threshold = s.value("tau_e1", cfg.search.exec_stop_threshold);
      cfg.search.exec_extend_threshold =
          s.value("tau_e2", cfg.search.exec_extend_threshold);
      cfg.search.max_steps = s.value("max_steps", cfg.search.max_steps);
    }
    if (j.contains("oracle_noise")) {
      cfg.oracle_noise.flip_prob = j["oracle_noise"].value("flip_prob", 0.0);
      cfg.oracle_noise.jitter = j["oracle_noise"].value("jitter", 0.0);
    }
    if (j.contains("remote")) {
      const nlohmann::json& r = j["remote"];
      cfg.remote.generation_endpoint = r.value("generation_endpoint", std::string());
      cfg.remote.reward_endpoint = r.value("reward_endpoint", std::string());
      cfg.remote.timeout_ms = r.value("timeout_ms", 5000);
      cfg.remote.retries = r.value("retries", 2);
    }
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    throw std::invalid_argument("config field error: " + std::string(e.what()));
  }

  env_or(&cfg.remote.generation_endpoint, "DREAM_GENERATION_ENDPOINT");
  env_or(&cfg.remote.reward_endpoint, "DREAM_REWARD_ENDPOINT");
  return cfg;
}

const ExperimentConfig& validate_experiment_config(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
  if (cfg.runs_per_task < 1) throw std::invalid_argument("runs_per_task not positive");
  if (cfg.parallelism < 1) throw std::invalid_argument("parallelism not positive");
  if (cfg.sampling_mode != "overrequest" && cfg.sampling_mode != "sequential") {
    throw std::invalid_argument("unknown sampling_mode: " + cfg.sampling_mode);
  }
  core::validate_config(cfg.search);

  const bool code_method = cfg.method == Method::codetree_dream;
  if (code_method && cfg.task_format != "code") {
    throw std::invalid_argument("codetree_dream requires task_format \"code\"");
  }
  if (!code_method && cfg.task_format == "code") {
    throw std::invalid_argument("code tasks require the codetree_dream method");
  }
  if (cfg.backend == "synthetic") {
    if (cfg.task_format != "synthetic") {
      throw std::invalid_argument("synthetic backend requires synthetic tasks");
    }
  } else if (cfg.backend == "remote") {
    if (cfg.remote.generation_endpoint.empty()) {
      throw std::invalid_argument("remote backend requires generation_endpoint");
    }
    if (!code_method && cfg.remote.reward_endpoint.empty()) {
      throw std::invalid_argument("remote backend requires reward_endpoint");
    }
    if (code_method && cfg.executor_command.empty()) {
      throw std::invalid_argument("remote code runs require executor_command");
    }
  } else if (cfg.backend == "planted") {
    if (!code_method) {
      throw std::invalid_argument("planted backend serves code tasks only");
    }
  } else {
    throw std::invalid_argument("unknown backend: " + cfg.backend);
  }
  return cfg;
}

// ============================================================================
// Task ingestion
// ============================================================================

namespace {

[[noreturn]] void line_error(const std::string& path, std::size_t line,
                             const std::string& what) {
  throw std::invalid_argument(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

TaskSet load_tasks(const std::string& path, const std::string& format,
                   std::string* warning) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open task file: " + path);
  if (format != "synthetic" && format != "questions" && format != "code") {
    throw std::invalid_argument("unknown task format: " + format);
  }

  TaskSet tasks;
  tasks.format = format;
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      line_error(path, line_no, std::string("malformed record: ") + e.what());
    }
    try {
      if (format == "synthetic") {
        synth::SyntheticTaskSpec spec;
        spec.id = j.value("id", "task-" + std::to_string(line_no));
        for (const nlohmann::json& s : j.at("steps")) {
          spec.steps.push_back(
              synth::StepDifficulty{s.at("p").get<double>(), s.at("q").get<double>()});
        }
        spec.answer = j.at("answer").get<std::string>();
        spec.plan_cost = j.value("c_p", 1);
        spec.exec_cost = j.value("c_e", 1);
        synth::validate_spec(spec);
        ids.push_back(spec.id);
        tasks.synthetic.push_back(std::move(spec));
      } else if (format == "questions") {
        core::Question q;
        q.id = j.at("id").get<std::string>();
        q.text = j.at("text").get<std::string>();
        if (q.text.empty()) line_error(path, line_no, "empty question text");
        if (j.contains("gold_answer")) {
          q.gold_answer = j["gold_answer"].get<std::string>();
        }
        ids.push_back(q.id);
        tasks.questions.push_back(std::move(q));
      } else {
        code::CodeTask t;
        t.id = j.at("id").get<std::string>();
        t.prompt = j.at("prompt").get<std::string>();
        for (const nlohmann::json& v : j.at("visible_tests")) {
          t.visible_tests.push_back(code::TestCase{v.value("input", ""),
                                                   v.value("expected", "")});
        }
        if (j.contains("hidden_tests")) {
          for (const nlohmann::json& v : j["hidden_tests"]) {
            t.hidden_tests.push_back(code::TestCase{v.value("input", ""),
                                                    v.value("expected", "")});
          }
        }
        if (t.visible_tests.empty()) line_error(path, line_no, "no visible tests");
        ids.push_back(t.id);
        tasks.code.push_back(std::move(t));
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception& e) {
      line_error(path, line_no, std::string("bad record: ") + e.what());
    }
  }

  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
  if (dup != sorted.end()) {
    throw std::invalid_argument("duplicate task id: " + *dup);
  }
  if (tasks.size() == 0 && warning != nullptr) {
    *warning = "task file is empty: " + path;
  }
  return tasks;
}

// ============================================================================
// Running experiments
// ============================================================================

std::string config_fingerprint(const ExperimentConfig& cfg) {
  std::ostringstream s;
  const core::SearchConfig& c = cfg.search;
  s << method_to_string(cfg.method) << '|' << cfg.backend << '|' << c.planning_budget
    << ',' << c.execution_budget << ',' << c.planning_beam << ',' << c.execution_beam
    << ',' << c.planning_extension << ',' << c.execution_extension << ','
    << fmt_double(c.plan_stop_threshold) << ',' << fmt_double(c.plan_extend_threshold)
    << ',' << fmt_double(c.exec_stop_threshold) << ','
    << fmt_double(c.exec_extend_threshold) << ',' << c.max_steps << '|'
    << cfg.majority_k << '|' << cfg.sampling_mode << '|'
    << fmt_double(cfg.oracle_noise.flip_prob) << ','
    << fmt_double(cfg.oracle_noise.jitter) << '|' << cfg.code_budget << ','
    << fmt_double(cfg.planted_pass_prob);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(core::fnv1a(s.str())));
  return std::string(buf);
}

namespace {

struct SlotStats {
  bool failed = false;
  bool correct = false;
  bool weak_correct = false;
  std::int64_t tokens = 0;
  std::int64_t samples = 0;
  std::int64_t scopes = 0;
  std::int64_t scopes_early_stopped = 0;
  std::string log_line;
};

search::SamplingMode sampling_mode(const ExperimentConfig& cfg) {
  return cfg.sampling_mode == "sequential" ? search::SamplingMode::sequential
                                           : search::SamplingMode::overrequest;
}

// Deterministic pseudo-reward for planted code runs: plans get uniform scores
// derived from their content so ranking is exercised without a live model.
class HashRewardBackend : public rm::RewardBackend {
 public:
  explicit HashRewardBackend(std::uint64_t seed)
      : seed_(core::hash_combine(seed, 0x68617368ULL)) {}
  rm::LogitPair logits(const rm::RewardQuery& query) override {
    const double u =
        core::unit_uniform(core::hash_combine(seed_, core::fnv1a(rm::build_context(query))));
    return rm::logits_from_probability(0.05 + 0.9 * u);
  }
  std::string id() const override { return "hash"; }

 private:
  std::uint64_t seed_;
};

SlotStats run_synthetic_slot(const ExperimentConfig& cfg,
                             const synth::SyntheticTaskSpec& spec, std::uint64_t seed,
                             int repeat) {
  const std::uint64_t run_seed = core::hash_combine(
      core::hash_combine(seed, core::fnv1a(spec.id)), static_cast<std::uint64_t>(repeat));
  gen::SyntheticGenerationBackend backend(spec, run_seed);
  rm::OracleRewardBackend oracle(run_seed, cfg.oracle_noise);

  search::SearchContext ctx;
  ctx.question.id = spec.id;
  ctx.question.text = "synthetic task " + spec.id;
  ctx.question.gold_answer = spec.answer;
  ctx.sampling = sampling_mode(cfg);
  ctx.params.max_steps = cfg.search.max_steps;

  search::SearchResult result;
  switch (cfg.method) {
    case Method::majority:
      result = search::run_majority_vote(ctx, cfg.majority_k, backend);
      break;
    case Method::unit_beam:
      result = search::run_unit_beam(ctx, cfg.search, backend, oracle);
      break;
    case Method::dream:
      result = search::run_dream(ctx, cfg.search, backend, oracle);
      break;
    case Method::dream_plus:
      result = search::run_dream_plus(ctx, cfg.search, backend, oracle);
      break;
    case Method::codetree_dream:
      throw std::invalid_argument("codetree_dream cannot run synthetic math tasks");
  }

  SlotStats out;
  out.correct = result.best.finished && result.best.final_answer &&
                core::answers_match(*result.best.final_answer, spec.answer);
  out.tokens = result.ledger.total_tokens();
  out.samples = result.ledger.total_samples();
  out.scopes = result.ledger.total_scopes();
  out.scopes_early_stopped = result.ledger.total_scopes_early_stopped();

  nlohmann::json log;
  log["task"] = spec.id;
  log["seed"] = seed;
  log["run"] = repeat;
  log["method"] = method_to_string(cfg.method);
  log["correct"] = out.correct;
  log["tokens"] = out.tokens;
  log["samples"] = out.samples;
  log["steps_taken"] = result.steps_taken;
  log["answer"] = result.best.final_answer.value_or("");
  log["gold"] = spec.answer;
  out.log_line = log.dump();
  return out;
}

SlotStats run_code_slot(const ExperimentConfig& cfg, const code::CodeTask& task,
                        std::uint64_t seed, int repeat) {
  const std::uint64_t run_seed = core::hash_combine(
      core::hash_combine(seed, core::fnv1a(task.id)), static_cast<std::uint64_t>(repeat));

  code::CodeSearchConfig code_cfg = code::code_config_from_search(cfg.search);
  code_cfg.max_total_samples = cfg.code_budget;

  code::CodeSearchResult result;
  if (cfg.backend == "planted") {
    code::PlantedCodeBackend backend(run_seed);
    code::PlantedExecutor executor(run_seed, cfg.planted_pass_prob);
    HashRewardBackend rewards(run_seed);
    result = code::run_codetree_dream(task, code_cfg, backend, rewards, executor,
                                      sampling_mode(cfg));
  } else {
    gen::FewShotBank bank;
    bank.exemplars.push_back("Plan 1: outline the fix\nExecution 1: full program");
    remote::RemoteGenerationBackend backend(
        remote::RemoteConfig{cfg.remote.generation_endpoint, cfg.remote.timeout_ms,
                             cfg.remote.retries},
        bank);
    remote::RemoteRewardBackend rewards(remote::RemoteConfig{
        cfg.remote.reward_endpoint, cfg.remote.timeout_ms, cfg.remote.retries});
    code::SubprocessExecutor executor(cfg.executor_command, cfg.executor_timeout_ms);
    result = code::run_codetree_dream(task, code_cfg, backend, rewards, executor,
                                      sampling_mode(cfg));
  }

  SlotStats out;
  out.correct = result.accept;
  out.weak_correct = result.weak_accept;
  out.tokens = result.ledger.total_tokens();
  out.samples = result.ledger.total_samples();
  out.scopes = result.ledger.total_scopes();
  out.scopes_early_stopped = result.ledger.total_scopes_early_stopped();

  nlohmann::json log;
  log["task"] = task.id;
  log["seed"] = seed;
  log["run"] = repeat;
  log["method"] = method_to_string(cfg.method);
  log["correct"] = out.correct;
  log["weak_correct"] = out.weak_correct;
  log["visible_rate"] = result.best_visible_rate;
  log["solved"] = result.solved;
  log["budget_exhausted"] = result.budget_exhausted;
  log["tokens"] = out.tokens;
  log["samples"] = out.samples;
  out.log_line = log.dump();
  return out;
}

SlotStats run_question_slot(const ExperimentConfig& cfg, const core::Question& question,
                            std::uint64_t seed, int repeat) {
  if (!question.gold_answer) {
    throw std::invalid_argument("question " + question.id + " has no gold answer");
  }
  gen::FewShotBank bank = cfg.few_shot_bank.empty()
                              ? gen::FewShotBank{{"Plan 1: restate the goal\n"
                                                  "Execution 1: work it out\n"
                                                  "#### 0"}}
                              : gen::load_few_shot_bank(cfg.few_shot_bank);
  remote::RemoteGenerationBackend backend(
      remote::RemoteConfig{cfg.remote.generation_endpoint, cfg.remote.timeout_ms,
                           cfg.remote.retries},
      bank);
  remote::RemoteRewardBackend rewards(remote::RemoteConfig{
      cfg.remote.reward_endpoint, cfg.remote.timeout_ms, cfg.remote.retries});

  search::SearchContext ctx;
  ctx.question = question;
  ctx.sampling = sampling_mode(cfg);
  ctx.params.max_steps = cfg.search.max_steps;
  ctx.score_retries = cfg.remote.retries;

  search::SearchResult result;
  switch (cfg.method) {
    case Method::majority:
      result = search::run_majority_vote(ctx, cfg.majority_k, backend);
      break;
    case Method::unit_beam:
      result = search::run_unit_beam(ctx, cfg.search, backend, rewards);
      break;
    case Method::dream:
      result = search::run_dream(ctx, cfg.search, backend, rewards);
      break;
    case Method::dream_plus:
      result = search::run_dream_plus(ctx, cfg.search, backend, rewards);
      break;
    case Method::codetree_dream:
      throw std::invalid_argument("codetree_dream cannot run question tasks");
  }

  SlotStats out;
  out.correct = result.best.finished && result.best.final_answer &&
                core::answers_match(*result.best.final_answer, *question.gold_answer);
  out.tokens = result.ledger.total_tokens();
  out.samples = result.ledger.total_samples();
  out.scopes = result.ledger.total_scopes();
  out.scopes_early_stopped = result.ledger.total_scopes_early_stopped();

  nlohmann::json log;
  log["task"] = question.id;
  log["seed"] = seed;
  log["run"] = repeat;
  log["method"] = method_to_string(cfg.method);
  log["correct"] = out.correct;
  log["tokens"] = out.tokens;
  log["samples"] = out.samples;
  log["answer"] = result.best.final_answer.value_or("");
  out.log_line = log.dump();
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const TaskSet& tasks) {
  validate_experiment_config(cfg);

  ExperimentResult result;
  const std::string fingerprint = config_fingerprint(cfg);
  const std::size_t task_count = tasks.size();

  for (const std::uint64_t seed : cfg.seeds) {
    const std::size_t slot_count =
        task_count * static_cast<std::size_t>(cfg.runs_per_task);
    std::vector<SlotStats> slots(slot_count);

    auto run_slot = [&](std::size_t slot) {
      const std::size_t task_index = slot / cfg.runs_per_task;
      const int repeat = static_cast<int>(slot % cfg.runs_per_task);
      SlotStats stats;
      try {
        if (tasks.format == "synthetic") {
          stats = run_synthetic_slot(cfg, tasks.synthetic[task_index], seed, repeat);
        } else if (tasks.format == "code") {
          stats = run_code_slot(cfg, tasks.code[task_index], seed, repeat);
        } else {
          stats = run_question_slot(cfg, tasks.questions[task_index], seed, repeat);
        }
      } catch (const std::exception& e) {
        stats = SlotStats{};
        stats.failed = true;
        nlohmann::json log;
        const std::string id = tasks.format == "synthetic"
                                   ? tasks.synthetic[task_index].id
                                   : tasks.format == "code"
                                         ? tasks.code[task_index].id
                                         : tasks.questions[task_index].id;
        log["task"] = id;
        log["seed"] = seed;
        log["run"] = repeat;
        log["error"] = e.what();
        stats.log_line = log.dump();
      }
      slots[slot] = std::move(stats);
    };

    if (cfg.parallelism <= 1 || slot_count <= 1) {
      for (std::size_t i = 0; i < slot_count; ++i) run_slot(i);
    } else {
      std::atomic<std::size_t> next(0);
      const int workers =
          std::min<std::size_t>(cfg.parallelism, slot_count);
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= slot_count) break;
            run_slot(i);
          }
        });
      }
      for (std::thread& t : pool) t.join();
    }

    std::int64_t correct = 0;
    std::int64_t tokens = 0;
    std::int64_t samples = 0;
    std::int64_t scopes = 0;
    std::int64_t scopes_es = 0;
    for (const SlotStats& s : slots) {
      result.tasks_attempted += 1;
      if (s.failed) result.tasks_failed += 1;
      if (s.correct) correct += 1;
      tokens += s.tokens;
      samples += s.samples;
      scopes += s.scopes;
      scopes_es += s.scopes_early_stopped;
      result.task_log.push_back(s.log_line);
    }

    FrontierRow row;
    row.method = method_to_string(cfg.method);
    row.fingerprint = fingerprint;
    row.seed = seed;
    const double n = slot_count == 0 ? 1.0 : static_cast<double>(slot_count);
    row.accuracy = static_cast<double>(correct) / n;
    row.mean_tokens = static_cast<double>(tokens) / n;
    row.mean_samples = static_cast<double>(samples) / n;
    row.early_stop_fraction =
        scopes == 0 ? 0.0 : static_cast<double>(scopes_es) / static_cast<double>(scopes);
    result.rows.push_back(row);
  }
  return result;
}

void emit_frontier(const std::vector<FrontierRow>& rows, const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("no frontier rows to emit");

  std::vector<FrontierRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const FrontierRow& a, const FrontierRow& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.mean_tokens != b.mean_tokens) return a.mean_tokens < b.mean_tokens;
    if (a.fingerprint != b.fingerprint) return a.fingerprint < b.fingerprint;
    return a.seed < b.seed;
  });

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write frontier: " + path);
  out << "method,fingerprint,seed,accuracy,mean_tokens,mean_samples,early_stop_fraction\n";
  for (const FrontierRow& r : sorted) {
    out << r.method << ',' << r.fingerprint << ',' << r.seed << ','
        << fmt_double(r.accuracy) << ',' << fmt_double(r.mean_tokens) << ','
        << fmt_double(r.mean_samples) << ',' << fmt_double(r.early_stop_fraction)
        << '\n';
  }
  out.close();

  std::ofstream plot(path + ".plot", std::ios::binary);
  if (!plot) throw std::runtime_error("cannot write plot data: " + path + ".plot");
  plot << "log10_tokens,accuracy,method,fingerprint,seed\n";
  for (const FrontierRow& r : sorted) {
    const double x = std::log10(std::max(1.0, r.mean_tokens));
    plot << fmt_double(x) << ',' << fmt_double(r.accuracy) << ',' << r.method << ','
         << r.fingerprint << ',' << r.seed << '\n';
  }
}

std::vector<FrontierRow> read_frontier(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open frontier: " + path);
  std::vector<FrontierRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                   : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 7) {
      throw std::invalid_argument("bad frontier row: " + line);
    }
    FrontierRow r;
    r.method = fields[0];
    r.fingerprint = fields[1];
    r.seed = std::strtoull(fields[2].c_str(), nullptr, 10);
    r.accuracy = std::strtod(fields[3].c_str(), nullptr);
    r.mean_tokens = std::strtod(fields[4].c_str(), nullptr);
    r.mean_samples = std::strtod(fields[5].c_str(), nullptr);
    r.early_stop_fraction = std::strtod(fields[6].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ============================================================================
// Synthetic suite generation
// ============================================================================

std::vector<synth::SyntheticTaskSpec> generate_spec_suite(const SpecSuiteOptions& options) {
  if (options.count < 1) throw std::invalid_argument("count not positive");
  if (options.steps < 1) throw std::invalid_argument("steps not positive");
  const bool easy = options.profile == "easy";
  const bool hard = options.profile == "hard";
  const bool mixed = options.profile == "mixed";
  const bool uniform = options.profile == "uniform";
  if (!easy && !hard && !mixed && !uniform) {
    throw std::invalid_argument("unknown profile: " + options.profile);
  }

  auto draw = [&](std::uint64_t tag, int task, int step, double lo, double hi) {
    std::uint64_t h = core::hash_combine(options.seed, tag);
    h = core::hash_combine(h, static_cast<std::uint64_t>(task));
    h = core::hash_combine(h, static_cast<std::uint64_t>(step));
    return lo + core::unit_uniform(h) * (hi - lo);
  };

  std::vector<synth::SyntheticTaskSpec> specs;
  specs.reserve(options.count);
  for (int t = 0; t < options.count; ++t) {
    synth::SyntheticTaskSpec spec;
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%04d", options.profile.c_str(), t);
    spec.id = id;
    const std::uint64_t answer_h =
        core::hash_combine(core::hash_combine(options.seed, 0xa75ULL),
                           static_cast<std::uint64_t>(t));
    spec.answer = std::to_string(100 + core::mix64(answer_h) % 900);
    for (int s = 0; s < options.steps; ++s) {
      synth::StepDifficulty d;
      if (easy) {
        d.plan_success = draw(1, t, s, 0.92, 0.99);
        d.exec_success = draw(2, t, s, 0.92, 0.99);
      } else if (hard) {
        d.plan_success = draw(1, t, s, 0.05, 0.30);
        d.exec_success = draw(2, t, s, 0.05, 0.30);
      } else if (mixed) {
        // Plans stay easy; execution difficulty alternates, so step hardness
        // varies inside every trajectory.
        d.plan_success = draw(1, t, s, 0.90, 0.98);
        d.exec_success = s % 2 == 0 ? draw(2, t, s, 0.20, 0.35)
                                    : draw(2, t, s, 0.90, 0.98);
      } else {
        d.plan_success = draw(1, t, s, options.p_min, options.p_max);
        d.exec_success = draw(2, t, s, options.q_min, options.q_max);
      }
      spec.steps.push_back(d);
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

void write_spec_suite(const std::vector<synth::SyntheticTaskSpec>& specs,
                      std::ostream& out) {
  for (const synth::SyntheticTaskSpec& spec : specs) {
    nlohmann::json j;
    j["id"] = spec.id;
    nlohmann::json steps = nlohmann::json::array();
    for (const synth::StepDifficulty& s : spec.steps) {
      steps.push_back({{"p", s.plan_success}, {"q", s.exec_success}});
    }
    j["steps"] = steps;
    j["answer"] = spec.answer;
    j["c_p"] = spec.plan_cost;
    j["c_e"] = spec.exec_cost;
    out << j.dump() << "\n";
  }
}

}  // namespace dream::harness
