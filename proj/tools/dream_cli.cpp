// Command-line front end: experiment runs, frontier merging, reward-label
// dataset generation, closed-form oracles, and synthetic suite generation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dream/core.hpp"
#include "dream/generation.hpp"
#include "dream/harness.hpp"
#include "dream/labeler.hpp"
#include "dream/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitPartialFailures = 2;

int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::string& method_override, const std::string& backend_override,
            std::uint64_t seed_override, bool seed_set) {
  dream::harness::ExperimentConfig cfg =
      dream::harness::load_experiment_config(config_path);
  if (!out_override.empty()) cfg.out_path = out_override;
  if (!method_override.empty()) cfg.method = dream::harness::method_from_string(method_override);
  if (!backend_override.empty()) cfg.backend = backend_override;
  if (seed_set) cfg.seeds = {seed_override};
  dream::harness::validate_experiment_config(cfg);

  std::string warning;
  const dream::harness::TaskSet tasks =
      dream::harness::load_tasks(cfg.task_file, cfg.task_format, &warning);
  if (!warning.empty()) std::cerr << "warning: " << warning << "\n";

  const dream::harness::ExperimentResult result =
      dream::harness::run_experiment(cfg, tasks);
  if (!result.rows.empty()) {
    dream::harness::emit_frontier(result.rows, cfg.out_path);
  }

  std::ofstream log(cfg.out_path + ".log.jsonl", std::ios::binary);
  for (const std::string& line : result.task_log) log << line << "\n";

  std::cout << "tasks: " << result.tasks_attempted
            << " failed: " << result.tasks_failed << " rows: " << result.rows.size()
            << " -> " << cfg.out_path << "\n";
  if (result.tasks_attempted > 0 &&
      result.tasks_failed * 10 > result.tasks_attempted) {
    return kExitPartialFailures;
  }
  return kExitOk;
}

int cmd_frontier(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<dream::harness::FrontierRow> rows;
  for (const std::string& path : inputs) {
    const std::vector<dream::harness::FrontierRow> part =
        dream::harness::read_frontier(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  dream::harness::emit_frontier(rows, out);
  std::cout << rows.size() << " rows -> " << out << "\n";
  return kExitOk;
}

int cmd_label(const std::string& task_file, const std::string& out,
              int rollouts, int samples, double temperature, std::uint64_t seed,
              int max_steps) {
  std::string warning;
  const dream::harness::TaskSet tasks =
      dream::harness::load_tasks(task_file, "synthetic", &warning);
  if (!warning.empty()) std::cerr << "warning: " << warning << "\n";

  std::vector<dream::core::Question> questions;
  std::vector<dream::synth::SyntheticTaskSpec> specs = tasks.synthetic;
  for (const auto& spec : specs) {
    dream::core::Question q;
    q.id = spec.id;
    q.text = "synthetic task " + spec.id;
    q.gold_answer = spec.answer;
    questions.push_back(std::move(q));
  }

  dream::labeler::LabelerOptions options;
  options.rollouts = rollouts;
  options.samples_per_question = samples;
  options.temperature = temperature;
  options.seed = seed;
  options.max_steps = max_steps;

  dream::labeler::BackendFactory factory =
      [&specs](const dream::core::Question& q, std::uint64_t run_seed)
      -> std::unique_ptr<dream::gen::GenerationBackend> {
    for (const auto& spec : specs) {
      if (spec.id == q.id) {
        return std::make_unique<dream::gen::SyntheticGenerationBackend>(spec, run_seed);
      }
    }
    throw std::invalid_argument("no spec for question " + q.id);
  };

  std::vector<std::string> skipped;
  const std::vector<dream::labeler::LabeledPrefix> records =
      dream::labeler::build_dataset(questions, factory, options, &skipped);
  for (const std::string& s : skipped) std::cerr << "skipped: " << s << "\n";

  std::ofstream file(out, std::ios::binary);
  if (!file) throw std::invalid_argument("cannot write " + out);
  dream::labeler::write_records(questions, records, file);
  std::cout << records.size() << " records -> " << out << "\n";
  return kExitOk;
}

int cmd_oracle(const std::string& task_file, int k1, int k2, int k_pairs,
               const std::string& config_path, std::int64_t mc_runs,
               std::uint64_t seed) {
  std::string warning;
  const dream::harness::TaskSet tasks =
      dream::harness::load_tasks(task_file, "synthetic", &warning);
  if (!warning.empty()) std::cerr << "warning: " << warning << "\n";

  std::optional<dream::core::SearchConfig> search;
  if (!config_path.empty()) {
    search = dream::harness::load_experiment_config(config_path).search;
  }

  auto print = [](const std::string& task, const dream::synth::OracleReport& r) {
    nlohmann::json j;
    j["task"] = task;
    j["strategy"] = r.strategy;
    j["success_prob"] = r.success_prob;
    j["expected_cost"] = r.expected_cost;
    j["expected_plan_draws"] = r.expected_plan_draws;
    j["expected_exec_draws"] = r.expected_exec_draws;
    if (r.runs > 0) {
      j["runs"] = r.runs;
      j["success_stderr"] = r.success_stderr;
      j["cost_stderr"] = r.cost_stderr;
    }
    std::cout << j.dump() << "\n";
  };

  for (const auto& spec : tasks.synthetic) {
    print(spec.id, dream::synth::closed_form_unit(spec, k_pairs));
    print(spec.id, dream::synth::closed_form_dual(spec, k1, k2));
    if (search && search->planning_beam == 1 && search->execution_beam == 1) {
      print(spec.id, dream::synth::closed_form_dream_plus(spec, *search));
      if (mc_runs > 0) {
        dream::synth::MonteCarloOptions mc;
        mc.runs = mc_runs;
        mc.seed = seed;
        print(spec.id, dream::synth::monte_carlo(
                           spec, *search, dream::synth::StrategyKind::dream_plus, mc));
      }
    }
  }
  return kExitOk;
}

int cmd_gen_specs(const dream::harness::SpecSuiteOptions& options,
                  const std::string& out) {
  const std::vector<dream::synth::SyntheticTaskSpec> specs =
      dream::harness::generate_spec_suite(options);
  std::ofstream file(out, std::ios::binary);
  if (!file) throw std::invalid_argument("cannot write " + out);
  dream::harness::write_spec_suite(specs, file);
  std::cout << specs.size() << " specs -> " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-phase reward-guided search engine"};
  app.require_subcommand(1);

  // run
  std::string config_path;
  std::string out_override;
  std::string method_override;
  std::string backend_override;
  std::uint64_t seed_override = 0;
  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_override, "frontier CSV path override");
  run->add_option("--method", method_override,
                  "majority|unit_beam|dream|dream_plus|codetree_dream");
  run->add_option("--backend", backend_override, "synthetic|remote|planted");
  CLI::Option* seed_opt = run->add_option("--seed", seed_override, "single-seed override");

  // frontier
  std::vector<std::string> frontier_inputs;
  std::string frontier_out = "frontier.csv";
  CLI::App* frontier = app.add_subcommand("frontier", "merge frontier row CSVs");
  frontier->add_option("inputs", frontier_inputs, "row CSV files")->required();
  frontier->add_option("--out", frontier_out, "merged CSV path");

  // label
  std::string label_tasks;
  std::string label_out = "labels.jsonl";
  int rollouts = 5;
  int samples = 1;
  double temperature = 1.0;
  std::uint64_t label_seed = 1;
  int label_max_steps = 10;
  CLI::App* label = app.add_subcommand("label", "build rollout-labeled reward data");
  label->add_option("--tasks", label_tasks, "synthetic task file")->required();
  label->add_option("--out", label_out, "output JSONL path");
  label->add_option("--rollouts", rollouts, "continuations per target");
  label->add_option("--samples-per-question", samples, "trajectories per question");
  label->add_option("--temperature", temperature, "decoding temperature");
  label->add_option("--seed", label_seed, "dataset seed");
  label->add_option("--max-steps", label_max_steps, "rollout step cap");

  // oracle
  std::string oracle_tasks;
  std::string oracle_config;
  int k1 = 4;
  int k2 = 4;
  int k_pairs = 4;
  std::int64_t mc_runs = 0;
  std::uint64_t oracle_seed = 1;
  CLI::App* oracle = app.add_subcommand("oracle", "closed-form success/cost reports");
  oracle->add_option("--tasks", oracle_tasks, "synthetic task file")->required();
  oracle->add_option("--k1", k1, "plan samples per step");
  oracle->add_option("--k2", k2, "execution samples per step");
  oracle->add_option("--k-pairs", k_pairs, "unit pairs per step");
  oracle->add_option("--config", oracle_config,
                     "experiment config for the budget automaton oracle");
  oracle->add_option("--mc-runs", mc_runs, "Monte Carlo cross-check runs");
  oracle->add_option("--seed", oracle_seed, "Monte Carlo seed");

  // gen-specs
  dream::harness::SpecSuiteOptions suite;
  std::string specs_out = "specs.jsonl";
  CLI::App* gen_specs = app.add_subcommand("gen-specs", "generate a synthetic suite");
  gen_specs->add_option("--count", suite.count, "number of tasks");
  gen_specs->add_option("--steps", suite.steps, "steps per task");
  gen_specs->add_option("--profile", suite.profile, "easy|hard|mixed|uniform");
  gen_specs->add_option("--seed", suite.seed, "suite seed");
  gen_specs->add_option("--p-min", suite.p_min, "uniform profile plan lower bound");
  gen_specs->add_option("--p-max", suite.p_max, "uniform profile plan upper bound");
  gen_specs->add_option("--q-min", suite.q_min, "uniform profile exec lower bound");
  gen_specs->add_option("--q-max", suite.q_max, "uniform profile exec upper bound");
  gen_specs->add_option("--out", specs_out, "output JSONL path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(config_path, out_override, method_override, backend_override,
                     seed_override, seed_opt->count() > 0);
    }
    if (frontier->parsed()) return cmd_frontier(frontier_inputs, frontier_out);
    if (label->parsed()) {
      return cmd_label(label_tasks, label_out, rollouts, samples, temperature,
                       label_seed, label_max_steps);
    }
    if (oracle->parsed()) {
      return cmd_oracle(oracle_tasks, k1, k2, k_pairs, oracle_config, mc_runs,
                        oracle_seed);
    }
    if (gen_specs->parsed()) return cmd_gen_specs(suite, specs_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}
