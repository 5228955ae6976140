#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "dream/harness.hpp"
#include "test_helpers.hpp"

using namespace dream;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/dream_test_") + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

harness::TaskSet flat_suite(int count, int steps, double p, double q) {
  harness::TaskSet tasks;
  tasks.format = "synthetic";
  for (int i = 0; i < count; ++i) {
    tasks.synthetic.push_back(
        testutil::flat_spec(steps, p, q, "42", "task-" + std::to_string(i)));
  }
  return tasks;
}

harness::ExperimentConfig base_config(harness::Method method) {
  harness::ExperimentConfig cfg;
  cfg.method = method;
  cfg.backend = "synthetic";
  cfg.task_format = "synthetic";
  cfg.seeds = {1};
  cfg.search = testutil::make_config(4, 2, 4, 2);
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("load_tasks parses synthetic specs and flags problems") {
  const std::string path = temp_path("specs.jsonl");
  write_file(path,
             R"({"id":"a","steps":[{"p":0.5,"q":0.5}],"answer":"1","c_p":1,"c_e":1})"
             "\n"
             R"({"id":"b","steps":[{"p":1.0,"q":1.0},{"p":0.5,"q":0.5}],"answer":"2"})"
             "\n");
  const harness::TaskSet tasks = harness::load_tasks(path, "synthetic");
  REQUIRE(tasks.synthetic.size() == 2);
  CHECK(tasks.synthetic[1].steps.size() == 2);

  write_file(path, "{broken\n");
  try {
    harness::load_tasks(path, "synthetic");
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }

  write_file(path,
             R"({"id":"dup","steps":[{"p":1,"q":1}],"answer":"1"})"
             "\n"
             R"({"id":"dup","steps":[{"p":1,"q":1}],"answer":"1"})"
             "\n");
  try {
    harness::load_tasks(path, "synthetic");
    FAIL("expected a duplicate id error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("dup") != std::string::npos);
  }

  write_file(path, "");
  std::string warning;
  const harness::TaskSet empty = harness::load_tasks(path, "synthetic", &warning);
  CHECK(empty.size() == 0);
  CHECK_FALSE(warning.empty());

  CHECK_THROWS_AS(harness::load_tasks(path, "mystery"), std::invalid_argument);
}

TEST_CASE("load_tasks parses question and code formats") {
  const std::string path = temp_path("questions.jsonl");
  write_file(path, R"({"id":"q1","text":"What is 2+2?","gold_answer":"4"})" "\n");
  const harness::TaskSet questions = harness::load_tasks(path, "questions");
  REQUIRE(questions.questions.size() == 1);
  CHECK(questions.questions[0].gold_answer == "4");

  const std::string code_path = temp_path("code.jsonl");
  write_file(code_path,
             R"({"id":"c1","prompt":"do it","visible_tests":[{"input":"1","expected":"2"}],)"
             R"("hidden_tests":[{"input":"3","expected":"4"}]})"
             "\n");
  const harness::TaskSet code_tasks = harness::load_tasks(code_path, "code");
  REQUIRE(code_tasks.code.size() == 1);
  CHECK(code_tasks.code[0].visible_tests.size() == 1);
  CHECK(code_tasks.code[0].hidden_tests.size() == 1);
}

TEST_CASE("experiment config loads symbol keys and env overrides") {
  const std::string path = temp_path("config.json");
  write_file(path, R"({
    "method": "dream_plus",
    "backend": "synthetic",
    "task_file": "tasks.jsonl",
    "task_format": "synthetic",
    "seeds": [3, 4],
    "out": "rows.csv",
    "search": {"N1": 8, "n1": 2, "N2": 6, "n2": 3, "m1": 1, "m2": 2,
               "tau_p1": 0.8, "tau_p2": 0.1, "tau_e1": 0.7, "tau_e2": 0.2,
               "max_steps": 5},
    "oracle_noise": {"flip_prob": 0.05, "jitter": 0.01}
  })");
  const harness::ExperimentConfig cfg = harness::load_experiment_config(path);
  CHECK(cfg.method == harness::Method::dream_plus);
  CHECK(cfg.search.planning_budget == 8);
  CHECK(cfg.search.execution_beam == 3);
  CHECK(cfg.search.plan_extend_threshold == doctest::Approx(0.1));
  CHECK(cfg.search.max_steps == 5);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(cfg.oracle_noise.flip_prob == doctest::Approx(0.05));

  setenv("DREAM_GENERATION_ENDPOINT", "http://127.0.0.1:9/gen", 1);
  const harness::ExperimentConfig overridden = harness::load_experiment_config(path);
  CHECK(overridden.remote.generation_endpoint == "http://127.0.0.1:9/gen");
  unsetenv("DREAM_GENERATION_ENDPOINT");
}

TEST_CASE("config validation enforces method and backend compatibility") {
  harness::ExperimentConfig cfg = base_config(harness::Method::dream);
  CHECK_NOTHROW(harness::validate_experiment_config(cfg));

  cfg.seeds.clear();
  CHECK_THROWS_AS(harness::validate_experiment_config(cfg), std::invalid_argument);

  cfg = base_config(harness::Method::codetree_dream);
  CHECK_THROWS_AS(harness::validate_experiment_config(cfg), std::invalid_argument);

  cfg = base_config(harness::Method::dream);
  cfg.backend = "remote";
  CHECK_THROWS_AS(harness::validate_experiment_config(cfg), std::invalid_argument);

  cfg = base_config(harness::Method::dream);
  cfg.sampling_mode = "warp";
  CHECK_THROWS_AS(harness::validate_experiment_config(cfg), std::invalid_argument);
}

TEST_CASE("deterministic tasks give accuracy 1 under every method") {
  const harness::TaskSet tasks = flat_suite(20, 2, 1.0, 1.0);
  for (const harness::Method method :
       {harness::Method::majority, harness::Method::unit_beam, harness::Method::dream,
        harness::Method::dream_plus}) {
    harness::ExperimentConfig cfg = base_config(method);
    const harness::ExperimentResult result = harness::run_experiment(cfg, tasks);
    REQUIRE(result.rows.size() == 1);
    CHECK(result.rows[0].accuracy == doctest::Approx(1.0));
    CHECK(result.tasks_failed == 0);
  }
}

TEST_CASE("majority accuracy matches the binomial enumeration") {
  const harness::TaskSet tasks = flat_suite(4000, 1, 0.6, 1.0);
  harness::ExperimentConfig cfg = base_config(harness::Method::majority);
  cfg.majority_k = 3;
  const harness::ExperimentResult result = harness::run_experiment(cfg, tasks);
  const double sigma = std::sqrt(0.648 * 0.352 / 4000.0);
  CHECK(std::abs(result.rows[0].accuracy - 0.648) <= 3.0 * sigma);
  CHECK(result.rows[0].mean_tokens == doctest::Approx(6.0));  // 3 trajectories x 2
}

TEST_CASE("experiments are deterministic and parallelism independent") {
  const harness::TaskSet tasks = flat_suite(40, 3, 0.7, 0.7);
  harness::ExperimentConfig cfg = base_config(harness::Method::dream_plus);
  cfg.search = testutil::make_config(4, 2, 4, 2, 1, 1, 0.6, 0.2, 0.6, 0.2);
  cfg.seeds = {7, 8};

  const harness::ExperimentResult serial = harness::run_experiment(cfg, tasks);
  cfg.parallelism = 4;
  const harness::ExperimentResult parallel = harness::run_experiment(cfg, tasks);
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].accuracy == parallel.rows[i].accuracy);
    CHECK(serial.rows[i].mean_tokens == parallel.rows[i].mean_tokens);
    CHECK(serial.rows[i].early_stop_fraction == parallel.rows[i].early_stop_fraction);
  }
  CHECK(serial.task_log == parallel.task_log);

  const std::string out_a = temp_path("frontier_a.csv");
  const std::string out_b = temp_path("frontier_b.csv");
  harness::emit_frontier(serial.rows, out_a);
  harness::emit_frontier(parallel.rows, out_b);
  CHECK(read_file(out_a) == read_file(out_b));
  CHECK(read_file(out_a + ".plot") == read_file(out_b + ".plot"));
}

TEST_CASE("runs_per_task repeats tasks under derived seeds") {
  const harness::TaskSet tasks = flat_suite(50, 1, 0.5, 1.0);
  harness::ExperimentConfig cfg = base_config(harness::Method::dream);
  cfg.search = testutil::make_config(2, 1, 2, 1);
  cfg.runs_per_task = 4;
  const harness::ExperimentResult result = harness::run_experiment(cfg, tasks);
  CHECK(result.tasks_attempted == 200);
  CHECK(result.task_log.size() == 200);
  // Repeats draw fresh randomness: accuracy sits near 0.75, not at 0 or 1.
  CHECK(result.rows[0].accuracy > 0.5);
  CHECK(result.rows[0].accuracy < 0.95);
}

TEST_CASE("planted code experiments run end to end") {
  harness::TaskSet tasks;
  tasks.format = "code";
  for (int i = 0; i < 5; ++i) {
    code::CodeTask task = testutil::make_code_task(4, 2);
    task.id = "code-" + std::to_string(i);
    tasks.code.push_back(task);
  }
  harness::ExperimentConfig cfg = base_config(harness::Method::codetree_dream);
  cfg.backend = "planted";
  cfg.task_format = "code";
  cfg.planted_pass_prob = 0.9;
  cfg.code_budget = 60;
  const harness::ExperimentResult result = harness::run_experiment(cfg, tasks);
  CHECK(result.tasks_failed == 0);
  CHECK(result.rows[0].mean_samples > 0.0);
}

TEST_CASE("emit_frontier writes sorted rows and is reproducible") {
  std::vector<harness::FrontierRow> rows;
  harness::FrontierRow row;
  row.method = "dream";
  row.fingerprint = "f1";
  row.seed = 1;
  row.accuracy = 0.5;
  row.mean_tokens = 100.0;
  row.mean_samples = 10.0;
  row.early_stop_fraction = 0.25;
  rows.push_back(row);
  row.mean_tokens = 50.0;
  row.accuracy = 0.4;
  rows.push_back(row);
  row.method = "majority";
  row.mean_tokens = 75.0;
  rows.push_back(row);

  const std::string path = temp_path("rows.csv");
  harness::emit_frontier(rows, path);
  const std::string first = read_file(path);
  CHECK(first.starts_with(
      "method,fingerprint,seed,accuracy,mean_tokens,mean_samples,early_stop_fraction\n"));
  const auto parsed = harness::read_frontier(path);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0].method == "dream");
  CHECK(parsed[0].mean_tokens == doctest::Approx(50.0));
  CHECK(parsed[1].mean_tokens == doctest::Approx(100.0));
  CHECK(parsed[2].method == "majority");

  harness::emit_frontier(rows, path);
  CHECK(read_file(path) == first);

  std::vector<harness::FrontierRow> single(1, rows[0]);
  harness::emit_frontier(single, path);
  const std::string content = read_file(path);
  CHECK(std::count(content.begin(), content.end(), '\n') == 2);

  CHECK_THROWS_AS(harness::emit_frontier({}, path), std::invalid_argument);
}

TEST_CASE("config fingerprints track the configuration") {
  harness::ExperimentConfig a = base_config(harness::Method::dream);
  harness::ExperimentConfig b = a;
  CHECK(harness::config_fingerprint(a) == harness::config_fingerprint(b));
  b.search.planning_budget = 16;
  CHECK(harness::config_fingerprint(a) != harness::config_fingerprint(b));
}

TEST_CASE("spec suite generation respects profiles and is deterministic") {
  harness::SpecSuiteOptions options;
  options.count = 12;
  options.steps = 3;
  options.profile = "easy";
  options.seed = 5;
  const auto easy = harness::generate_spec_suite(options);
  REQUIRE(easy.size() == 12);
  for (const auto& spec : easy) {
    for (const auto& step : spec.steps) {
      CHECK(step.plan_success >= 0.9);
      CHECK(step.exec_success >= 0.9);
    }
  }
  options.profile = "hard";
  for (const auto& spec : harness::generate_spec_suite(options)) {
    for (const auto& step : spec.steps) {
      CHECK(step.plan_success <= 0.3);
      CHECK(step.exec_success <= 0.3);
    }
  }
  options.profile = "mixed";
  const auto mixed = harness::generate_spec_suite(options);
  for (const auto& spec : mixed) {
    CHECK(spec.steps[0].exec_success <= 0.35);  // first step: easy plan, hard exec
    CHECK(spec.steps[0].plan_success >= 0.9);
    CHECK(spec.steps[1].exec_success >= 0.9);
  }
  const auto again = harness::generate_spec_suite(options);
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    CHECK(mixed[i].answer == again[i].answer);
    CHECK(mixed[i].steps[0].plan_success == again[i].steps[0].plan_success);
  }

  std::ostringstream out;
  harness::write_spec_suite(mixed, out);
  const std::string line = out.str().substr(0, out.str().find('\n'));
  CHECK(line.find("\"steps\"") != std::string::npos);
  CHECK(line.find("\"c_p\"") != std::string::npos);
}

TEST_CASE("the CLI maps config errors and failure rates to exit codes") {
  const std::string binary = std::string(DREAM_BINARY_DIR) + "/dream";
  const std::string bad_config = temp_path("bad_config.json");
  write_file(bad_config, R"({"method": "mystery"})");
  const int config_error =
      std::system((binary + " run --config " + bad_config + " >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(config_error) == 1);

  // A remote backend pointing nowhere fails every task: exit 2.
  const std::string tasks_path = temp_path("cli_tasks.jsonl");
  write_file(tasks_path, R"({"id":"q1","text":"2+2?","gold_answer":"4"})" "\n");
  const std::string remote_config = temp_path("remote_config.json");
  write_file(remote_config, R"({
    "method": "dream", "backend": "remote",
    "task_file": ")" + tasks_path + R"(", "task_format": "questions",
    "seeds": [1], "out": "/tmp/dream_test_cli_frontier.csv",
    "search": {"N1": 2, "n1": 1, "N2": 2, "n2": 1},
    "remote": {"generation_endpoint": "http://127.0.0.1:9/gen",
               "reward_endpoint": "http://127.0.0.1:9/score",
               "timeout_ms": 100, "retries": 0}
  })");
  const int partial =
      std::system((binary + " run --config " + remote_config + " >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(partial) == 2);

  // A healthy synthetic run exits 0.
  const std::string specs_path = temp_path("cli_specs.jsonl");
  write_file(specs_path,
             R"({"id":"s1","steps":[{"p":1.0,"q":1.0}],"answer":"42"})" "\n");
  const std::string good_config = temp_path("good_config.json");
  write_file(good_config, R"({
    "method": "dream_plus", "backend": "synthetic",
    "task_file": ")" + specs_path + R"(", "task_format": "synthetic",
    "seeds": [1], "out": "/tmp/dream_test_cli_frontier.csv",
    "search": {"N1": 4, "n1": 2, "N2": 4, "n2": 2, "tau_p1": 0.5, "tau_e1": 0.5}
  })");
  const int ok =
      std::system((binary + " run --config " + good_config + " >/dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(ok) == 0);
}

}  // TEST_SUITE("harness")
