#include "dream/generation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dream::gen {

namespace {

constexpr std::uint64_t kPlanTag = 0x706c616eULL;
constexpr std::uint64_t kExecTag = 0x65786563ULL;

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string_view trim_view(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Matches "<label> <number>:" and returns the content after the colon
// (one following space consumed).
std::optional<std::pair<int, std::string_view>> match_marker(
    std::string_view line, std::string_view label) {
  if (line.size() <= label.size() || line.substr(0, label.size()) != label) {
    return std::nullopt;
  }
  std::size_t pos = label.size();
  if (pos >= line.size() || line[pos] != ' ') return std::nullopt;
  ++pos;
  std::size_t digits_begin = pos;
  while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
  if (pos == digits_begin || pos >= line.size() || line[pos] != ':') return std::nullopt;
  int index = 0;
  std::from_chars(line.data() + digits_begin, line.data() + pos, index);
  ++pos;  // colon
  if (pos < line.size() && line[pos] == ' ') ++pos;
  return std::make_pair(index, line.substr(pos));
}

void truncate_at_markers(std::string& text, const std::vector<std::string>& markers) {
  std::size_t cut = std::string::npos;
  for (const std::string& m : markers) {
    if (m.empty()) continue;
    const std::size_t at = text.find(m);
    if (at != std::string::npos) cut = std::min(cut, at);
  }
  if (cut != std::string::npos) text.erase(cut);
}

}  // namespace

std::string serialize_steps(const std::vector<core::Step>& steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string idx = std::to_string(i + 1);
    out += "Plan " + idx + ": " + steps[i].plan + "\n";
    if (!steps[i].execution.empty()) {
      out += "Execution " + idx + ": " + steps[i].execution + "\n";
    }
  }
  return out;
}

ParsedTrajectory parse_steps(std::string_view text) {
  ParsedTrajectory out;
  std::string* current = nullptr;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    if (auto m = match_marker(line, "Plan")) {
      out.steps.push_back(core::Step{std::string(m->second), "", {}, {}});
      current = &out.steps.back().plan;
    } else if (auto e = match_marker(line, "Execution")) {
      if (out.steps.empty()) out.steps.push_back(core::Step{});
      out.steps.back().execution = std::string(e->second);
      current = &out.steps.back().execution;
    } else if (current != nullptr && !(line.empty() && eol == std::string_view::npos)) {
      *current += "\n";
      *current += line;
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }

  // serialize_steps terminates each field with a newline; drop that one.
  for (core::Step& s : out.steps) {
    if (!s.plan.empty() && s.plan.back() == '\n') s.plan.pop_back();
    if (!s.execution.empty() && s.execution.back() == '\n') s.execution.pop_back();
  }

  out.finished = contains_final_answer(text);
  if (out.finished) out.final_answer = extract_final_answer(text);
  return out;
}

std::optional<std::string> extract_final_answer(std::string_view text) {
  const std::size_t at = text.rfind(kFinalAnswerMarker);
  if (at == std::string_view::npos) return std::nullopt;
  std::string_view rest = text.substr(at + kFinalAnswerMarker.size());
  const std::size_t eol = rest.find('\n');
  if (eol != std::string_view::npos) rest = rest.substr(0, eol);
  return std::string(trim_view(rest));
}

bool contains_final_answer(std::string_view text) {
  return text.find(kFinalAnswerMarker) != std::string_view::npos;
}

std::uint64_t prefix_fingerprint(const core::Trajectory& prefix) {
  return core::fnv1a(serialize_steps(prefix.steps));
}

// ============================================================================
// Sampling operations
// ============================================================================

namespace {

GenResult postprocess(GenResult result, const std::vector<std::string>& stop_markers) {
  for (std::size_t i = 0; i < result.texts.size(); ++i) {
    truncate_at_markers(result.texts[i], stop_markers);
    result.finished_flags[i] = contains_final_answer(result.texts[i]);
  }
  return result;
}

}  // namespace

GenResult sample_plans(const std::string& question_text,
                       const core::Trajectory& prefix, int k,
                       GenerationBackend& backend, const SampleParams& params,
                       int first_sample_index) {
  if (prefix.finished) throw std::invalid_argument("cannot expand a finished trajectory");
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  GenRequest req;
  req.question_text = question_text;
  req.prefix = prefix;
  req.mode = GenMode::plan;
  req.k = k;
  req.temperature = params.temperature;
  req.stop_markers = {"\nExecution"};
  req.max_tokens = params.max_tokens;
  req.max_steps = params.max_steps;
  req.first_sample_index = first_sample_index;
  return postprocess(backend.generate(req), req.stop_markers);
}

GenResult sample_executions(const std::string& question_text,
                            const core::Trajectory& prefix,
                            const std::string& plan, int k,
                            GenerationBackend& backend,
                            const SampleParams& params,
                            int first_sample_index) {
  if (plan.empty()) throw std::invalid_argument("execution sampling requires a plan");
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  GenRequest req;
  req.question_text = question_text;
  req.prefix = prefix;
  req.mode = GenMode::execution_given_plan;
  req.plan = plan;
  req.k = k;
  req.temperature = params.temperature;
  req.stop_markers = {"\nPlan"};
  req.max_tokens = params.max_tokens;
  req.max_steps = params.max_steps;
  req.first_sample_index = first_sample_index;
  return postprocess(backend.generate(req), req.stop_markers);
}

std::vector<core::Trajectory> sample_full_trajectories(
    const core::Question& question, int k, GenerationBackend& backend,
    const SampleParams& params, GenResult* raw_out) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  GenRequest req;
  req.question_text = question.text;
  req.prefix.question_id = question.id;
  req.mode = GenMode::full_trajectory;
  req.k = k;
  req.temperature = params.temperature;
  req.max_tokens = params.max_tokens;
  req.max_steps = params.max_steps;
  GenResult result = backend.generate(req);
  if (raw_out != nullptr) *raw_out = result;

  std::vector<core::Trajectory> out;
  out.reserve(result.size());
  for (std::size_t i = 0; i < result.size(); ++i) {
    ParsedTrajectory parsed = parse_steps(result.texts[i]);
    core::Trajectory t;
    t.question_id = question.id;
    t.steps = std::move(parsed.steps);
    t.finished = parsed.finished;
    t.final_answer = parsed.final_answer;
    if (static_cast<int>(t.steps.size()) > params.max_steps) {
      t.steps.resize(params.max_steps);
      t.finished = false;
      t.final_answer.reset();
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ============================================================================
// Prompting
// ============================================================================

FewShotBank load_few_shot_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open few-shot bank: " + path);
  FewShotBank bank;
  std::string block;
  std::string line;
  auto flush = [&] {
    const std::string_view t = trim_view(block);
    if (!t.empty()) bank.exemplars.emplace_back(t);
    block.clear();
  };
  while (std::getline(in, line)) {
    if (trim_view(line) == "---") {
      flush();
    } else {
      block += line;
      block += "\n";
    }
  }
  flush();
  return bank;
}

std::string render_prompt(const std::string& question_text,
                          const core::Trajectory& prefix, GenMode mode,
                          const std::optional<std::string>& pending_plan,
                          const FewShotBank& bank) {
  if (bank.exemplars.empty()) throw std::invalid_argument("few-shot bank is empty");
  if (mode == GenMode::execution_given_plan && !pending_plan) {
    throw std::invalid_argument("execution prompt requires a pending plan");
  }

  std::string out =
      "Answer the question with numbered reasoning steps. Each step states a "
      "short plan, then the execution that carries it out. Finish with a line "
      "'#### <final answer>'.\n";
  for (const std::string& ex : bank.exemplars) {
    out += "\n";
    out += ex;
    out += "\n";
  }
  out += "\nQuestion: " + question_text + "\n";
  out += serialize_steps(prefix.steps);

  const std::string idx = std::to_string(prefix.steps.size() + 1);
  switch (mode) {
    case GenMode::plan:
    case GenMode::full_trajectory:
      out += "Plan " + idx + ":";
      break;
    case GenMode::execution_given_plan:
      out += "Plan " + idx + ": " + *pending_plan + "\n";
      out += "Execution " + idx + ":";
      break;
  }
  return out;
}

// ============================================================================
// Synthetic backend
// ============================================================================

bool plan_viable(std::string_view plan_text) {
  return plan_text.find(kDeadEndTag) == std::string_view::npos;
}

bool execution_viable(std::string_view exec_text) {
  return exec_text.find(kStuckTag) == std::string_view::npos;
}

bool trajectory_viable(const core::Trajectory& prefix) {
  for (const core::Step& s : prefix.steps) {
    if (!plan_viable(s.plan)) return false;
    if (!s.execution.empty() && !execution_viable(s.execution)) return false;
  }
  return true;
}

SyntheticGenerationBackend::SyntheticGenerationBackend(
    synth::SyntheticTaskSpec spec, std::uint64_t run_seed)
    : spec_(std::move(spec)) {
  synth::validate_spec(spec_);
  seed_base_ = core::hash_combine(run_seed, core::fnv1a(spec_.id));
}

SyntheticGenerationBackend::Draw SyntheticGenerationBackend::draw_plan(
    const core::Trajectory& prefix, int sample_index) const {
  const std::size_t s = prefix.steps.size();
  std::uint64_t h = core::hash_combine(seed_base_, kPlanTag);
  h = core::hash_combine(h, static_cast<std::uint64_t>(s));
  h = core::hash_combine(h, prefix_fingerprint(prefix));
  h = core::hash_combine(h, static_cast<std::uint64_t>(sample_index));

  const bool in_range = s < spec_.steps.size();
  const bool ok = in_range && trajectory_viable(prefix) &&
                  core::unit_uniform(h) < spec_.steps[s].plan_success;
  Draw d;
  d.text = "subgoal " + hex16(core::mix64(h ^ 0x5eedULL));
  if (!ok) {
    d.text += " ";
    d.text += kDeadEndTag;
  }
  d.tokens = spec_.plan_cost;
  return d;
}

SyntheticGenerationBackend::Draw SyntheticGenerationBackend::draw_execution(
    const core::Trajectory& prefix, const std::string& plan,
    int sample_index) const {
  const std::size_t s = prefix.steps.size();
  std::uint64_t h = core::hash_combine(seed_base_, kExecTag);
  h = core::hash_combine(h, static_cast<std::uint64_t>(s));
  h = core::hash_combine(h, core::fnv1a(plan));
  h = core::hash_combine(h, static_cast<std::uint64_t>(sample_index));

  const bool in_range = s < spec_.steps.size();
  // A dead-end plan poisons every execution drawn under it.
  const bool plan_ok = in_range && trajectory_viable(prefix) && plan_viable(plan);
  const bool ok = plan_ok && core::unit_uniform(h) < spec_.steps[s].exec_success;
  const bool final_step = in_range && s + 1 == spec_.steps.size();

  Draw d;
  d.text = "progress " + hex16(core::mix64(h ^ 0xfeedULL));
  if (!ok) {
    d.text += " ";
    d.text += kStuckTag;
  }
  if (final_step) {
    d.text += "\n";
    d.text += kFinalAnswerMarker;
    d.text += " ";
    d.text += ok ? spec_.answer : std::string(kUnresolvedAnswer);
    d.finished = true;
  }
  d.tokens = spec_.exec_cost;
  return d;
}

SyntheticGenerationBackend::Draw SyntheticGenerationBackend::draw_trajectory(
    const std::string& question_id, int sample_index, int max_steps) const {
  core::Trajectory t;
  t.question_id = question_id;
  int tokens = 0;
  bool finished = false;
  const int limit = std::min<int>(max_steps, static_cast<int>(spec_.steps.size()));
  for (int s = 0; s < limit; ++s) {
    const Draw plan = draw_plan(t, s == 0 ? sample_index : 0);
    const Draw exec = draw_execution(t, plan.text, 0);
    t.steps.push_back(core::Step{plan.text, exec.text, {}, {}});
    tokens += plan.tokens + exec.tokens;
    if (exec.finished) {
      finished = true;
      break;
    }
  }
  Draw d;
  d.text = serialize_steps(t.steps);
  d.tokens = tokens;
  d.finished = finished;
  return d;
}

GenResult SyntheticGenerationBackend::generate(const GenRequest& request) {
  if (request.k < 1) throw std::invalid_argument("k must be at least 1");
  GenResult out;
  out.texts.reserve(request.k);
  out.token_counts.reserve(request.k);
  out.finished_flags.reserve(request.k);
  for (int j = 0; j < request.k; ++j) {
    const int idx = request.first_sample_index + j;
    Draw d;
    switch (request.mode) {
      case GenMode::plan:
        d = draw_plan(request.prefix, idx);
        break;
      case GenMode::execution_given_plan:
        if (!request.plan) throw std::invalid_argument("execution mode requires a plan");
        d = draw_execution(request.prefix, *request.plan, idx);
        break;
      case GenMode::full_trajectory:
        d = draw_trajectory(request.prefix.question_id, idx, request.max_steps);
        break;
    }
    out.texts.push_back(std::move(d.text));
    out.token_counts.push_back(d.tokens);
    out.finished_flags.push_back(d.finished);
  }
  return out;
}

}  // namespace dream::gen
