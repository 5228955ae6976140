#include "dream/labeler.hpp"

#include <map>
#include <set>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "dream/reward.hpp"

namespace dream::labeler {

namespace {

struct TransportFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Completes a trajectory from a prefix. The first draw of the continuation
// (the pending plan's execution, or the next step's plan) carries the rollout
// index as its draw salt; afterwards content divergence keeps rollouts
// independent on its own.
core::Trajectory complete_from(const core::Question& question, core::Trajectory t,
                               std::optional<std::string> pending_plan,
                               int rollout_index, gen::GenerationBackend& backend,
                               const gen::SampleParams& params) {
  bool first_draw = true;
  while (!t.finished && static_cast<int>(t.steps.size()) < params.max_steps) {
    std::string plan;
    if (pending_plan) {
      plan = std::move(*pending_plan);
      pending_plan.reset();
    } else {
      gen::GenResult p = gen::sample_plans(question.text, t, 1, backend, params,
                                           first_draw ? rollout_index : 0);
      if (p.texts.empty()) throw TransportFailure("plan generation failed");
      plan = std::move(p.texts[0]);
      first_draw = false;
    }
    gen::GenResult e = gen::sample_executions(question.text, t, plan, 1, backend,
                                              params, first_draw ? rollout_index : 0);
    first_draw = false;
    if (e.texts.empty()) throw TransportFailure("execution generation failed");
    core::Step step;
    step.plan = std::move(plan);
    step.execution = std::move(e.texts[0]);
    t.steps.push_back(std::move(step));
    if (gen::contains_final_answer(t.steps.back().execution)) {
      t.finished = true;
      t.final_answer = gen::extract_final_answer(t.steps.back().execution);
    }
  }
  return t;
}

}  // namespace

LabeledPrefix label_prefix(const core::Question& question,
                           const core::Trajectory& prefix, const std::string& target,
                           core::Phase phase, gen::GenerationBackend& backend,
                           const LabelerOptions& options, std::uint64_t rollout_seed) {
  if (!question.gold_answer) {
    throw std::invalid_argument("labeling requires a gold answer");
  }
  if (options.rollouts < 1) throw std::invalid_argument("rollouts must be at least 1");

  gen::SampleParams params;
  params.temperature = options.temperature;
  params.max_steps = options.max_steps;

  int successes = 0;
  int transport_failures = 0;
  for (int r = 0; r < options.rollouts; ++r) {
    try {
      core::Trajectory start = prefix;
      std::optional<std::string> pending;
      if (phase == core::Phase::planning) {
        pending = target;  // continuation begins with this plan's execution
      } else {
        if (start.steps.empty() || !start.steps.back().execution.empty()) {
          throw std::invalid_argument(
              "execution target requires a pending-plan prefix");
        }
        start.steps.back().execution = target;
        if (gen::contains_final_answer(target)) {
          start.finished = true;
          start.final_answer = gen::extract_final_answer(target);
        }
      }
      const core::Trajectory done = complete_from(question, std::move(start),
                                                  std::move(pending), r + 1,
                                                  backend, params);
      if (done.finished && done.final_answer &&
          core::answers_match(*done.final_answer, *question.gold_answer)) {
        ++successes;
      }
    } catch (const TransportFailure&) {
      ++transport_failures;  // counts as a failed rollout
    }
  }
  if (transport_failures == options.rollouts) {
    throw LabelError("all rollouts failed for question " + question.id);
  }

  LabeledPrefix record;
  record.question_id = question.id;
  record.prefix = prefix;
  record.target = target;
  record.phase = phase;
  record.rollouts = options.rollouts;
  record.successes = successes;
  record.positive = successes >= 1;
  record.seed = rollout_seed;
  record.temperature = options.temperature;
  record.backend_id = backend.id();
  return record;
}

std::string record_context(const core::Question& question, const LabeledPrefix& record) {
  rm::RewardQuery q;
  q.question_text = question.text;
  q.prior_steps = record.prefix.steps;
  q.current_text = record.target;
  q.phase = record.phase;
  return rm::build_context(q);
}

std::vector<LabeledPrefix> build_dataset(const std::vector<core::Question>& questions,
                                         const BackendFactory& factory,
                                         const LabelerOptions& options,
                                         std::vector<std::string>* skip_log) {
  if (questions.empty()) throw std::invalid_argument("empty question set");

  std::vector<LabeledPrefix> records;
  std::set<std::pair<std::string, std::string>> seen;  // (question id, context)

  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    const core::Question& question = questions[qi];
    for (int t = 0; t < options.samples_per_question; ++t) {
      const std::uint64_t run_seed = core::hash_combine(
          core::hash_combine(options.seed, core::fnv1a(question.id)),
          static_cast<std::uint64_t>(t));
      std::unique_ptr<gen::GenerationBackend> backend = factory(question, run_seed);

      gen::SampleParams params;
      params.temperature = options.temperature;
      params.max_steps = options.max_steps;

      std::vector<core::Trajectory> trajectories;
      try {
        trajectories = gen::sample_full_trajectories(question, 1, *backend, params);
      } catch (const std::exception& e) {
        if (skip_log != nullptr) {
          skip_log->push_back("question " + question.id + ": " + e.what());
        }
        continue;
      }
      if (trajectories.empty() || trajectories.front().steps.empty()) {
        if (skip_log != nullptr) {
          skip_log->push_back("question " + question.id + ": no trajectory sampled");
        }
        continue;
      }

      const core::Trajectory& traj = trajectories.front();
      core::Trajectory prefix;
      prefix.question_id = question.id;
      for (std::size_t s = 0; s < traj.steps.size(); ++s) {
        const core::Step& step = traj.steps[s];
        for (const core::Phase phase : {core::Phase::planning, core::Phase::execution}) {
          const std::string& target =
              phase == core::Phase::planning ? step.plan : step.execution;
          core::Trajectory record_prefix = prefix;
          if (phase == core::Phase::execution) {
            core::Step pending;
            pending.plan = step.plan;
            record_prefix.steps.push_back(pending);
          }
          try {
            LabeledPrefix record =
                label_prefix(question, record_prefix, target, phase, *backend,
                             options, run_seed);
            const auto key = std::make_pair(question.id, record_context(question, record));
            if (seen.insert(key).second) records.push_back(std::move(record));
          } catch (const LabelError& e) {
            if (skip_log != nullptr) skip_log->push_back(e.what());
          }
        }
        prefix.steps.push_back(step);
      }
    }
  }
  return records;
}

void write_records(const std::vector<core::Question>& questions,
                   const std::vector<LabeledPrefix>& records, std::ostream& out) {
  std::map<std::string, const core::Question*> by_id;
  for (const core::Question& q : questions) by_id[q.id] = &q;

  for (const LabeledPrefix& r : records) {
    const auto it = by_id.find(r.question_id);
    const core::Question empty;
    const core::Question& q = it == by_id.end() ? empty : *it->second;
    nlohmann::json j;
    j["context"] = record_context(q, r);
    j["phase"] = r.phase == core::Phase::planning ? "plan" : "exec";
    j["label"] = r.positive ? "+" : "-";
    j["successes"] = r.successes;
    j["rollouts"] = r.rollouts;
    j["seed"] = r.seed;
    j["temperature"] = r.temperature;
    j["backend"] = r.backend_id;
    out << j.dump() << "\n";
  }
}

}  // namespace dream::labeler
