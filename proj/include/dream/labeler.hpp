#pragma once

/**
 * Rollout-based reward labels.
 *
 * A prefix ending in a candidate plan or execution is labeled by sampling
 * independent continuations from that point: the record is positive exactly
 * when at least one continuation reaches the question's gold answer.
 * build_dataset decomposes sampled trajectories into one record per plan and
 * per execution and streams them out as line-delimited JSON.
 */

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "dream/core.hpp"
#include "dream/generation.hpp"

namespace dream::labeler {

struct LabeledPrefix {
  std::string question_id;
  core::Trajectory prefix;  // steps before the target; for an execution
                            // target the pending plan rides as the last step
  std::string target;
  core::Phase phase = core::Phase::planning;
  int rollouts = 0;
  int successes = 0;
  bool positive = false;  // successes >= 1
  std::uint64_t seed = 0;
  double temperature = 1.0;
  std::string backend_id;
};

struct LabelerOptions {
  int rollouts = 5;
  int samples_per_question = 1;
  double temperature = 1.0;
  int max_steps = 10;
  std::uint64_t seed = 1;
};

struct LabelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Labels one target. The question must carry a gold answer. Unfinished
/// rollouts count as failures; if every rollout fails at the transport level
/// the prefix is unlabelable and LabelError is thrown.
LabeledPrefix label_prefix(const core::Question& question,
                           const core::Trajectory& prefix, const std::string& target,
                           core::Phase phase, gen::GenerationBackend& backend,
                           const LabelerOptions& options,
                           std::uint64_t rollout_seed = 0);

using BackendFactory = std::function<std::unique_ptr<gen::GenerationBackend>(
    const core::Question&, std::uint64_t run_seed)>;

/// Samples trajectories per question, decomposes each into step prefixes
/// (every plan and every execution is a target), labels them, and returns
/// records ordered by (question, trajectory, step, phase). Duplicate
/// (question id, context) records keep the first occurrence. Per-question
/// failures are appended to skip_log and generation continues.
std::vector<LabeledPrefix> build_dataset(const std::vector<core::Question>& questions,
                                         const BackendFactory& factory,
                                         const LabelerOptions& options,
                                         std::vector<std::string>* skip_log = nullptr);

/// The reward-model input for a record: question, serialized prefix, and the
/// target with its phase cue. Also the dedup key.
std::string record_context(const core::Question& question, const LabeledPrefix& record);

/// One JSON object per line, keys sorted, byte-stable across reruns.
void write_records(const std::vector<core::Question>& questions,
                   const std::vector<LabeledPrefix>& records, std::ostream& out);

}  // namespace dream::labeler
