#pragma once

/**
 * Candidate generation: prompt rendering, the plan/execution text format,
 * and sampling backends.
 *
 * Step serialization uses line markers "Plan i:" / "Execution i:" and the
 * final answer is flagged with a trailing "#### <answer>" line. Sampling is
 * exposed through a backend interface; the synthetic backend draws from a
 * planted task spec with counter-based randomness (every sample is a pure
 * function of run seed, conditioning content, and draw index), which makes
 * runs bit-reproducible under any batching or concurrency schedule.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dream/core.hpp"
#include "dream/synthetic.hpp"

namespace dream::gen {

inline constexpr std::string_view kFinalAnswerMarker = "####";
inline constexpr std::string_view kDeadEndTag = "[dead end]";
inline constexpr std::string_view kStuckTag = "[stuck]";
inline constexpr std::string_view kUnresolvedAnswer = "unresolved";

// ============================================================================
// Serialization of the plan-execution format
// ============================================================================

std::string serialize_steps(const std::vector<core::Step>& steps);

struct ParsedTrajectory {
  std::vector<core::Step> steps;
  bool finished = false;
  std::optional<std::string> final_answer;
};

/// Inverse of serialize_steps. Content lines that do not open a new
/// "Plan i:" / "Execution i:" marker accumulate into the current field.
ParsedTrajectory parse_steps(std::string_view text);

std::optional<std::string> extract_final_answer(std::string_view text);
bool contains_final_answer(std::string_view text);

/// Stable fingerprint of a trajectory prefix, used to key synthetic draws.
std::uint64_t prefix_fingerprint(const core::Trajectory& prefix);

// ============================================================================
// Requests and results
// ============================================================================

enum class GenMode { plan, execution_given_plan, full_trajectory };

struct SampleParams {
  double temperature = 1.0;
  int max_tokens = 512;
  int max_steps = 10;  // trajectory-mode step cap
};

struct GenRequest {
  std::string question_text;
  core::Trajectory prefix;
  GenMode mode = GenMode::plan;
  std::optional<std::string> plan;  // required for execution mode
  int k = 1;
  double temperature = 1.0;
  std::vector<std::string> stop_markers;
  int max_tokens = 512;
  int max_steps = 10;
  int first_sample_index = 0;  // draw-order offset, keeps extension draws
                               // on the same counter stream as the base quota
};

struct GenResult {
  std::vector<std::string> texts;
  std::vector<int> token_counts;
  std::vector<bool> finished_flags;
  bool partial = false;  // backend delivered fewer samples than requested
  std::string error;

  std::size_t size() const { return texts.size(); }
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual GenResult generate(const GenRequest& request) = 0;
  virtual std::string id() const = 0;
};

// ============================================================================
// Sampling operations
// ============================================================================

GenResult sample_plans(const std::string& question_text,
                       const core::Trajectory& prefix, int k,
                       GenerationBackend& backend, const SampleParams& params,
                       int first_sample_index = 0);

GenResult sample_executions(const std::string& question_text,
                            const core::Trajectory& prefix,
                            const std::string& plan, int k,
                            GenerationBackend& backend,
                            const SampleParams& params,
                            int first_sample_index = 0);

/// When raw_out is non-null it receives the backend result (token counts
/// feed the ledger).
std::vector<core::Trajectory> sample_full_trajectories(
    const core::Question& question, int k, GenerationBackend& backend,
    const SampleParams& params, GenResult* raw_out = nullptr);

// ============================================================================
// Prompting
// ============================================================================

struct FewShotBank {
  std::vector<std::string> exemplars;
};

/// Loads exemplar blocks separated by lines containing only "---".
FewShotBank load_few_shot_bank(const std::string& path);

/// Deterministic prompt: instruction, exemplars, question, serialized prior
/// steps, then the phase cue ("Plan k:" or "Execution k:"). Throws if the
/// bank is empty.
std::string render_prompt(const std::string& question_text,
                          const core::Trajectory& prefix, GenMode mode,
                          const std::optional<std::string>& pending_plan,
                          const FewShotBank& bank);

// ============================================================================
// Synthetic backend
// ============================================================================

/// Is this trajectory still on a viable path? False once any plan carries the
/// dead-end tag or any execution the stuck tag.
bool trajectory_viable(const core::Trajectory& prefix);
bool plan_viable(std::string_view plan_text);
bool execution_viable(std::string_view exec_text);

class SyntheticGenerationBackend : public GenerationBackend {
 public:
  SyntheticGenerationBackend(synth::SyntheticTaskSpec spec, std::uint64_t run_seed);

  GenResult generate(const GenRequest& request) override;
  std::string id() const override { return "synthetic"; }

  const synth::SyntheticTaskSpec& spec() const { return spec_; }

 private:
  struct Draw {
    std::string text;
    int tokens = 0;
    bool finished = false;
  };

  Draw draw_plan(const core::Trajectory& prefix, int sample_index) const;
  Draw draw_execution(const core::Trajectory& prefix, const std::string& plan,
                      int sample_index) const;
  Draw draw_trajectory(const std::string& question_id, int sample_index,
                       int max_steps) const;

  synth::SyntheticTaskSpec spec_;
  std::uint64_t seed_base_ = 0;
};

}  // namespace dream::gen
