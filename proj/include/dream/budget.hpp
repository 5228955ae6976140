#pragma once

/**
 * The two-threshold budget automaton shared by every sampling scope.
 *
 * A scope draws up to `quota` candidates in sample order. Once
 * `required_above` candidates score strictly above tau_1 the scope stops
 * early. If the whole base quota completes with every score below tau_2 the
 * scope may draw up to `extension_limit` extra samples, still honoring the
 * stop rule (a stop during the extension pass halts drawing but is not an
 * early stop). Scoring failures consume budget and are discarded.
 *
 * In over-request mode the full pass is drawn in one batch and replayed in
 * sample order; draws past the stopping point are discarded without charge.
 * Sequential mode draws one sample at a time. Backends seed draws by content
 * and index, so both modes yield identical results.
 */

#include <functional>
#include <string>
#include <vector>

#include "dream/core.hpp"
#include "dream/reward.hpp"

namespace dream::budget {

enum class SamplingMode { overrequest, sequential };

struct RawDraw {
  std::string text;       // plan text, execution text, or pair plan part
  std::string exec_part;  // pair execution part (unit beam)
  int tokens = 0;
  bool finished = false;
};

struct ScoredDraw {
  RawDraw draw;
  double reward = 0.0;
};

struct ScopeSpec {
  int quota = 1;
  int required_above = 1;
  double tau1 = 1.0;
  double tau2 = 0.0;
  int extension_limit = 0;
  bool extend_on_leq = false;    // extension when all rewards <= tau2 (code search)
  bool stop_at_perfect = false;  // an exact 1.0 reward always stops (code search)
};

struct ScopeOutcome {
  std::vector<ScoredDraw> kept;
  core::ScopeStats stats;
};

using DrawFn = std::function<std::vector<RawDraw>(int first_index, int count)>;
using ScoreFn = std::function<rm::ScoreOutcome(const RawDraw&)>;

ScopeOutcome run_scope(const ScopeSpec& spec, SamplingMode mode, const DrawFn& draw,
                       const ScoreFn& score);

}  // namespace dream::budget
