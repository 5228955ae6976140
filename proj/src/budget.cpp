#include "dream/budget.hpp"

#include <algorithm>

namespace dream::budget {

ScopeOutcome run_scope(const ScopeSpec& spec, SamplingMode mode, const DrawFn& draw,
                       const ScoreFn& score) {
  ScopeOutcome out;
  int above = 0;

  // Consumes one draw; true means the stop rule fired.
  auto consume = [&](const RawDraw& d) {
    out.stats.drawn += 1;
    out.stats.tokens += d.tokens;
    const rm::ScoreOutcome s = score(d);
    if (!s.ok()) {
      out.stats.discarded += 1;
      return false;
    }
    out.kept.push_back(ScoredDraw{d, *s.reward});
    if (*s.reward > spec.tau1) ++above;
    if (spec.stop_at_perfect && *s.reward >= 1.0) return true;
    return above >= spec.required_above;
  };

  auto run_pass = [&](int first, int limit) {
    bool stopped = false;
    if (mode == SamplingMode::overrequest) {
      const std::vector<RawDraw> batch = draw(first, limit);
      for (const RawDraw& d : batch) {
        if (consume(d)) {
          stopped = true;
          break;  // surplus batch draws are dropped without charge
        }
      }
    } else {
      for (int i = 0; i < limit; ++i) {
        const std::vector<RawDraw> one = draw(first + i, 1);
        if (one.empty()) break;
        if (consume(one.front())) {
          stopped = true;
          break;
        }
      }
    }
    return stopped;
  };

  out.stats.early_stopped = run_pass(0, spec.quota);

  if (!out.stats.early_stopped && out.stats.drawn == spec.quota &&
      spec.extension_limit > 0) {
    const bool all_low = std::all_of(
        out.kept.begin(), out.kept.end(), [&](const ScoredDraw& k) {
          return spec.extend_on_leq ? k.reward <= spec.tau2 : k.reward < spec.tau2;
        });
    if (all_low) {
      const std::int64_t before = out.stats.drawn;
      run_pass(static_cast<int>(before), spec.extension_limit);
      out.stats.extension_samples = out.stats.drawn - before;
      out.stats.extended = out.stats.extension_samples > 0;
    }
  }
  return out;
}

}  // namespace dream::budget
