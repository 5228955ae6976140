#pragma once

/**
 * HTTP backends.
 *
 * Generation protocol: POST JSON
 *   {"prompt": str, "n": int, "temperature": num, "stop": [str], "max_tokens": int}
 *   -> {"choices": [{"text": str, "token_count": int}, ...]}
 *
 * Reward protocol: POST JSON
 *   {"context": str, "phase": "plan"|"exec"}
 *   -> {"logit_plus": num, "logit_minus": num}
 *
 * Endpoint, timeout, and retry count come from configuration. The reward
 * backend surfaces transport failures as retryable errors; the generation
 * backend retries internally and returns a flagged partial result when the
 * service stays unreachable.
 */

#include <string>

#include "dream/generation.hpp"
#include "dream/reward.hpp"

namespace dream::remote {

struct RemoteConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/generate
  int timeout_ms = 5000;
  int retries = 2;
};

class RemoteGenerationBackend : public gen::GenerationBackend {
 public:
  RemoteGenerationBackend(RemoteConfig config, gen::FewShotBank bank);

  gen::GenResult generate(const gen::GenRequest& request) override;
  std::string id() const override { return "remote:" + config_.endpoint; }

 private:
  RemoteConfig config_;
  gen::FewShotBank bank_;
};

class RemoteRewardBackend : public rm::RewardBackend {
 public:
  explicit RemoteRewardBackend(RemoteConfig config);

  /// Throws rm::RewardTransportError on transport failure (rm::score retries).
  rm::LogitPair logits(const rm::RewardQuery& query) override;
  std::string id() const override { return "remote:" + config_.endpoint; }

 private:
  RemoteConfig config_;
};

}  // namespace dream::remote
