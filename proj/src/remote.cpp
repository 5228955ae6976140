#include "dream/remote.hpp"

#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace dream::remote {

namespace {

struct SplitUrl {
  std::string base;  // scheme://host:port
  std::string path;  // /route
};

SplitUrl split_url(const std::string& endpoint) {
  const std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw std::invalid_argument("endpoint must include a scheme: " + endpoint);
  }
  const std::size_t slash = endpoint.find('/', scheme + 3);
  if (slash == std::string::npos) return SplitUrl{endpoint, "/"};
  return SplitUrl{endpoint.substr(0, slash), endpoint.substr(slash)};
}

httplib::Client make_client(const SplitUrl& url, int timeout_ms) {
  httplib::Client client(url.base);
  client.set_connection_timeout(0, timeout_ms * 1000);
  client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  return client;
}

}  // namespace

RemoteGenerationBackend::RemoteGenerationBackend(RemoteConfig config,
                                                 gen::FewShotBank bank)
    : config_(std::move(config)), bank_(std::move(bank)) {}

gen::GenResult RemoteGenerationBackend::generate(const gen::GenRequest& request) {
  const SplitUrl url = split_url(config_.endpoint);

  nlohmann::json body;
  body["prompt"] = gen::render_prompt(request.question_text, request.prefix,
                                      request.mode, request.plan, bank_);
  body["n"] = request.k;
  body["temperature"] = request.temperature;
  body["stop"] = request.stop_markers;
  body["max_tokens"] = request.max_tokens;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    httplib::Client client = make_client(url, config_.timeout_ms);
    httplib::Result res = client.Post(url.path, payload, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    try {
      const nlohmann::json reply = nlohmann::json::parse(res->body);
      gen::GenResult out;
      for (const nlohmann::json& choice : reply.at("choices")) {
        out.texts.push_back(choice.at("text").get<std::string>());
        out.token_counts.push_back(choice.value("token_count", 0));
        out.finished_flags.push_back(
            gen::contains_final_answer(out.texts.back()));
      }
      out.partial = out.texts.size() < static_cast<std::size_t>(request.k);
      return out;
    } catch (const std::exception& e) {
      last_error = std::string("bad response: ") + e.what();
    }
  }
  gen::GenResult failed;
  failed.partial = true;
  failed.error = last_error;
  return failed;
}

RemoteRewardBackend::RemoteRewardBackend(RemoteConfig config)
    : config_(std::move(config)) {}

rm::LogitPair RemoteRewardBackend::logits(const rm::RewardQuery& query) {
  const SplitUrl url = split_url(config_.endpoint);

  nlohmann::json body;
  body["context"] = rm::build_context(query);
  body["phase"] = query.phase == core::Phase::planning ? "plan" : "exec";

  httplib::Client client = make_client(url, config_.timeout_ms);
  httplib::Result res = client.Post(url.path, body.dump(), "application/json");
  if (!res) {
    throw rm::RewardTransportError("transport failure: " +
                                   httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw rm::RewardTransportError("status " + std::to_string(res->status));
  }
  try {
    const nlohmann::json reply = nlohmann::json::parse(res->body);
    return rm::LogitPair{reply.at("logit_plus").get<double>(),
                         reply.at("logit_minus").get<double>()};
  } catch (const std::exception& e) {
    throw rm::RewardTransportError(std::string("bad response: ") + e.what());
  }
}

}  // namespace dream::remote
