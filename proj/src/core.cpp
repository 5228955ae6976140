#include "dream/core.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

namespace dream::core {

namespace {

bool is_trailing_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
      return true;
    default:
      return false;
  }
}

bool parse_number(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + text.size();
}

}  // namespace

std::string canonical_answer(std::string_view raw) {
  std::size_t first = 0;
  std::size_t last = raw.size();
  while (first < last && std::isspace(static_cast<unsigned char>(raw[first]))) ++first;
  while (last > first && std::isspace(static_cast<unsigned char>(raw[last - 1]))) --last;
  while (last > first && is_trailing_punct(raw[last - 1])) --last;
  std::string out;
  out.reserve(last - first);
  for (std::size_t i = first; i < last; ++i) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
  }
  return out;
}

bool answers_match(std::string_view a, std::string_view b) {
  const std::string ca = canonical_answer(a);
  const std::string cb = canonical_answer(b);
  double na = 0.0;
  double nb = 0.0;
  if (parse_number(ca, na) && parse_number(cb, nb)) return na == nb;
  return ca == cb;
}

SearchConfig validate_config(const SearchConfig& cfg) {
  auto fail = [](const char* what) { throw std::invalid_argument(what); };

  if (cfg.planning_budget <= 0) fail("N1 not positive");
  if (cfg.execution_budget <= 0) fail("N2 not positive");
  if (cfg.planning_beam <= 0) fail("n1 not positive");
  if (cfg.execution_beam <= 0) fail("n2 not positive");
  if (cfg.planning_beam > cfg.planning_budget) fail("n1 exceeds N1");
  if (cfg.execution_beam > cfg.execution_budget) fail("n2 exceeds N2");
  if (cfg.planning_budget % cfg.planning_beam != 0) fail("N1 not divisible by n1");
  if (cfg.execution_budget % cfg.execution_beam != 0) fail("N2 not divisible by n2");
  if (cfg.planning_extension < 0) fail("m1 negative");
  if (cfg.execution_extension < 0) fail("m2 negative");

  auto check_prob = [&](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) fail(what);
  };
  check_prob(cfg.plan_stop_threshold, "tau_p1 outside [0,1]");
  check_prob(cfg.plan_extend_threshold, "tau_p2 outside [0,1]");
  check_prob(cfg.exec_stop_threshold, "tau_e1 outside [0,1]");
  check_prob(cfg.exec_extend_threshold, "tau_e2 outside [0,1]");
  if (cfg.plan_extend_threshold > cfg.plan_stop_threshold) fail("tau_p2 exceeds tau_p1");
  if (cfg.exec_extend_threshold > cfg.exec_stop_threshold) fail("tau_e2 exceeds tau_e1");
  if (cfg.max_steps <= 0) fail("max_steps not positive");
  return cfg;
}

SearchConfig disable_budget_rules(SearchConfig cfg) {
  // Rewards live strictly inside (0,1), so tau_1 = 1 is never exceeded and
  // tau_2 = 0 never undercut.
  cfg.plan_stop_threshold = 1.0;
  cfg.exec_stop_threshold = 1.0;
  cfg.plan_extend_threshold = 0.0;
  cfg.exec_extend_threshold = 0.0;
  cfg.planning_extension = 0;
  cfg.execution_extension = 0;
  return cfg;
}

void BudgetLedger::record_scope(int step, Phase phase, const ScopeStats& stats) {
  LedgerEntry& e = entries_[LedgerKey{step, phase}];
  e.samples_drawn += stats.drawn;
  e.tokens_charged += stats.tokens;
  e.extension_samples += stats.extension_samples;
  e.discarded += stats.discarded;
  e.scopes += 1;
  if (stats.early_stopped) e.scopes_early_stopped += 1;
  if (stats.extended) e.scopes_extended += 1;
  e.early_stopped = e.scopes > 0 && e.scopes_early_stopped == e.scopes;
  e.extended = e.scopes_extended > 0;
}

std::int64_t BudgetLedger::total_samples() const {
  std::int64_t n = 0;
  for (const auto& [key, e] : entries_) n += e.samples_drawn;
  return n;
}

std::int64_t BudgetLedger::total_tokens() const {
  std::int64_t n = 0;
  for (const auto& [key, e] : entries_) n += e.tokens_charged;
  return n;
}

std::int64_t BudgetLedger::total_scopes() const {
  std::int64_t n = 0;
  for (const auto& [key, e] : entries_) n += e.scopes;
  return n;
}

std::int64_t BudgetLedger::total_scopes_early_stopped() const {
  std::int64_t n = 0;
  for (const auto& [key, e] : entries_) n += e.scopes_early_stopped;
  return n;
}

double BudgetLedger::early_stop_fraction() const {
  const std::int64_t scopes = total_scopes();
  if (scopes == 0) return 0.0;
  return static_cast<double>(total_scopes_early_stopped()) / static_cast<double>(scopes);
}

void BudgetLedger::merge(const BudgetLedger& other) {
  for (const auto& [key, add] : other.entries_) {
    LedgerEntry& e = entries_[key];
    e.samples_drawn += add.samples_drawn;
    e.tokens_charged += add.tokens_charged;
    e.extension_samples += add.extension_samples;
    e.discarded += add.discarded;
    e.scopes += add.scopes;
    e.scopes_early_stopped += add.scopes_early_stopped;
    e.scopes_extended += add.scopes_extended;
    e.early_stopped = e.early_stopped || add.early_stopped;
    e.extended = e.extended || add.extended;
  }
}

BudgetLedger ledger_merge(const BudgetLedger& a, const BudgetLedger& b) {
  BudgetLedger out = a;
  out.merge(b);
  return out;
}

}  // namespace dream::core
