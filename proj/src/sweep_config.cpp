#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tfmm/sweep.hpp"

namespace tfmm {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& text, int line, const std::string& key) {
  const std::string t = trim(text);
  double value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value))
    throw ConfigError(line, key, "expected a number, got '" + t + "'");
  return value;
}

template <typename Int>
Int parse_integer(const std::string& text, int line, const std::string& key) {
  const std::string t = trim(text);
  Int value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError(line, key, "expected an integer, got '" + t + "'");
  return value;
}

bool parse_bool(const std::string& text, int line, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError(line, key, "expected true or false, got '" + t + "'");
}

Rail parse_rail(const std::string& text, int line, const std::string& key) {
  const std::string t = trim(text);
  if (t == "max_trade_fraction") return Rail::trade_size;
  if (t == "min_weight") return Rail::min_weight;
  if (t == "max_weight_change") return Rail::weight_change;
  throw ConfigError(line, key,
                    "expected one of max_trade_fraction, min_weight, max_weight_change, got '" + t + "'");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (!s.empty() && s.back() == ',') parts.emplace_back();
  return parts;
}

std::vector<double> parse_grid(const std::string& text, int line, const std::string& key) {
  const std::string t = trim(text);
  auto inner = [&](std::size_t open) {
    if (t.back() != ')' && t.back() != ']') throw ConfigError(line, key, "unbalanced brackets in '" + t + "'");
    return t.substr(open + 1, t.size() - open - 2);
  };
  std::vector<double> values;
  if (t.rfind("linspace(", 0) == 0 || t.rfind("geomspace(", 0) == 0) {
    const bool geometric = t[0] == 'g';
    const auto args = split_commas(inner(t.find('(')));
    if (args.size() != 3) throw ConfigError(line, key, "expected (lo, hi, count)");
    const double lo = parse_double(args[0], line, key);
    const double hi = parse_double(args[1], line, key);
    const int count = parse_integer<int>(args[2], line, key);
    if (count < 1) throw ConfigError(line, key, "count must be positive");
    if (geometric && !(lo > 0 && hi > 0)) throw ConfigError(line, key, "geomspace needs positive end points");
    for (int i = 0; i < count; ++i) {
      const double u = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
      values.push_back(geometric ? std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo))) : lo + u * (hi - lo));
    }
    values.front() = lo;
    if (count > 1) values.back() = hi;
  } else {
    const std::string body = !t.empty() && t.front() == '[' ? inner(0) : t;
    for (const auto& item : split_commas(body)) values.push_back(parse_double(item, line, key));
  }
  if (values.empty()) throw ConfigError(line, key, "grid is empty");
  return values;
}

std::string describe(int line, const std::string& field, const std::string& message) {
  std::string out = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
  if (!field.empty()) out += "field '" + field + "': ";
  return out + message;
}

}  // namespace

ConfigError::ConfigError(int line, std::string field, const std::string& message)
    : std::runtime_error(describe(line, field, message)), line_(line), field_(std::move(field)) {}

std::pair<Rail, Rail> SweepConfig::varying_rails() const {
  switch (fixed_rail) {
    case Rail::trade_size: return {Rail::min_weight, Rail::weight_change};
    case Rail::min_weight: return {Rail::trade_size, Rail::weight_change};
    case Rail::weight_change: return {Rail::trade_size, Rail::min_weight};
  }
  return {Rail::min_weight, Rail::weight_change};
}

Guardrails SweepConfig::guardrails_at(std::size_t ia, std::size_t ib) const {
  Guardrails g;
  auto set = [&g](Rail r, double v) {
    switch (r) {
      case Rail::trade_size: g.max_trade_fraction = v; break;
      case Rail::min_weight: g.min_weight = v; break;
      case Rail::weight_change: g.max_weight_change = v; break;
    }
  };
  const auto [ra, rb] = varying_rails();
  set(fixed_rail, fixed_value);
  set(ra, grid_a.at(ia));
  set(rb, grid_b.at(ib));
  return g;
}

SearchSpec SweepConfig::search_spec(std::size_t ia, std::size_t ib) const {
  SearchSpec spec;
  spec.n_tokens = n_tokens;
  spec.guardrails = guardrails_at(ia, ib);
  spec.gamma = gamma;
  spec.n_restarts = n_restarts;
  spec.max_iters = max_iters;
  spec.schedule = schedule;
  spec.master_seed = master_seed;
  spec.cell_index = ia * grid_b.size() + ib;
  return spec;
}

void SweepConfig::validate() const {
  auto check_grid = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) throw ConfigError(0, name, "grid is empty");
    for (std::size_t i = 1; i < g.size(); ++i)
      if (!(g[i] > g[i - 1])) throw ConfigError(0, name, "grid must be strictly ascending");
  };
  check_grid(grid_a, "grid_a");
  check_grid(grid_b, "grid_b");
  if (n_tokens < 2 || n_tokens > kMaxTokens) throw ConfigError(0, "n_tokens", "must lie in [2, 16]");
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError(0, "gamma", "must lie in (0, 1]");
  if (n_restarts < 1) throw ConfigError(0, "n_restarts", "must be at least 1");
  if (max_iters < 0) throw ConfigError(0, "max_iters", "must be non-negative");
  if (parallelism < 1) throw ConfigError(0, "parallelism", "must be at least 1");
  if (output.empty()) throw ConfigError(0, "output", "must not be empty");
  for (std::size_t ia = 0; ia < grid_a.size(); ++ia)
    for (std::size_t ib = 0; ib < grid_b.size(); ++ib) {
      try {
        search_spec(ia, ib).validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(0, "grid_a/grid_b", "cell (" + std::to_string(ia) + ", " + std::to_string(ib) +
                                                  ") is invalid: " + e.what());
      }
    }
}

SweepConfig parse_sweep_config(std::istream& in) {
  SweepConfig c;
  std::set<std::string> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw.substr(0, raw.find('#')));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "", "expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError(line, "", "missing key");
    if (!seen.insert(key).second) throw ConfigError(line, key, "duplicate key");
    if (value.empty()) throw ConfigError(line, key, "missing value");

    if (key == "fixed_rail") c.fixed_rail = parse_rail(value, line, key);
    else if (key == "fixed_value") c.fixed_value = parse_double(value, line, key);
    else if (key == "grid_a") c.grid_a = parse_grid(value, line, key);
    else if (key == "grid_b") c.grid_b = parse_grid(value, line, key);
    else if (key == "n_tokens") c.n_tokens = parse_integer<int>(value, line, key);
    else if (key == "gamma") c.gamma = parse_double(value, line, key);
    else if (key == "n_restarts") c.n_restarts = parse_integer<int>(value, line, key);
    else if (key == "max_iters") c.max_iters = parse_integer<int>(value, line, key);
    else if (key == "master_seed") c.master_seed = parse_integer<std::uint64_t>(value, line, key);
    else if (key == "output") c.output = value;
    else if (key == "parallelism") c.parallelism = parse_integer<int>(value, line, key);
    else if (key == "record_wall_time") c.record_wall_time = parse_bool(value, line, key);
    else if (key == "learning_rate") c.schedule.learning_rate = parse_double(value, line, key);
    else if (key == "final_rate_fraction") c.schedule.final_rate_fraction = parse_double(value, line, key);
    else if (key == "beta1") c.schedule.beta1 = parse_double(value, line, key);
    else if (key == "beta2") c.schedule.beta2 = parse_double(value, line, key);
    else if (key == "adam_epsilon") c.schedule.adam_epsilon = parse_double(value, line, key);
    else if (key == "patience") c.schedule.patience = parse_integer<int>(value, line, key);
    else if (key == "fd_step") c.schedule.fd_step = parse_double(value, line, key);
    else throw ConfigError(line, key, "unknown key");
  }
  for (const char* required : {"fixed_rail", "fixed_value", "grid_a", "grid_b"})
    if (!seen.count(required)) throw ConfigError(0, required, "required key is missing");
  c.validate();
  return c;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return parse_sweep_config(in);
}

int resolve_threads(int hint) {
  if (const char* env = std::getenv("TFMM_GUARD_THREADS")) {
    int value = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec == std::errc() && ptr == s.data() + s.size() && value > 0) return value;
  }
  return std::max(1, hint);
}

}  // namespace tfmm
