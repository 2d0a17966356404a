#include "tfmm/json_io.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace tfmm {
namespace {

Json vector_json(const TokenVectord& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

const Json& field(const Json& j, const char* name) {
  if (!j.is_object()) throw std::invalid_argument("expected a JSON object");
  const auto it = j.find(name);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field \"") + name + "\"");
  return *it;
}

TokenVectord vector_from_json(const Json& j, const char* name) {
  const Json& arr = field(j, name);
  if (!arr.is_array()) throw std::invalid_argument(std::string("field \"") + name + "\" must be an array");
  if (arr.size() > static_cast<std::size_t>(kMaxTokens))
    throw std::invalid_argument(std::string("field \"") + name + "\" has more than " +
                                std::to_string(kMaxTokens) + " entries");
  TokenVectord v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw std::invalid_argument(std::string("field \"") + name + "\" must hold numbers");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

double number_from_json(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number()) throw std::invalid_argument(std::string("field \"") + name + "\" must be a number");
  return v.get<double>();
}

}  // namespace

Json to_json(const PoolStated& pool) {
  Json j;
  j["reserves"] = vector_json(pool.reserves());
  j["weights"] = vector_json(pool.weights());
  j["gamma"] = pool.gamma();
  return j;
}

PoolStated pool_from_json(const Json& j) {
  return {vector_from_json(j, "reserves"), vector_from_json(j, "weights"), number_from_json(j, "gamma")};
}

Json to_json(const AttackScenariod& s) {
  Json j;
  j["pool"] = to_json(s.pool);
  j["market"] = vector_json(s.market.prices());
  j["weight_update"] = vector_json(s.weight_update);
  j["epsilon"] = s.epsilon;
  j["base"] = s.base;
  j["pumped"] = s.pumped;
  return j;
}

AttackScenariod scenario_from_json(const Json& j) {
  PoolStated pool = pool_from_json(field(j, "pool"));
  const int base = j.contains("base") ? field(j, "base").get<int>() : 0;
  const int pumped = j.contains("pumped") ? field(j, "pumped").get<int>() : 1;
  detail::check_pair(pool.size(), base, pumped);
  MarketPricesd market = j.contains("market") ? MarketPricesd(vector_from_json(j, "market"))
                                              : worst_case_market(pool, base, pumped);
  TokenVectord dw = vector_from_json(j, "weight_update");
  const double epsilon = number_from_json(j, "epsilon");
  return {std::move(pool), std::move(market), std::move(dw), epsilon, base, pumped};
}

Json to_json(const AttackOutcomed& o, const AttackScenariod& s) {
  Json j;
  j["delta1"] = o.delta1;
  j["delta2"] = o.delta2;
  j["cost"] = o.cost;
  j["arb_in"] = o.arb_in;
  j["arb_out"] = o.arb_out;
  j["x_return"] = o.x_return;
  j["x_null"] = o.x_null;
  j["z"] = o.z;
  j["x_return_bound"] = o.x_return_bound;
  j["x_null_bound"] = o.x_null_bound;
  j["z_bound"] = o.z_bound;
  j["epsilon_null"] = scenario_epsilon_null(s);
  j["scenario"] = to_json(s);
  return j;
}

}  // namespace tfmm
