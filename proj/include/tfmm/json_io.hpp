// JSON forms of pools, attack scenarios and attack outcomes.
//
// A pool is {"reserves":[...],"weights":[...],"gamma":x} with the fields in
// that order. A scenario is
//   {"pool":{...},"market":[...],"weight_update":[...],"epsilon":x,"base":0,"pumped":1}
// where "market" may be omitted to start from the worst case of the
// no-arbitrage band, and "base"/"pumped" default to 0 and 1.
#pragma once

#include <json.hpp>

#include "tfmm/attack.hpp"
#include "tfmm/pool.hpp"

namespace tfmm {

using Json = nlohmann::ordered_json;

Json to_json(const PoolStated& pool);
PoolStated pool_from_json(const Json& j);

Json to_json(const AttackScenariod& scenario);
AttackScenariod scenario_from_json(const Json& j);

// Outcome fields followed by an echo of the scenario that produced it.
Json to_json(const AttackOutcomed& outcome, const AttackScenariod& scenario);

}  // namespace tfmm
