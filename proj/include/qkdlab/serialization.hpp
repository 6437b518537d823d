// JSON encoding of the quantum_core value types. The schema is documented in
// docs/schema.md: matrices are row-major lists of [re, im] pairs, key labels
// are bitstrings and the abort label is "PERP".
#pragma once

#include <json.hpp>

#include "qkdlab/quantum_core.hpp"

namespace qkdlab {

using Json = nlohmann::json;

/// Raised when a JSON document does not follow the schema. The message names
/// the offending path.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json to_json(const DensityOperator& rho);
Json to_json(const CqState& cq);
Json to_json(const JointDistribution& j);

DensityOperator density_from_json(const Json& j, std::size_t max_dim = kDefaultDimensionCap);
CqState cq_state_from_json(const Json& j, std::size_t max_dim = kDefaultDimensionCap);
JointDistribution joint_from_json(const Json& j);

}  // namespace qkdlab
