#include "qkdlab/serialization.hpp"

#include <cmath>
#include <string>

namespace qkdlab {

namespace {

const Json& field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + ": missing field '" + key + "'");
  return *it;
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path + ": expected a number");
  return j.get<double>();
}

std::size_t count(const Json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw SchemaError(path + ": expected a nonnegative integer");
  }
  return j.get<std::size_t>();
}

}  // namespace

Json to_json(const DensityOperator& rho) {
  Json entries = Json::array();
  const Matrix& m = rho.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      entries.push_back({m(r, c).real(), m(r, c).imag()});
    }
  }
  return Json{{"dim", rho.dim()}, {"entries", std::move(entries)}};
}

Json to_json(const CqState& cq) {
  Json branches = Json::array();
  for (const auto& b : cq.branches()) {
    branches.push_back(
        {{"label", b.label.to_string()}, {"p", b.probability}, {"rho", to_json(b.rho)}});
  }
  return Json{{"key_len", cq.key_len()}, {"dim", cq.dim()}, {"branches", std::move(branches)}};
}

Json to_json(const JointDistribution& j) {
  Json entries = Json::array();
  for (const auto& [k, v] : j.table()) {
    entries.push_back({{"x", k.first}, {"z", k.second}, {"p", v}});
  }
  return Json{{"entries", std::move(entries)}};
}

DensityOperator density_from_json(const Json& j, std::size_t max_dim) {
  const std::string path = "rho";
  const std::size_t dim = count(field(j, "dim", path), path + ".dim");
  if (dim == 0 || dim > max_dim) throw SchemaError(path + ".dim: out of range");
  const Json& entries = field(j, "entries", path);
  if (!entries.is_array() || entries.size() != dim * dim) {
    throw SchemaError(path + ".entries: expected " + std::to_string(dim * dim) + " [re, im] pairs");
  }
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix m(d, d);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Json& e = entries[k];
    const std::string ep = path + ".entries[" + std::to_string(k) + "]";
    if (!e.is_array() || e.size() != 2) throw SchemaError(ep + ": expected [re, im]");
    m(static_cast<Eigen::Index>(k / dim), static_cast<Eigen::Index>(k % dim)) =
        Complex(number(e[0], ep), number(e[1], ep));
  }
  try {
    return DensityOperator::from_matrix(m);
  } catch (const std::invalid_argument& err) {
    throw SchemaError(path + ": " + err.what());
  }
}

CqState cq_state_from_json(const Json& j, std::size_t max_dim) {
  const std::size_t key_len = count(field(j, "key_len", "cq_state"), "cq_state.key_len");
  const Json& branches = field(j, "branches", "cq_state");
  if (!branches.is_array() || branches.empty()) {
    throw SchemaError("cq_state.branches: expected a nonempty array");
  }
  std::vector<CqBranch> out;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const std::string path = "cq_state.branches[" + std::to_string(i) + "]";
    const Json& b = branches[i];
    const Json& label = field(b, "label", path);
    if (!label.is_string()) throw SchemaError(path + ".label: expected a string");
    KeyLabel parsed = KeyLabel::perp();
    try {
      parsed = KeyLabel::parse(label.get<std::string>());
    } catch (const std::invalid_argument& err) {
      throw SchemaError(path + ".label: " + err.what());
    }
    const double p = number(field(b, "p", path), path + ".p");
    try {
      out.push_back({parsed, p, density_from_json(field(b, "rho", path), max_dim)});
    } catch (const SchemaError& err) {
      throw SchemaError(path + "." + err.what());
    }
  }
  try {
    return CqState(key_len, std::move(out));
  } catch (const std::invalid_argument& err) {
    throw SchemaError(std::string("cq_state: ") + err.what());
  }
}

JointDistribution joint_from_json(const Json& j) {
  const Json& entries = field(j, "entries", "joint");
  if (!entries.is_array()) throw SchemaError("joint.entries: expected an array");
  std::map<JointDistribution::Key, double> table;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string path = "joint.entries[" + std::to_string(i) + "]";
    const Json& x = field(entries[i], "x", path);
    const Json& z = field(entries[i], "z", path);
    if (!x.is_string() || !z.is_string()) throw SchemaError(path + ": labels must be strings");
    table[{x.get<std::string>(), z.get<std::string>()}] +=
        number(field(entries[i], "p", path), path + ".p");
  }
  try {
    return JointDistribution(std::move(table));
  } catch (const std::invalid_argument& err) {
    throw SchemaError(std::string("joint: ") + err.what());
  }
}

}  // namespace qkdlab
