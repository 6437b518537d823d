#include "qkdlab/quantum_core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace qkdlab {

namespace {

double max_hermitian_deviation(const Matrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

void require_square(const Matrix& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + ": matrix must be square and nonempty");
  }
}

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

std::string binary_label(std::size_t index, std::size_t width) {
  std::string s(width, '0');
  for (std::size_t i = 0; i < width; ++i) {
    if ((index >> (width - 1 - i)) & 1U) s[i] = '1';
  }
  return s;
}

double plogp_sum(const Distribution& p) {
  double h = 0.0;
  for (const auto& [_, v] : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// States

PureState make_pure(const Vector& amplitudes) {
  if (amplitudes.size() == 0) throw std::invalid_argument("make_pure: empty vector");
  const double norm = amplitudes.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("make_pure: zero or non-finite vector");
  }
  return PureState(amplitudes / norm);
}

PureState make_pure(std::initializer_list<Complex> amplitudes) {
  Vector v(static_cast<Eigen::Index>(amplitudes.size()));
  Eigen::Index i = 0;
  for (const auto& a : amplitudes) v(i++) = a;
  return make_pure(v);
}

DensityOperator to_density(const PureState& psi) {
  const Vector& a = psi.amplitudes();
  return DensityOperator(a * a.adjoint());
}

DensityOperator DensityOperator::from_matrix(const Matrix& m) {
  require_square(m, "DensityOperator");
  if (!m.allFinite()) throw std::invalid_argument("DensityOperator: non-finite entries");
  if (max_hermitian_deviation(m) > kOperatorTolerance) {
    throw std::invalid_argument("DensityOperator: matrix is not Hermitian");
  }
  Matrix h = 0.5 * (m + m.adjoint());
  if (std::abs(h.trace().real() - 1.0) > kOperatorTolerance) {
    throw std::invalid_argument("DensityOperator: trace differs from 1 by " +
                                std::to_string(std::abs(h.trace().real() - 1.0)));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const auto& ev = es.eigenvalues();
  if (ev.minCoeff() < -kOperatorTolerance) {
    throw std::invalid_argument("DensityOperator: negative eigenvalue " +
                                std::to_string(ev.minCoeff()));
  }
  // Eigenvalues within rounding of zero are left alone so that a stored state
  // reloads bit for bit; larger negative ones are clipped.
  if (ev.minCoeff() < -kEigenNoise) {
    Eigen::VectorXd clipped = ev.cwiseMax(0.0);
    clipped /= clipped.sum();
    h = es.eigenvectors() * clipped.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
    h = (0.5 * (h + h.adjoint())).eval();
  }
  return DensityOperator(std::move(h));
}

DensityOperator DensityOperator::maximally_mixed(std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("maximally_mixed: dim must be positive");
  const auto d = static_cast<Eigen::Index>(dim);
  return DensityOperator(Matrix::Identity(d, d) / static_cast<double>(dim));
}

DensityOperator DensityOperator::basis_projector(std::size_t dim, std::size_t index) {
  if (index >= dim) throw std::invalid_argument("basis_projector: index out of range");
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix m = Matrix::Zero(d, d);
  m(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
  return DensityOperator(std::move(m));
}

PureState bb84_encode(int r, int s) {
  if ((r != 0 && r != 1) || (s != 0 && s != 1)) {
    throw std::invalid_argument("bb84_encode: r and s must be bits");
  }
  Vector v(2);
  if (s == 0) {
    v << (r == 0 ? 1.0 : 0.0), (r == 0 ? 0.0 : 1.0);
  } else {
    const double h = std::sqrt(0.5);
    v << h, (r == 0 ? h : -h);
  }
  return PureState(v);
}

PureState tensor(const PureState& a, const PureState& b, std::size_t max_dim) {
  const std::size_t d = a.dim() * b.dim();
  if (d > max_dim) {
    throw std::length_error("tensor: dimension " + std::to_string(d) + " exceeds cap " +
                            std::to_string(max_dim));
  }
  Vector out(static_cast<Eigen::Index>(d));
  const auto nb = static_cast<Eigen::Index>(b.dim());
  for (Eigen::Index i = 0; i < a.amplitudes().size(); ++i) {
    out.segment(i * nb, nb) = a.amplitudes()(i) * b.amplitudes();
  }
  return PureState(std::move(out));
}

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b, std::size_t max_dim) {
  const std::size_t d = a.dim() * b.dim();
  if (d > max_dim) {
    throw std::length_error("tensor: dimension " + std::to_string(d) + " exceeds cap " +
                            std::to_string(max_dim));
  }
  const auto na = static_cast<Eigen::Index>(a.dim());
  const auto nb = static_cast<Eigen::Index>(b.dim());
  Matrix out(na * nb, na * nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < na; ++j) {
      out.block(i * nb, j * nb, nb, nb) = a.matrix()(i, j) * b.matrix();
    }
  }
  return DensityOperator(std::move(out));
}

DensityOperator mix(const std::vector<std::pair<double, const DensityOperator*>>& terms) {
  if (terms.empty()) throw std::invalid_argument("mix: no terms");
  const std::size_t dim = terms.front().second->dim();
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix acc = Matrix::Zero(d, d);
  double total = 0.0;
  for (const auto& [w, rho] : terms) {
    require_same_dim(dim, rho->dim(), "mix");
    if (w < 0.0) throw std::invalid_argument("mix: negative weight");
    acc += w * rho->matrix();
    total += w;
  }
  if (std::abs(total - 1.0) > kOperatorTolerance) {
    throw std::invalid_argument("mix: weights do not sum to 1");
  }
  return DensityOperator(acc / total);
}

// ---------------------------------------------------------------------------
// Labels and cq-states

KeyLabel KeyLabel::bits(std::string bitstring) {
  for (char c : bitstring) {
    if (c != '0' && c != '1') throw std::invalid_argument("KeyLabel: invalid bitstring '" + bitstring + "'");
  }
  return KeyLabel(std::move(bitstring), false);
}

KeyLabel KeyLabel::from_index(std::uint64_t value, std::size_t length) {
  if (length < 64 && (value >> length) != 0) {
    throw std::invalid_argument("KeyLabel::from_index: value does not fit in length");
  }
  return KeyLabel(binary_label(static_cast<std::size_t>(value), length), false);
}

KeyLabel KeyLabel::parse(const std::string& text) {
  if (text == "PERP") return perp();
  return bits(text);
}

int KeyLabel::bit(std::size_t i) const {
  if (perp_) throw std::logic_error("KeyLabel::bit: abort label has no bits");
  return bits_.at(i) == '1' ? 1 : 0;
}

CqState::CqState(std::size_t key_len, std::vector<CqBranch> branches)
    : key_len_(key_len), branches_(std::move(branches)) {
  if (branches_.empty()) throw std::invalid_argument("CqState: no branches");
  if (key_len_ > 63) throw std::invalid_argument("CqState: key length above 63 bits");
  std::sort(branches_.begin(), branches_.end(),
            [](const CqBranch& a, const CqBranch& b) { return a.label < b.label; });
  dim_ = branches_.front().rho.dim();
  double total = 0.0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const auto& b = branches_[i];
    if (i > 0 && branches_[i - 1].label == b.label) {
      throw std::invalid_argument("CqState: duplicate label " + b.label.to_string());
    }
    if (!b.label.is_perp() && b.label.length() != key_len_) {
      throw std::invalid_argument("CqState: label " + b.label.to_string() + " has wrong length");
    }
    if (!(b.probability >= 0.0 && b.probability <= 1.0)) {
      throw std::invalid_argument("CqState: probability outside [0,1]");
    }
    require_same_dim(dim_, b.rho.dim(), "CqState");
    total += b.probability;
  }
  if (std::abs(total - 1.0) > kOperatorTolerance) {
    throw std::invalid_argument("CqState: probabilities sum to " + std::to_string(total));
  }
  for (auto& b : branches_) b.probability /= total;
}

const CqBranch* CqState::find(const KeyLabel& label) const {
  auto it = std::lower_bound(branches_.begin(), branches_.end(), label,
                             [](const CqBranch& b, const KeyLabel& l) { return b.label < l; });
  if (it == branches_.end() || !(it->label == label)) return nullptr;
  return &*it;
}

double CqState::probability(const KeyLabel& label) const {
  const CqBranch* b = find(label);
  return b ? b->probability : 0.0;
}

// ---------------------------------------------------------------------------
// POVMs

Povm Povm::from_effects(std::vector<std::string> labels, std::vector<Matrix> effects) {
  if (effects.empty() || labels.size() != effects.size()) {
    throw std::invalid_argument("Povm: need one label per effect");
  }
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size()) {
    throw std::invalid_argument("Povm: duplicate outcome labels");
  }
  require_square(effects.front(), "Povm");
  const auto d = effects.front().rows();
  Matrix sum = Matrix::Zero(d, d);
  for (auto& e : effects) {
    require_square(e, "Povm");
    require_same_dim(static_cast<std::size_t>(d), static_cast<std::size_t>(e.rows()), "Povm");
    if (max_hermitian_deviation(e) > kOperatorTolerance) {
      throw std::invalid_argument("Povm: effect is not Hermitian");
    }
    e = 0.5 * (e + e.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(e, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kOperatorTolerance) {
      throw std::invalid_argument("Povm: effect is not positive");
    }
    sum += e;
  }
  if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > kOperatorTolerance) {
    throw std::invalid_argument("Povm: effects do not sum to the identity");
  }
  Povm p;
  p.dim_ = static_cast<std::size_t>(d);
  p.labels_ = std::move(labels);
  p.effects_ = std::move(effects);
  return p;
}

Povm Povm::rank_one(std::vector<std::string> labels, Matrix vectors) {
  if (vectors.cols() == 0 || labels.size() != static_cast<std::size_t>(vectors.cols())) {
    throw std::invalid_argument("Povm: need one label per vector");
  }
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size()) {
    throw std::invalid_argument("Povm: duplicate outcome labels");
  }
  const auto d = vectors.rows();
  const Matrix sum = vectors * vectors.adjoint();
  if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > kOperatorTolerance) {
    throw std::invalid_argument("Povm: rank-one effects do not sum to the identity");
  }
  Povm p;
  p.dim_ = static_cast<std::size_t>(d);
  p.labels_ = std::move(labels);
  p.vectors_ = std::move(vectors);
  return p;
}

Povm Povm::projective(const Matrix& basis, std::size_t bits) {
  require_square(basis, "Povm::projective");
  const auto d = static_cast<std::size_t>(basis.cols());
  std::vector<std::string> labels;
  labels.reserve(d);
  for (std::size_t k = 0; k < d; ++k) {
    labels.push_back(bits > 0 ? binary_label(k, bits) : std::to_string(k));
  }
  return rank_one(std::move(labels), basis);
}

Povm Povm::computational(std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("Povm::computational: dim must be positive");
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < dim) ++bits;
  const bool power_of_two = (std::size_t{1} << bits) == dim;
  const auto d = static_cast<Eigen::Index>(dim);
  return projective(Matrix::Identity(d, d), power_of_two ? std::max<std::size_t>(bits, 1) : 0);
}

Matrix Povm::effect(std::size_t k) const {
  if (vectors_) {
    const auto col = vectors_->col(static_cast<Eigen::Index>(k));
    return col * col.adjoint();
  }
  return effects_.at(k);
}

std::vector<double> Povm::probabilities(const Matrix& rho) const {
  require_same_dim(dim_, static_cast<std::size_t>(rho.rows()), "measure");
  std::vector<double> out(labels_.size());
  if (vectors_) {
    const Matrix rv = rho * (*vectors_);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const auto c = static_cast<Eigen::Index>(k);
      out[k] = std::max(0.0, vectors_->col(c).dot(rv.col(c)).real());
    }
  } else {
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = std::max(0.0, effects_[k].cwiseProduct(rho.transpose()).sum().real());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distances and measurement

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix qubit_basis(double theta) {
  Matrix u(2, 2);
  u << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return u;
}

Matrix product_basis(const std::vector<double>& thetas) {
  Matrix u = Matrix::Identity(1, 1);
  for (double t : thetas) u = kron(u, qubit_basis(t));
  return u;
}

double hermitian_trace_norm(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const DensityOperator& a, const DensityOperator& b) {
  require_same_dim(a.dim(), b.dim(), "trace_distance");
  return std::clamp(0.5 * hermitian_trace_norm(a.matrix() - b.matrix()), 0.0, 1.0);
}

double cq_trace_distance(const CqState& a, const CqState& b) {
  if (a.key_len() != b.key_len()) throw std::invalid_argument("cq_trace_distance: key length mismatch");
  require_same_dim(a.dim(), b.dim(), "cq_trace_distance");
  std::set<KeyLabel> labels;
  for (const auto& br : a.branches()) labels.insert(br.label);
  for (const auto& br : b.branches()) labels.insert(br.label);
  double total = 0.0;
  for (const auto& label : labels) {
    const CqBranch* x = a.find(label);
    const CqBranch* y = b.find(label);
    if (x && y) {
      total += 0.5 * hermitian_trace_norm(x->probability * x->rho.matrix() -
                                          y->probability * y->rho.matrix());
    } else {
      total += 0.5 * (x ? x->probability : y->probability);
    }
  }
  return std::clamp(total, 0.0, 1.0);
}

Distribution measure(const DensityOperator& rho, const Povm& m) {
  const auto probs = m.probabilities(rho.matrix());
  Distribution out;
  for (std::size_t k = 0; k < probs.size(); ++k) out[m.labels()[k]] = probs[k];
  return out;
}

JointDistribution cq_measure(const CqState& cq, const Povm& m) {
  require_same_dim(cq.dim(), m.dim(), "cq_measure");
  std::map<JointDistribution::Key, double> table;
  double total = 0.0;
  for (const auto& br : cq.branches()) {
    const auto probs = m.probabilities(br.rho.matrix());
    const std::string x = br.label.to_string();
    for (std::size_t k = 0; k < probs.size(); ++k) {
      const double v = br.probability * probs[k];
      table[{x, m.labels()[k]}] = v;
      total += v;
    }
  }
  for (auto& [_, v] : table) v /= total;
  return JointDistribution(std::move(table));
}

// ---------------------------------------------------------------------------
// Classical information quantities

JointDistribution::JointDistribution(std::map<Key, double> table) : table_(std::move(table)) {
  double total = 0.0;
  for (auto& [k, v] : table_) {
    if (!(v >= 0.0)) {
      if (v > -kDistributionTolerance) {
        v = 0.0;
      } else {
        throw std::invalid_argument("JointDistribution: negative probability");
      }
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kDistributionTolerance) {
    throw std::invalid_argument("JointDistribution: probabilities sum to " + std::to_string(total));
  }
}

double JointDistribution::at(const std::string& x, const std::string& z) const {
  auto it = table_.find({x, z});
  return it == table_.end() ? 0.0 : it->second;
}

Distribution JointDistribution::marginal_x() const {
  Distribution m;
  for (const auto& [k, v] : table_) m[k.first] += v;
  return m;
}

Distribution JointDistribution::marginal_z() const {
  Distribution m;
  for (const auto& [k, v] : table_) m[k.second] += v;
  return m;
}

double shannon_entropy(const Distribution& p) { return plogp_sum(p); }

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double mutual_information(const JointDistribution& j) {
  double hxz = 0.0;
  for (const auto& [_, v] : j.table()) {
    if (v > 0.0) hxz -= v * std::log2(v);
  }
  return std::max(0.0, plogp_sum(j.marginal_x()) + plogp_sum(j.marginal_z()) - hxz);
}

double total_variation(const JointDistribution& p, const JointDistribution& q) {
  double sum = 0.0;
  for (const auto& [k, v] : p.table()) sum += std::abs(v - q.at(k.first, k.second));
  for (const auto& [k, v] : q.table()) {
    if (!p.table().count(k)) sum += std::abs(v);
  }
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

double total_variation(const Distribution& p, const Distribution& q) {
  double sum = 0.0;
  for (const auto& [k, v] : p) {
    auto it = q.find(k);
    sum += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q) {
    if (!p.count(k)) sum += std::abs(v);
  }
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

}  // namespace qkdlab
