// Dense linear algebra for small Hilbert spaces: density operators,
// classical-quantum states, POVM measurements and the distances between
// them. Everything here is an immutable value; no randomness.
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qkdlab {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kOperatorTolerance = 1e-9;
/// Negative eigenvalues above −kEigenNoise are treated as rounding.
inline constexpr double kEigenNoise = 1e-13;
inline constexpr double kPureNormTolerance = 1e-12;
inline constexpr double kDistributionTolerance = 1e-12;
inline constexpr std::size_t kDefaultDimensionCap = std::size_t{1} << 14;

/// Normalized state vector.
class PureState {
 public:
  std::size_t dim() const { return static_cast<std::size_t>(amplitudes_.size()); }
  const Vector& amplitudes() const { return amplitudes_; }

 private:
  explicit PureState(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {}
  Vector amplitudes_;

  friend PureState make_pure(const Vector& amplitudes);
  friend PureState bb84_encode(int r, int s);
  friend PureState tensor(const PureState& a, const PureState& b, std::size_t max_dim);
};

/// Positive semidefinite, unit-trace Hermitian matrix.
///
/// Construction goes through from_matrix(), which checks Hermiticity,
/// trace and positivity at kOperatorTolerance. Eigenvalues in
/// [-tolerance, -kEigenNoise) are clipped to zero and the result
/// renormalized; anything more negative is rejected with
/// std::invalid_argument.
class DensityOperator {
 public:
  static DensityOperator from_matrix(const Matrix& m);
  static DensityOperator maximally_mixed(std::size_t dim);
  static DensityOperator basis_projector(std::size_t dim, std::size_t index);

  std::size_t dim() const { return static_cast<std::size_t>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  double trace() const { return entries_.trace().real(); }

 private:
  explicit DensityOperator(Matrix m) : entries_(std::move(m)) {}
  Matrix entries_;

  friend DensityOperator to_density(const PureState& psi);
  friend DensityOperator tensor(const DensityOperator& a, const DensityOperator& b,
                                std::size_t max_dim);
  friend DensityOperator mix(const std::vector<std::pair<double, const DensityOperator*>>& terms);
};

/// Element of S ∪ {⊥}: either a fixed-length bitstring or the abort symbol.
class KeyLabel {
 public:
  static KeyLabel perp() { return KeyLabel(std::string(), true); }
  static KeyLabel bits(std::string bitstring);
  static KeyLabel from_index(std::uint64_t value, std::size_t length);
  /// Parses either a bitstring or the reserved token "PERP".
  static KeyLabel parse(const std::string& text);

  bool is_perp() const { return perp_; }
  const std::string& bitstring() const { return bits_; }
  std::size_t length() const { return bits_.size(); }
  /// Bit i (0-based, leftmost first); throws on ⊥.
  int bit(std::size_t i) const;
  std::string to_string() const { return perp_ ? std::string("PERP") : bits_; }

  friend bool operator==(const KeyLabel&, const KeyLabel&) = default;
  friend bool operator<(const KeyLabel& a, const KeyLabel& b) {
    if (a.perp_ != b.perp_) return !a.perp_;
    return a.bits_ < b.bits_;
  }

 private:
  KeyLabel(std::string bits, bool perp) : bits_(std::move(bits)), perp_(perp) {}
  std::string bits_;
  bool perp_ = false;
};

struct CqBranch {
  KeyLabel label;
  double probability;
  DensityOperator rho;
};

/// Σ_s p_s |s⟩⟨s| ⊗ ρ_E^s over labels in {0,1}^ℓ ∪ {⊥}. Labels absent from the
/// branch list carry probability zero. Branches are kept sorted by label.
class CqState {
 public:
  CqState(std::size_t key_len, std::vector<CqBranch> branches);

  std::size_t key_len() const { return key_len_; }
  std::size_t dim() const { return dim_; }
  const std::vector<CqBranch>& branches() const { return branches_; }
  const CqBranch* find(const KeyLabel& label) const;
  double probability(const KeyLabel& label) const;
  double perp_probability() const { return probability(KeyLabel::perp()); }

 private:
  std::size_t key_len_;
  std::size_t dim_ = 0;
  std::vector<CqBranch> branches_;
};

/// Finite POVM. Effects are either general operators or rank-one, E_z = v_z v_z†;
/// the rank-one form stores only the vectors, which keeps large product
/// measurements cheap.
class Povm {
 public:
  static Povm from_effects(std::vector<std::string> labels, std::vector<Matrix> effects);
  /// Columns of `vectors` are the v_z; Σ v_z v_z† must be the identity.
  static Povm rank_one(std::vector<std::string> labels, Matrix vectors);
  /// Projective measurement in the orthonormal basis given by the columns of
  /// `basis`, outcomes labeled by their binary index of width `bits` (or
  /// decimal when bits == 0).
  static Povm projective(const Matrix& basis, std::size_t bits = 0);
  static Povm computational(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  bool is_rank_one() const { return vectors_.has_value(); }
  const Matrix& vectors() const { return *vectors_; }
  Matrix effect(std::size_t k) const;

  /// tr(E_z ρ) for every outcome, in label order.
  std::vector<double> probabilities(const Matrix& rho) const;

 private:
  Povm() = default;
  std::size_t dim_ = 0;
  std::vector<std::string> labels_;
  std::vector<Matrix> effects_;
  std::optional<Matrix> vectors_;
};

/// Distribution over a single outcome label.
using Distribution = std::map<std::string, double>;

/// P(x, z) with string labels on both sides.
class JointDistribution {
 public:
  using Key = std::pair<std::string, std::string>;
  JointDistribution() = default;
  explicit JointDistribution(std::map<Key, double> table);

  const std::map<Key, double>& table() const { return table_; }
  double at(const std::string& x, const std::string& z) const;
  Distribution marginal_x() const;
  Distribution marginal_z() const;

 private:
  std::map<Key, double> table_;
};

PureState make_pure(const Vector& amplitudes);
PureState make_pure(std::initializer_list<Complex> amplitudes);
DensityOperator to_density(const PureState& psi);

/// |r⟩_s: bit r in the standard (s = 0) or diagonal (s = 1) basis.
PureState bb84_encode(int r, int s);

PureState tensor(const PureState& a, const PureState& b,
                 std::size_t max_dim = kDefaultDimensionCap);
DensityOperator tensor(const DensityOperator& a, const DensityOperator& b,
                       std::size_t max_dim = kDefaultDimensionCap);

/// Convex combination Σ w_i ρ_i; weights must be nonnegative and sum to 1.
DensityOperator mix(const std::vector<std::pair<double, const DensityOperator*>>& terms);

/// Kronecker product of plain matrices.
Matrix kron(const Matrix& a, const Matrix& b);

/// Real qubit basis rotated by theta: columns cosθ|0⟩+sinθ|1⟩ and −sinθ|0⟩+cosθ|1⟩.
/// theta = 0 is the standard basis, π/4 the diagonal one, π/8 the Breidbart basis.
Matrix qubit_basis(double theta);

/// ⊗_i qubit_basis(thetas[i]), first entry on the most significant qubit.
Matrix product_basis(const std::vector<double>& thetas);

/// ‖A‖₁ for Hermitian A via its eigenvalues.
double hermitian_trace_norm(const Matrix& a);

double trace_distance(const DensityOperator& a, const DensityOperator& b);

/// Σ_s ½‖p_s ρ_a^s − q_s ρ_b^s‖₁ using the block-diagonal structure.
double cq_trace_distance(const CqState& a, const CqState& b);

Distribution measure(const DensityOperator& rho, const Povm& m);
JointDistribution cq_measure(const CqState& cq, const Povm& m);

double shannon_entropy(const Distribution& p);
double binary_entropy(double p);
/// I(X:Z) in bits.
double mutual_information(const JointDistribution& j);
double total_variation(const JointDistribution& p, const JointDistribution& q);
double total_variation(const Distribution& p, const Distribution& q);

}  // namespace qkdlab
