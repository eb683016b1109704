#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace agpm {

/// Row-major input matrix: one observation per row, columns follow the
/// covariate layout x = [row, col, interval, demand, supply].
using Inputs = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum Covariate : std::size_t {
  kRow = 0,
  kCol = 1,
  kInterval = 2,
  kDemand = 3,
  kSupply = 4,
};
inline constexpr std::size_t kNumCovariates = 5;

/// Single-letter names used by the kernel grammar: r, c, t, d, s.
char covariate_letter(std::size_t dim);

enum class KernelFamily { SE, PE, CA, OU, BI };

std::string_view family_name(KernelFamily family);

/// Hyperparameters a factor of this family contributes (variance excluded).
std::size_t family_param_count(KernelFamily family);

struct CovariateBlock {
  std::string name;
  std::vector<std::size_t> dims;

  friend bool operator==(const CovariateBlock&, const CovariateBlock&) = default;
};

struct BaseKernel {
  KernelFamily family = KernelFamily::SE;
  CovariateBlock block;

  friend bool operator==(const BaseKernel&, const BaseKernel&) = default;
};

/// Factors evaluated at unit variance, scaled by one shared variance.
struct ProductKernel {
  std::vector<BaseKernel> factors;

  friend bool operator==(const ProductKernel&, const ProductKernel&) = default;
};

enum class SlotKind { Variance, LengthScale, Period, Noise };

struct ThetaSlot {
  SlotKind kind;
  std::size_t term;
  std::optional<std::size_t> factor;
  std::string label;
};

/// Sum of shared-variance products over covariate blocks.
///
/// Hyperparameters live in a flat vector with a fixed layout: for each term,
/// the shared variance followed by every factor's parameters in factor
/// order (SE: l; PE: l, period; OU: l; CA/BI: none), then the noise variance.
class KernelExpr {
 public:
  explicit KernelExpr(std::vector<ProductKernel> terms);

  const std::vector<ProductKernel>& terms() const { return terms_; }

  std::size_t theta_size() const { return layout_.size(); }
  std::size_t noise_slot() const { return layout_.size() - 1; }
  std::size_t variance_slot(std::size_t term) const { return term_offsets_.at(term); }
  /// Index of the first parameter of a factor (meaningless for CA/BI).
  std::size_t factor_slot(std::size_t term, std::size_t factor) const;
  const std::vector<ThetaSlot>& layout() const { return layout_; }

  /// True when some factor's block contains `dim`.
  bool uses_dim(std::size_t dim) const;

  /// Canonical grammar text; parse_kernel_spec(to_string()) rebuilds *this.
  std::string to_string() const;

  friend bool operator==(const KernelExpr& a, const KernelExpr& b) { return a.terms_ == b.terms_; }

 private:
  std::vector<ProductKernel> terms_;
  std::vector<std::size_t> term_offsets_;
  std::vector<std::vector<std::size_t>> factor_offsets_;
  std::vector<ThetaSlot> layout_;
};

/// Throws std::invalid_argument unless theta has the expression's layout
/// length and finite entries, strictly positive except for the noise
/// variance, which may be zero (exact interpolation).
void validate_theta(const KernelExpr& expr, const Eigen::VectorXd& theta);

/// Unit-variance base kernel. `a` and `b` hold the block coordinates.
double eval_base(KernelFamily family, std::span<const double> params, std::span<const double> a,
                 std::span<const double> b);

/// Full kernel value without the noise term.
double eval_expr(const KernelExpr& expr, const Eigen::VectorXd& theta, std::span<const double> x,
                 std::span<const double> x2);

Eigen::MatrixXd gram_matrix(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X,
                            const Inputs& X2);

/// Symmetric gram: each pair evaluated once and mirrored, so the result
/// equals its transpose exactly.
Eigen::MatrixXd gram_matrix(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X);

/// Gram matrix of a single term, including its shared variance.
Eigen::MatrixXd term_gram_matrix(const KernelExpr& expr, const Eigen::VectorXd& theta, std::size_t term,
                                 const Inputs& X, const Inputs& X2);

/// d[K + noise I]/d theta_j for every slot j, noise slot included.
std::vector<Eigen::MatrixXd> grad_theta(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X);

/// Entry i is d k(xstar, X_i) / d xstar[dim]. Only SE and OU factors may
/// carry `dim`; OU at zero block distance is not differentiable and throws.
Eigen::VectorXd grad_input(const KernelExpr& expr, const Eigen::VectorXd& theta, std::span<const double> xstar,
                           const Inputs& X, std::size_t dim);

class KernelSpecError : public std::invalid_argument {
 public:
  KernelSpecError(const std::string& message, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Grammar:
///   expr    := product ('+' product)*
///   product := base ('*' base)*
///   base    := FAMILY '(' covariate (',' covariate)* ')'
///   covariate in {r, c, t, d, s}; FAMILY in {SE, PE, CA, OU, BI}
/// Presets AGPM1..AGPM5 (also spelled AGPM-1..AGPM-5) expand to the
/// standard additive structures.
KernelExpr parse_kernel_spec(std::string_view text);

/// Grammar text of a preset name, or nullopt.
std::optional<std::string> kernel_preset(std::string_view name);

}  // namespace agpm
