#include "agpm/kernels.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <sstream>

namespace agpm {

namespace {

constexpr std::array<char, kNumCovariates> kLetters = {'r', 'c', 't', 'd', 's'};

struct FactorValue {
  double value = 0.0;
  // Derivatives of value with respect to the factor's own parameters.
  std::array<double, 2> d_params{0.0, 0.0};
};

double block_sq_distance(const double* a, const double* b, const std::vector<std::size_t>& dims) {
  double sum = 0.0;
  for (std::size_t d : dims) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return sum;
}

// a and b index the full input vector; params point at the factor's slots.
FactorValue eval_factor(const BaseKernel& factor, const double* params, const double* a, const double* b,
                        bool want_grad) {
  FactorValue out;
  const auto& dims = factor.block.dims;
  switch (factor.family) {
    case KernelFamily::SE: {
      const double l = params[0];
      const double r2 = block_sq_distance(a, b, dims);
      out.value = std::exp(-r2 / (2.0 * l * l));
      if (want_grad) out.d_params[0] = out.value * r2 / (l * l * l);
      break;
    }
    case KernelFamily::OU: {
      const double l = params[0];
      const double r = std::sqrt(block_sq_distance(a, b, dims));
      out.value = std::exp(-r / l);
      if (want_grad) out.d_params[0] = out.value * r / (l * l);
      break;
    }
    case KernelFamily::PE: {
      const double l = params[0];
      const double gamma = params[1];
      const double delta = a[dims[0]] - b[dims[0]];
      const double s = std::sin(delta / gamma);
      out.value = std::exp(-2.0 * s * s / (l * l));
      if (want_grad) {
        out.d_params[0] = out.value * 4.0 * s * s / (l * l * l);
        out.d_params[1] = out.value * 2.0 * delta * std::sin(2.0 * delta / gamma) / (l * l * gamma * gamma);
      }
      break;
    }
    case KernelFamily::CA: {
      bool equal = true;
      for (std::size_t d : dims) equal = equal && (a[d] == b[d]);
      out.value = equal ? 1.0 : 0.0;
      break;
    }
    case KernelFamily::BI: {
      bool ones = true;
      for (std::size_t d : dims) ones = ones && (a[d] == 1.0) && (b[d] == 1.0);
      out.value = ones ? 1.0 : 0.0;
      break;
    }
  }
  return out;
}

std::size_t required_columns(const KernelExpr& expr) {
  std::size_t cols = 0;
  for (const auto& term : expr.terms())
    for (const auto& factor : term.factors) cols = std::max(cols, factor.block.dims.back() + 1);
  return cols;
}

void check_inputs(const KernelExpr& expr, const Inputs& X, const char* what) {
  if (static_cast<std::size_t>(X.cols()) < required_columns(expr)) {
    throw std::invalid_argument(std::string(what) + " has " + std::to_string(X.cols()) +
                                " columns; the kernel needs at least " + std::to_string(required_columns(expr)));
  }
}

double pair_value(const KernelExpr& expr, const double* theta, const double* a, const double* b) {
  double total = 0.0;
  for (std::size_t t = 0; t < expr.terms().size(); ++t) {
    const auto& factors = expr.terms()[t].factors;
    double prod = theta[expr.variance_slot(t)];
    for (std::size_t f = 0; f < factors.size() && prod != 0.0; ++f) {
      prod *= eval_factor(factors[f], theta + expr.factor_slot(t, f), a, b, false).value;
    }
    total += prod;
  }
  return total;
}

double term_value(const KernelExpr& expr, const double* theta, std::size_t t, const double* a, const double* b) {
  const auto& factors = expr.terms()[t].factors;
  double prod = theta[expr.variance_slot(t)];
  for (std::size_t f = 0; f < factors.size(); ++f) {
    prod *= eval_factor(factors[f], theta + expr.factor_slot(t, f), a, b, false).value;
  }
  return prod;
}

}  // namespace

char covariate_letter(std::size_t dim) {
  if (dim >= kNumCovariates) throw std::out_of_range("covariate index " + std::to_string(dim));
  return kLetters[dim];
}

std::string_view family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::SE: return "SE";
    case KernelFamily::PE: return "PE";
    case KernelFamily::CA: return "CA";
    case KernelFamily::OU: return "OU";
    case KernelFamily::BI: return "BI";
  }
  return "?";
}

std::size_t family_param_count(KernelFamily family) {
  switch (family) {
    case KernelFamily::SE:
    case KernelFamily::OU: return 1;
    case KernelFamily::PE: return 2;
    case KernelFamily::CA:
    case KernelFamily::BI: return 0;
  }
  return 0;
}

KernelExpr::KernelExpr(std::vector<ProductKernel> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw std::invalid_argument("kernel expression needs at least one term");
  std::size_t slot = 0;
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    const auto& factors = terms_[t].factors;
    if (factors.empty()) throw std::invalid_argument("product term " + std::to_string(t) + " has no factors");
    std::vector<bool> seen(kNumCovariates, false);
    for (const auto& factor : factors) {
      const auto& dims = factor.block.dims;
      if (dims.empty()) throw std::invalid_argument("covariate block '" + factor.block.name + "' is empty");
      for (std::size_t i = 0; i < dims.size(); ++i) {
        if (dims[i] >= kNumCovariates) {
          throw std::invalid_argument("covariate index " + std::to_string(dims[i]) + " out of range");
        }
        if (i > 0 && dims[i] <= dims[i - 1]) {
          throw std::invalid_argument("covariate block '" + factor.block.name + "' must be strictly increasing");
        }
        if (seen[dims[i]]) {
          throw std::invalid_argument(std::string("covariate '") + kLetters[dims[i]] +
                                      "' appears in two factors of one product");
        }
        seen[dims[i]] = true;
      }
      if (factor.family == KernelFamily::PE && dims.size() != 1) {
        throw std::invalid_argument("PE kernel requires a one-dimensional block");
      }
    }

    term_offsets_.push_back(slot);
    layout_.push_back({SlotKind::Variance, t, std::nullopt, "term" + std::to_string(t + 1) + ".variance"});
    ++slot;
    std::vector<std::size_t> offsets;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      offsets.push_back(slot);
      const auto prefix = "term" + std::to_string(t + 1) + "." + std::string(family_name(factors[f].family)) +
                          "(" + factors[f].block.name + ").";
      switch (factors[f].family) {
        case KernelFamily::SE:
        case KernelFamily::OU:
          layout_.push_back({SlotKind::LengthScale, t, f, prefix + "length_scale"});
          break;
        case KernelFamily::PE:
          layout_.push_back({SlotKind::LengthScale, t, f, prefix + "length_scale"});
          layout_.push_back({SlotKind::Period, t, f, prefix + "period"});
          break;
        case KernelFamily::CA:
        case KernelFamily::BI: break;
      }
      slot += family_param_count(factors[f].family);
    }
    factor_offsets_.push_back(std::move(offsets));
  }
  layout_.push_back({SlotKind::Noise, terms_.size(), std::nullopt, "noise_variance"});
}

std::size_t KernelExpr::factor_slot(std::size_t term, std::size_t factor) const {
  return factor_offsets_.at(term).at(factor);
}

bool KernelExpr::uses_dim(std::size_t dim) const {
  for (const auto& term : terms_)
    for (const auto& factor : term.factors)
      if (std::find(factor.block.dims.begin(), factor.block.dims.end(), dim) != factor.block.dims.end()) return true;
  return false;
}

std::string KernelExpr::to_string() const {
  std::string out;
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    if (t > 0) out += " + ";
    for (std::size_t f = 0; f < terms_[t].factors.size(); ++f) {
      const auto& factor = terms_[t].factors[f];
      if (f > 0) out += "*";
      out += family_name(factor.family);
      out += "(";
      for (std::size_t i = 0; i < factor.block.dims.size(); ++i) {
        if (i > 0) out += ",";
        out += kLetters[factor.block.dims[i]];
      }
      out += ")";
    }
  }
  return out;
}

void validate_theta(const KernelExpr& expr, const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != expr.theta_size()) {
    throw std::invalid_argument("theta has " + std::to_string(theta.size()) + " entries; kernel '" +
                                expr.to_string() + "' expects " + std::to_string(expr.theta_size()));
  }
  const auto noise = static_cast<Eigen::Index>(expr.noise_slot());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const bool ok = j == noise ? theta[j] >= 0.0 : theta[j] > 0.0;
    if (!ok || !std::isfinite(theta[j])) {
      throw std::invalid_argument("theta[" + std::to_string(j) + "] (" + expr.layout()[j].label +
                                  ") must be " + (j == noise ? "non-negative" : "positive") + " and finite");
    }
  }
}

double eval_base(KernelFamily family, std::span<const double> params, std::span<const double> a,
                 std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("eval_base: input vectors differ in length");
  if (a.empty()) throw std::invalid_argument("eval_base: empty input vectors");
  if (params.size() != family_param_count(family)) {
    throw std::invalid_argument("eval_base: " + std::string(family_name(family)) + " takes " +
                                std::to_string(family_param_count(family)) + " parameters");
  }
  for (double p : params) {
    if (!(p > 0.0)) throw std::invalid_argument("eval_base: parameters must be positive");
  }
  if (family == KernelFamily::PE && a.size() != 1) {
    throw std::invalid_argument("eval_base: PE kernel requires a one-dimensional block");
  }
  BaseKernel factor{family, {"", {}}};
  for (std::size_t i = 0; i < a.size(); ++i) factor.block.dims.push_back(i);
  return eval_factor(factor, params.data(), a.data(), b.data(), false).value;
}

double eval_expr(const KernelExpr& expr, const Eigen::VectorXd& theta, std::span<const double> x,
                 std::span<const double> x2) {
  validate_theta(expr, theta);
  const auto need = required_columns(expr);
  if (x.size() < need || x2.size() < need) {
    throw std::invalid_argument("eval_expr: input vectors shorter than the kernel's covariates");
  }
  return pair_value(expr, theta.data(), x.data(), x2.data());
}

Eigen::MatrixXd gram_matrix(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X,
                            const Inputs& X2) {
  validate_theta(expr, theta);
  check_inputs(expr, X, "X");
  check_inputs(expr, X2, "X2");
  Eigen::MatrixXd K(X.rows(), X2.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double* a = X.row(i).data();
    for (Eigen::Index j = 0; j < X2.rows(); ++j) K(i, j) = pair_value(expr, theta.data(), a, X2.row(j).data());
  }
  return K;
}

Eigen::MatrixXd gram_matrix(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X) {
  validate_theta(expr, theta);
  check_inputs(expr, X, "X");
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* b = X.row(j).data();
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = pair_value(expr, theta.data(), X.row(i).data(), b);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Eigen::MatrixXd term_gram_matrix(const KernelExpr& expr, const Eigen::VectorXd& theta, std::size_t term,
                                 const Inputs& X, const Inputs& X2) {
  validate_theta(expr, theta);
  check_inputs(expr, X, "X");
  check_inputs(expr, X2, "X2");
  if (term >= expr.terms().size()) throw std::out_of_range("term index " + std::to_string(term));
  Eigen::MatrixXd K(X.rows(), X2.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X2.rows(); ++j)
      K(i, j) = term_value(expr, theta.data(), term, X.row(i).data(), X2.row(j).data());
  return K;
}

std::vector<Eigen::MatrixXd> grad_theta(const KernelExpr& expr, const Eigen::VectorXd& theta, const Inputs& X) {
  validate_theta(expr, theta);
  check_inputs(expr, X, "X");
  const Eigen::Index n = X.rows();
  std::vector<Eigen::MatrixXd> grads(expr.theta_size(), Eigen::MatrixXd::Zero(n, n));
  grads[expr.noise_slot()].setIdentity();

  std::vector<FactorValue> values;
  std::vector<double> prefix;
  std::vector<double> suffix;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* b = X.row(j).data();
    for (Eigen::Index i = j; i < n; ++i) {
      const double* a = X.row(i).data();
      for (std::size_t t = 0; t < expr.terms().size(); ++t) {
        const auto& factors = expr.terms()[t].factors;
        const std::size_t m = factors.size();
        values.resize(m);
        for (std::size_t f = 0; f < m; ++f) {
          values[f] = eval_factor(factors[f], theta.data() + expr.factor_slot(t, f), a, b, true);
        }
        // prefix[f] = prod of values before f; suffix[f] = prod of values after f.
        prefix.assign(m + 1, 1.0);
        suffix.assign(m + 1, 1.0);
        for (std::size_t f = 0; f < m; ++f) prefix[f + 1] = prefix[f] * values[f].value;
        for (std::size_t f = m; f-- > 0;) suffix[f] = suffix[f + 1] * values[f].value;

        const double variance = theta[expr.variance_slot(t)];
        const double unit = prefix[m];
        auto& gv = grads[expr.variance_slot(t)];
        gv(i, j) = unit;
        gv(j, i) = unit;
        for (std::size_t f = 0; f < m; ++f) {
          const double others = variance * prefix[f] * suffix[f + 1];
          const std::size_t first = expr.factor_slot(t, f);
          for (std::size_t p = 0; p < family_param_count(factors[f].family); ++p) {
            const double v = others * values[f].d_params[p];
            grads[first + p](i, j) = v;
            grads[first + p](j, i) = v;
          }
        }
      }
    }
  }
  return grads;
}

Eigen::VectorXd grad_input(const KernelExpr& expr, const Eigen::VectorXd& theta, std::span<const double> xstar,
                           const Inputs& X, std::size_t dim) {
  validate_theta(expr, theta);
  check_inputs(expr, X, "X");
  if (xstar.size() < required_columns(expr) || dim >= static_cast<std::size_t>(X.cols()) ||
      dim >= xstar.size()) {
    throw std::invalid_argument("grad_input: dimension or query vector out of range");
  }

  // The factor holding `dim` in each term, if any (blocks within a product are disjoint).
  std::vector<std::optional<std::size_t>> carrier(expr.terms().size());
  for (std::size_t t = 0; t < expr.terms().size(); ++t) {
    const auto& factors = expr.terms()[t].factors;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const auto& dims = factors[f].block.dims;
      if (std::find(dims.begin(), dims.end(), dim) == dims.end()) continue;
      if (factors[f].family != KernelFamily::SE && factors[f].family != KernelFamily::OU) {
        throw std::invalid_argument("grad_input: covariate '" + std::string(1, covariate_letter(dim)) +
                                    "' is carried by a " + std::string(family_name(factors[f].family)) +
                                    " factor; only SE and OU input gradients are supported");
      }
      carrier[t] = f;
    }
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  const double* a = xstar.data();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double* b = X.row(i).data();
    double total = 0.0;
    for (std::size_t t = 0; t < expr.terms().size(); ++t) {
      if (!carrier[t]) continue;
      const auto& factors = expr.terms()[t].factors;
      double others = theta[expr.variance_slot(t)];
      for (std::size_t f = 0; f < factors.size(); ++f) {
        if (f == *carrier[t]) continue;
        others *= eval_factor(factors[f], theta.data() + expr.factor_slot(t, f), a, b, false).value;
      }
      const auto& factor = factors[*carrier[t]];
      const double l = theta[expr.factor_slot(t, *carrier[t])];
      const double value = eval_factor(factor, &theta[expr.factor_slot(t, *carrier[t])], a, b, false).value;
      double derivative = 0.0;
      if (factor.family == KernelFamily::SE) {
        derivative = value * (b[dim] - a[dim]) / (l * l);
      } else {
        const double r = std::sqrt(block_sq_distance(a, b, factor.block.dims));
        if (r == 0.0) {
          throw std::domain_error("grad_input: OU kernel is not differentiable at zero distance");
        }
        derivative = -value * (a[dim] - b[dim]) / (r * l);
      }
      total += others * derivative;
    }
    out[i] = total;
  }
  return out;
}

KernelSpecError::KernelSpecError(const std::string& message, std::size_t position)
    : std::invalid_argument(message + " at position " + std::to_string(position)), position_(position) {}

std::optional<std::string> kernel_preset(std::string_view name) {
  std::string key;
  for (char ch : name) {
    if (ch == '-' || std::isspace(static_cast<unsigned char>(ch))) continue;
    key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  if (key == "AGPM1") return "SE(r,c,t,d,s)";
  if (key == "AGPM2") return "SE(r,c,t)*SE(d,s)";
  if (key == "AGPM3") return "SE(r,c) + SE(t) + SE(d) + SE(s)";
  if (key == "AGPM4") return "SE(r,c)*SE(s) + SE(t)*SE(d)";
  if (key == "AGPM5") return "SE(r,c)*SE(t)*SE(d) + SE(r,c)*SE(t)*SE(s)";
  return std::nullopt;
}

namespace {

class SpecParser {
 public:
  explicit SpecParser(std::string_view text) : text_(text) {}

  KernelExpr parse() {
    std::vector<ProductKernel> terms;
    terms.push_back(parse_product());
    skip_space();
    while (pos_ < text_.size() && text_[pos_] == '+') {
      ++pos_;
      terms.push_back(parse_product());
      skip_space();
    }
    if (pos_ != text_.size()) fail(std::string("unexpected character '") + text_[pos_] + "'");
    return KernelExpr(std::move(terms));
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw KernelSpecError(message, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char ch) {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != ch) fail(std::string("expected '") + ch + "'");
    ++pos_;
  }

  ProductKernel parse_product() {
    ProductKernel product;
    std::vector<bool> used(kNumCovariates, false);
    product.factors.push_back(parse_base(used));
    skip_space();
    while (pos_ < text_.size() && text_[pos_] == '*') {
      ++pos_;
      product.factors.push_back(parse_base(used));
      skip_space();
    }
    return product;
  }

  BaseKernel parse_base(std::vector<bool>& used_in_product) {
    skip_space();
    const std::size_t start = pos_;
    std::string name;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
      name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(text_[pos_]))));
      ++pos_;
    }
    BaseKernel base;
    if (name == "SE") base.family = KernelFamily::SE;
    else if (name == "PE") base.family = KernelFamily::PE;
    else if (name == "CA") base.family = KernelFamily::CA;
    else if (name == "OU") base.family = KernelFamily::OU;
    else if (name == "BI") base.family = KernelFamily::BI;
    else {
      pos_ = start;
      fail(name.empty() ? "expected a kernel family" : "unknown kernel family '" + name + "'");
    }

    expect('(');
    std::vector<bool> used(kNumCovariates, false);
    do {
      skip_space();
      if (pos_ >= text_.size()) fail("expected a covariate");
      const char letter = static_cast<char>(std::tolower(static_cast<unsigned char>(text_[pos_])));
      const auto it = std::find(kLetters.begin(), kLetters.end(), letter);
      if (it == kLetters.end()) fail(std::string("unknown covariate '") + text_[pos_] + "'");
      const auto dim = static_cast<std::size_t>(it - kLetters.begin());
      if (used[dim]) fail(std::string("duplicate covariate '") + letter + "'");
      if (used_in_product[dim]) fail(std::string("covariate '") + letter + "' already used in this product");
      used[dim] = true;
      base.block.dims.push_back(dim);
      ++pos_;
      skip_space();
    } while (pos_ < text_.size() && text_[pos_] == ',' && ++pos_);
    expect(')');

    if (base.family == KernelFamily::PE && base.block.dims.size() != 1) {
      pos_ = start;
      fail("PE kernel requires exactly one covariate");
    }
    std::sort(base.block.dims.begin(), base.block.dims.end());
    for (std::size_t i = 0; i < base.block.dims.size(); ++i) {
      if (i > 0) base.block.name += ",";
      base.block.name += kLetters[base.block.dims[i]];
      used_in_product[base.block.dims[i]] = true;
    }
    return base;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

KernelExpr parse_kernel_spec(std::string_view text) {
  if (auto preset = kernel_preset(text)) return SpecParser(*preset).parse();
  return SpecParser(text).parse();
}

}  // namespace agpm
