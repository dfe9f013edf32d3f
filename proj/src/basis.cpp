#include "kshc/basis.hpp"

#include <cmath>

#include "kshc/errors.hpp"

namespace kshc {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

SpectralBasis::SpectralBasis(int n_modes) : n_modes_(n_modes) {
  if (n_modes <= 0) throw InvalidArgument("n_modes", "must be positive");
  lambda_.resize(n_modes);
  mu_.resize(n_modes);
  for (int i = 1; i <= n_modes; ++i) {
    const double l = (i * kPi) * (i * kPi);
    lambda_[i - 1] = l;
    mu_[i - 1] = l * l;
  }
  sob1_ = (lambda_.array() + 1.0).matrix();
  sob2_ = (lambda_.array() + 1.0).square().matrix();
  sob4_ = (lambda_.array() + 1.0).pow(4).matrix();
}

const Eigen::VectorXd& SpectralBasis::sobolev_multipliers(int order) const {
  switch (order) {
    case 1:
      return sob1_;
    case 2:
      return sob2_;
    case 4:
      return sob4_;
    default:
      throw InvalidArgument("order", "no multiplier table for this order");
  }
}

Eigenpair eigenpair(int i) {
  if (i < 1) throw InvalidArgument("i", "mode index must be >= 1");
  const double l = (i * kPi) * (i * kPi);
  return Eigenpair{l, l * l, [i](double x) { return std::sqrt(2.0) * std::sin(i * kPi * x); }};
}

ModalState project_band(const ModalState& state, double r) {
  if (r < 0.0) throw InvalidArgument("r", "frequency cutoff must be >= 0");
  ModalState out = state;
  for (int i = 1; i <= state.n_modes(); ++i) {
    const double l = (i * kPi) * (i * kPi);
    if (l * l > r) {
      out.y[i - 1] = 0.0;
      out.z[i - 1] = 0.0;
    }
  }
  return out;
}

double sobolev_norm2(const ModalState& state, int order, Component c,
                     const SpectralBasis& basis) {
  if (state.n_modes() != basis.n_modes())
    throw InvalidArgument("state", "mode count does not match basis");
  const bool is_y = (c == Component::Y);
  if (is_y) {
    if (order != 0 && order != 1 && order != 2 && order != 4)
      throw InvalidArgument("order", "y component admits s in {0,1,2,4}");
  } else {
    if (order != 0 && order != 1 && order != 2)
      throw InvalidArgument("order", "z component admits s in {0,1,2}");
  }
  const Eigen::VectorXd& v = is_y ? state.y : state.z;
  if (order == 0) return v.squaredNorm();
  return v.array().square().matrix().dot(basis.sobolev_multipliers(order));
}

double sobolev_norm(const ModalState& state, int order, Component c,
                    const SpectralBasis& basis) {
  return std::sqrt(sobolev_norm2(state, order, c, basis));
}

FieldOnGrid synthesize(const Eigen::VectorXd& modes, int n_points) {
  if (n_points < 2) throw InvalidArgument("n_points", "grid needs >= 2 points");
  FieldOnGrid f;
  f.grid.resize(n_points);
  f.values = Eigen::VectorXd::Zero(n_points);
  const double h = 1.0 / (n_points - 1);
  for (int p = 0; p < n_points; ++p) f.grid[p] = p * h;
  const double s2 = std::sqrt(2.0);
  for (int i = 1; i <= modes.size(); ++i) {
    const double c = s2 * modes[i - 1];
    if (c == 0.0) continue;
    for (int p = 0; p < n_points; ++p) f.values[p] += c * std::sin(i * kPi * f.grid[p]);
  }
  return f;
}

Eigen::VectorXd project_to_modes(const FieldOnGrid& field, int n_modes) {
  const int np = static_cast<int>(field.grid.size());
  if (np < 2) throw InvalidArgument("field", "grid needs >= 2 points");
  const double h = field.grid[1] - field.grid[0];
  Eigen::VectorXd out(n_modes);
  const double s2 = std::sqrt(2.0);
  for (int i = 1; i <= n_modes; ++i) {
    double acc = 0.0;
    for (int p = 0; p < np; ++p) {
      const double w = (p == 0 || p == np - 1) ? 0.5 : 1.0;
      acc += w * field.values[p] * std::sin(i * kPi * field.grid[p]);
    }
    out[i - 1] = s2 * h * acc;
  }
  return out;
}

Eigen::MatrixXd interval_mass_matrix(int n_modes, double lo, double hi) {
  if (!(0.0 <= lo && lo < hi && hi <= 1.0))
    throw InvalidArgument("interval", "need 0 <= lo < hi <= 1");
  Eigen::MatrixXd m(n_modes, n_modes);
  auto primitive_diag = [](int i, double x) {
    return x - std::sin(2.0 * i * kPi * x) / (2.0 * i * kPi);
  };
  auto primitive_off = [](int i, int j, double x) {
    return std::sin((i - j) * kPi * x) / ((i - j) * kPi) -
           std::sin((i + j) * kPi * x) / ((i + j) * kPi);
  };
  for (int i = 1; i <= n_modes; ++i) {
    for (int j = i; j <= n_modes; ++j) {
      double v;
      if (i == j)
        v = primitive_diag(i, hi) - primitive_diag(i, lo);
      else
        v = primitive_off(i, j, hi) - primitive_off(i, j, lo);
      m(i - 1, j - 1) = v;
      m(j - 1, i - 1) = v;
    }
  }
  return m;
}

ConvectionOp::ConvectionOp(const SpectralBasis& basis)
    : n_modes_(basis.n_modes()), n_points_(4 * basis.n_modes() + 1) {
  h_ = 1.0 / (n_points_ - 1);
  sin_table_.resize(n_points_, n_modes_);
  dcos_table_.resize(n_points_, n_modes_);
  const double s2 = std::sqrt(2.0);
  for (int p = 0; p < n_points_; ++p) {
    const double x = p * h_;
    for (int i = 1; i <= n_modes_; ++i) {
      sin_table_(p, i - 1) = s2 * std::sin(i * kPi * x);
      dcos_table_(p, i - 1) = s2 * (i * kPi) * std::cos(i * kPi * x);
    }
  }
}

Eigen::VectorXd ConvectionOp::apply(const Eigen::VectorXd& y_modes) const {
  Eigen::VectorXd yg = sin_table_ * y_modes;
  Eigen::VectorXd yxg = dcos_table_ * y_modes;
  Eigen::VectorXd prod = yg.cwiseProduct(yxg);
  // trapezoid projection; boundary values of the product vanish
  prod[0] *= 0.5;
  prod[n_points_ - 1] *= 0.5;
  return h_ * (sin_table_.transpose() * prod);
}

}  // namespace kshc
