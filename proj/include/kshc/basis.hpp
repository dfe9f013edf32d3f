#ifndef KSHC_BASIS_HPP
#define KSHC_BASIS_HPP

#include <Eigen/Dense>
#include <functional>

namespace kshc {

/**
 * Paired mode coefficients of the coupled state at one time: y is the
 * fourth-order (hinged) component, z the second-order (Dirichlet) one.
 * Both components expand in the same sine basis phi_i = sqrt(2) sin(i pi x).
 */
struct ModalState {
  Eigen::VectorXd y;
  Eigen::VectorXd z;

  ModalState() = default;
  explicit ModalState(int n_modes)
      : y(Eigen::VectorXd::Zero(n_modes)), z(Eigen::VectorXd::Zero(n_modes)) {}
  ModalState(Eigen::VectorXd y_, Eigen::VectorXd z_)
      : y(std::move(y_)), z(std::move(z_)) {}

  int n_modes() const { return static_cast<int>(y.size()); }
  /// L2 energy |y|^2 + |z|^2 (the basis is orthonormal).
  double norm2() const { return y.squaredNorm() + z.squaredNorm(); }
  bool all_finite() const { return y.allFinite() && z.allFinite(); }
};

enum class Component { Y, Z };

/**
 * Sine eigenbasis of -d_xx with Dirichlet conditions on (0,1). The hinged
 * fourth-order operator d_xxxx (y = y_xx = 0) shares the eigenfunctions with
 * eigenvalues mu_i = lambda_i^2.
 */
class SpectralBasis {
 public:
  explicit SpectralBasis(int n_modes);

  int n_modes() const { return n_modes_; }
  /// 1-based accessors matching the usual mode numbering.
  double lambda(int i) const { return lambda_[i - 1]; }
  double mu(int i) const { return mu_[i - 1]; }
  const Eigen::VectorXd& lambdas() const { return lambda_; }
  const Eigen::VectorXd& mus() const { return mu_; }
  /// Multiplier table (1+lambda_i)^s for the discrete Sobolev norms.
  const Eigen::VectorXd& sobolev_multipliers(int order) const;

 private:
  int n_modes_;
  Eigen::VectorXd lambda_, mu_;
  Eigen::VectorXd sob1_, sob2_, sob4_;
};

struct Eigenpair {
  double lambda;
  double mu;
  std::function<double(double)> phi;
};

/// lambda_i = (i pi)^2, mu_i = (i pi)^4, phi_i(x) = sqrt(2) sin(i pi x).
Eigenpair eigenpair(int i);

/// Zero every mode with mu_i > r in both components (orthogonal projection
/// onto X_r = span{phi_i : lambda_i <= sqrt(r)}).
ModalState project_band(const ModalState& state, double r);

/// Discrete Sobolev norm ( sum_i (1+lambda_i)^s c_i^2 )^{1/2} of one
/// component. y admits s in {0,1,2,4}; z admits s in {0,1,2}.
double sobolev_norm(const ModalState& state, int order, Component c,
                    const SpectralBasis& basis);
double sobolev_norm2(const ModalState& state, int order, Component c,
                     const SpectralBasis& basis);

/// Real samples on a uniform grid over [0,1] including both endpoints.
struct FieldOnGrid {
  Eigen::VectorXd grid;
  Eigen::VectorXd values;
};

FieldOnGrid synthesize(const Eigen::VectorXd& modes, int n_points);

/// Modal coefficients of a grid field by trapezoid quadrature against phi_i.
/// Exact for trigonometric content below the grid Nyquist band.
Eigen::VectorXd project_to_modes(const FieldOnGrid& field, int n_modes);

/// Mass matrix of the basis restricted to an interval: M_ij = int_lo^hi
/// phi_i phi_j dx, in closed form.
Eigen::MatrixXd interval_mass_matrix(int n_modes, double lo, double hi);

/**
 * Pseudo-spectral evaluation of the transport product y * y_x. A product of
 * n-mode fields has at most 2n sine modes, so the 4n-interval quadrature grid
 * makes the trapezoid projection exact and no aliasing can occur.
 */
class ConvectionOp {
 public:
  explicit ConvectionOp(const SpectralBasis& basis);
  Eigen::VectorXd apply(const Eigen::VectorXd& y_modes) const;

 private:
  int n_modes_, n_points_;
  double h_;
  Eigen::MatrixXd sin_table_;   // n_points x n_modes
  Eigen::MatrixXd dcos_table_;  // n_points x n_modes, includes i*pi factor
};

}  // namespace kshc

#endif
