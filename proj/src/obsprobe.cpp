#include "kshc/obsprobe.hpp"

#include <cmath>

#include "kshc/basis.hpp"
#include "kshc/ensemble.hpp"
#include "kshc/errors.hpp"
#include "kshc/rng.hpp"

namespace kshc {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

ClampedDiscretization::ClampedDiscretization(int n_points) : n(n_points) {
  if (n < 5) throw InvalidArgument("n_points", "need at least 5 interior points");
  h = 1.0 / (n + 1);
  const double h2 = h * h, h3 = h2 * h, h4 = h2 * h2;
  D1 = Eigen::MatrixXd::Zero(n, n);
  D2 = Eigen::MatrixXd::Zero(n, n);
  D3 = Eigen::MatrixXd::Zero(n, n);
  D4 = Eigen::MatrixXd::Zero(n, n);

  for (int i = 0; i < n; ++i) {
    if (i > 0) D1(i, i - 1) = -1.0 / (2 * h);
    if (i + 1 < n) D1(i, i + 1) = 1.0 / (2 * h);

    D2(i, i) = 2.0 / h2;  // negative second derivative (SPD)
    if (i > 0) D2(i, i - 1) = -1.0 / h2;
    if (i + 1 < n) D2(i, i + 1) = -1.0 / h2;
  }

  // fourth derivative, clamped: ghost reflection u_{-1} = u_1
  for (int i = 0; i < n; ++i) {
    auto add4 = [&](int j, double v) {
      if (j >= 0 && j < n) D4(i, j) += v / h4;
    };
    add4(i - 2, 1.0);
    add4(i - 1, -4.0);
    add4(i, 6.0);
    add4(i + 1, -4.0);
    add4(i + 2, 1.0);
  }
  D4(0, 0) += 1.0 / h4;          // u_{-1} = u_1
  D4(n - 1, n - 1) += 1.0 / h4;  // u_{n+2} = u_n

  // third derivative, centered five-point with the same ghost handling
  for (int i = 0; i < n; ++i) {
    auto add3 = [&](int j, double v) {
      if (j >= 0 && j < n) D3(i, j) += v / (2 * h3);
    };
    add3(i - 2, -1.0);
    add3(i - 1, 2.0);
    add3(i + 1, -2.0);
    add3(i + 2, 1.0);
  }
  D3(0, 0) += -1.0 / (2 * h3);
  D3(n - 1, n - 1) += 1.0 / (2 * h3);
}

double clamped_beam_ground_eigenvalue() {
  double lo = 4.0, hi = 5.0;
  auto f = [](double k) { return std::cosh(k) * std::cos(k) - 1.0; };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(lo) * f(mid) <= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  const double k1 = 0.5 * (lo + hi);
  return k1 * k1 * k1 * k1;
}

double spectral_band_ratio(double r, double d0_lo, double d0_hi) {
  int band = 0;
  while (true) {
    const double l = (band + 1) * kPi * (band + 1) * kPi;
    if (l * l <= r)
      ++band;
    else
      break;
  }
  if (band == 0) throw InvalidArgument("r", "the band below r is empty");
  Eigen::MatrixXd m = interval_mass_matrix(band, d0_lo, d0_hi);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return 1.0 / es.eigenvalues().minCoeff();
}

SpectralInequalityReport spectral_inequality_probe(double r_max, double d0_lo,
                                                   double d0_hi) {
  SpectralInequalityReport rep;
  for (int m = 1;; ++m) {
    const double lam = (m * kPi) * (m * kPi);
    const double mu = lam * lam;
    if (mu > r_max) break;
    SpectralInequalityPoint pt;
    pt.r = mu;
    pt.band = m;
    pt.max_ratio = spectral_band_ratio(mu, d0_lo, d0_hi);
    rep.sweep.push_back(pt);
  }
  if (rep.sweep.empty()) throw InvalidArgument("r_max", "no band below r_max");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& pt : rep.sweep) {
    const double x = std::pow(pt.r, 0.25), y = std::log(pt.max_ratio);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const int m = static_cast<int>(rep.sweep.size());
  const double den = m * sxx - sx * sx;
  rep.slope = den != 0.0 ? (m * sxy - sx * sy) / den : 0.0;
  rep.intercept = (sy - rep.slope * sx) / m;
  return rep;
}

BandObservabilityReport band_observability_constant(double r, double tau,
                                                    double d0_lo,
                                                    double d0_hi) {
  if (!(tau > 0.0)) throw InvalidArgument("tau", "must be positive");
  int nb = 0;
  while (true) {
    const double l = (nb + 1) * kPi * (nb + 1) * kPi;
    if (l * l <= r)
      ++nb;
    else
      break;
  }
  if (nb == 0) throw InvalidArgument("r", "the band below r is empty");

  Eigen::VectorXd lam(nb), mu(nb);
  for (int i = 1; i <= nb; ++i) {
    lam[i - 1] = (i * kPi) * (i * kPi);
    mu[i - 1] = lam[i - 1] * lam[i - 1];
  }
  Eigen::MatrixXd mass = interval_mass_matrix(nb, d0_lo, d0_hi);

  // backward solution in s = tau - t:  u_i = e^{-mu_i s} u_tau + B_i(s) v_tau
  auto I2 = [tau](double x, double y) {
    return (1.0 - std::exp(-(x + y) * tau)) / (x + y);
  };
  auto int_AB = [&](int i, int j) {  // int A_i B_j
    return (I2(mu[i], lam[j]) - I2(mu[i], mu[j])) / (mu[j] - lam[j]);
  };
  auto int_BB = [&](int i, int j) {
    return (I2(lam[i], lam[j]) - I2(lam[i], mu[j]) - I2(mu[i], lam[j]) +
            I2(mu[i], mu[j])) /
           ((mu[i] - lam[i]) * (mu[j] - lam[j]));
  };

  const int dim = 2 * nb;
  Eigen::MatrixXd G_obs = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < nb; ++j) {
      const double m = mass(i, j);
      G_obs(i, j) = m * I2(mu[i], mu[j]);
      G_obs(i, nb + j) = m * int_AB(i, j);
      G_obs(nb + i, j) = m * int_AB(j, i);
      G_obs(nb + i, nb + j) = m * int_BB(i, j);
    }
  }
  G_obs = 0.5 * (G_obs + G_obs.transpose()).eval();

  Eigen::MatrixXd G_en = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < nb; ++i) {
    const double A = std::exp(-mu[i] * tau);
    const double B = (std::exp(-lam[i] * tau) - A) / (mu[i] - lam[i]);
    const double D = std::exp(-lam[i] * tau);
    G_en(i, i) = A * A;
    G_en(i, nb + i) = A * B;
    G_en(nb + i, i) = A * B;
    G_en(nb + i, nb + i) = B * B + D * D;
  }

  BandObservabilityReport rep;
  rep.r = r;
  rep.tau = tau;
  rep.band = nb;
  rep.gramians = GramianPair{G_en, G_obs};
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(
      G_en, G_obs, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  rep.constant = ges.eigenvalues().maxCoeff();
  return rep;
}

ClampedObsReport clamped_observability_probe(int n_points, double d1c,
                                             double d2c, double d3c, double T,
                                             int ensemble, int data_draws,
                                             std::uint64_t seed, double d0_lo,
                                             double d0_hi, double dt,
                                             int workers, double gamma4,
                                             double gamma2) {
  ClampedDiscretization disc(n_points);
  const int n = disc.n;
  const int n_steps = static_cast<int>(std::llround(T / dt));

  Eigen::MatrixXd Lu = Eigen::MatrixXd::Identity(n, n) +
                       dt * (gamma4 * disc.D4 + disc.D3 - disc.D2);
  Eigen::MatrixXd Lv = Eigen::MatrixXd::Identity(n, n) + dt * gamma2 * disc.D2;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_u(Lu), lu_v(Lv);

  std::vector<int> d0_idx;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 1) * disc.h;
    if (x > d0_lo && x < d0_hi) d0_idx.push_back(i);
  }

  // smooth random data: the first 8 Dirichlet modes with unit normal weights
  auto make_data = [&](std::uint64_t s, Eigen::VectorXd& u0, Eigen::VectorXd& v0) {
    GaussianRng rng(s);
    u0.setZero(n);
    v0.setZero(n);
    for (int m = 1; m <= 8; ++m) {
      const double au = rng.normal(), av = rng.normal();
      for (int i = 0; i < n; ++i) {
        const double x = (i + 1) * disc.h;
        u0[i] += au * std::sqrt(2.0) * std::sin(m * kPi * x);
        v0[i] += av * std::sqrt(2.0) * std::sin(m * kPi * x);
      }
    }
  };

  struct PairOut {
    double term = 0, obs = 0;
  };
  std::vector<PairOut> slots(data_draws * ensemble);
  for_each_path(data_draws * ensemble, workers, [&](int idx) {
    const int draw = idx / ensemble;
    Eigen::VectorXd u, v;
    make_data(path_seed(seed ^ 0x77, draw), u, v);
    GaussianRng rng(path_seed(seed, idx));
    const double sdt = std::sqrt(dt);
    double obs = 0.0;
    for (int k = 0; k < n_steps; ++k) {
      for (int i : d0_idx) obs += dt * disc.h * u[i] * u[i];
      const double dW = sdt * rng.normal();
      Eigen::VectorXd ru = u + dt * (disc.D1 * v) + dW * (d1c * u);
      Eigen::VectorXd rv = v + dt * (disc.D1 * (v + u)) + dW * (d2c * u + d3c * v);
      u = lu_u.solve(ru);
      v = lu_v.solve(rv);
    }
    slots[idx].term = disc.h * (u.squaredNorm() + v.squaredNorm());
    slots[idx].obs = obs;
  });

  ClampedObsReport rep;
  rep.n_points = n_points;
  rep.ensemble = ensemble;
  rep.data_draws = data_draws;
  double best = 0.0, best_ci = 0.0;
  for (int d = 0; d < data_draws; ++d) {
    double mt = 0, mo = 0, st = 0, so = 0;
    for (int p = 0; p < ensemble; ++p) {
      mt += slots[d * ensemble + p].term;
      mo += slots[d * ensemble + p].obs;
    }
    mt /= ensemble;
    mo /= ensemble;
    for (int p = 0; p < ensemble; ++p) {
      st += std::pow(slots[d * ensemble + p].term - mt, 2);
      so += std::pow(slots[d * ensemble + p].obs - mo, 2);
    }
    st = std::sqrt(st / std::max(1, ensemble - 1));
    so = std::sqrt(so / std::max(1, ensemble - 1));
    const double ratio = mt / mo;
    if (ratio > best) {
      best = ratio;
      best_ci = 2.0 * (st / (std::sqrt(static_cast<double>(ensemble)) * mt) +
                       so / (std::sqrt(static_cast<double>(ensemble)) * mo));
    }
  }
  rep.constant = best;
  rep.ci_rel = best_ci;
  return rep;
}

DualityReport duality_control_backward(const Eigen::VectorXd& yT,
                                       const Eigen::VectorXd& zT,
                                       double probe_constant, int n_points,
                                       double T, double dt, double d0_lo,
                                       double d0_hi, double tikhonov) {
  ClampedDiscretization disc(n_points);
  const int n = disc.n;
  if (yT.size() != n || zT.size() != n)
    throw InvalidArgument("terminal data", "grid size mismatch");
  const int K = static_cast<int>(std::llround(T / dt));

  // adjoint one-step map W^{k+1} = T W^k  (deterministic kernel)
  Eigen::MatrixXd Lu = Eigen::MatrixXd::Identity(n, n) +
                       dt * (disc.D4 + disc.D3 - disc.D2);
  Eigen::MatrixXd Lv = Eigen::MatrixXd::Identity(n, n) + dt * disc.D2;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_u(Lu), lu_v(Lv);
  Eigen::MatrixXd Lu_inv = lu_u.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd Lv_inv = lu_v.solve(Eigen::MatrixXd::Identity(n, n));

  const int dim = 2 * n;
  Eigen::MatrixXd Tmap = Eigen::MatrixXd::Zero(dim, dim);
  Tmap.topLeftCorner(n, n) = Lu_inv;
  Tmap.topRightCorner(n, n) = dt * (Lu_inv * disc.D1);
  Tmap.bottomLeftCorner(n, n) = dt * (Lv_inv * disc.D1);
  Tmap.bottomRightCorner(n, n) =
      Lv_inv * (Eigen::MatrixXd::Identity(n, n) + dt * disc.D1);

  std::vector<int> d0_idx;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 1) * disc.h;
    if (x > d0_lo && x < d0_hi) d0_idx.push_back(i);
  }
  const int nd = static_cast<int>(d0_idx.size());

  // Gramian sweep over the full adjoint basis
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd U(nd, dim);
  for (int k = 0; k < K; ++k) {
    for (int q = 0; q < nd; ++q) U.row(q) = M.row(d0_idx[q]);
    G += (dt * disc.h) * (U.transpose() * U);
    M = Tmap * M;
  }
  G = 0.5 * (G + G.transpose()).eval();

  Eigen::VectorXd data(dim);
  data.head(n) = yT;
  data.tail(n) = zT;
  Eigen::VectorXd b = disc.h * (M.transpose() * data);

  DualityReport rep;
  rep.n_points = n_points;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double ev_max = es.eigenvalues().maxCoeff();
  const double ev_min = es.eigenvalues().minCoeff();
  double mu = tikhonov;
  if (mu <= 0.0 && ev_min < 1e-13 * ev_max) mu = 1e-13 * ev_max;
  rep.tikhonov_mu = mu;
  rep.regularized = (mu > 0.0);
  Eigen::MatrixXd Greg = G;
  Greg.diagonal().array() += mu;
  Eigen::VectorXd g = Greg.ldlt().solve(b);

  // second sweep: control values h^k on D0, and the controlled primal
  std::vector<Eigen::VectorXd> hseq(K);
  M.setIdentity();
  for (int k = 0; k < K; ++k) {
    for (int q = 0; q < nd; ++q) U.row(q) = M.row(d0_idx[q]);
    hseq[k] = U * g;
    rep.control_norm2 += dt * disc.h * hseq[k].squaredNorm();
    M = Tmap * M;
  }

  Eigen::VectorXd X = data;
  for (int k = K - 1; k >= 0; --k) {
    X = (Tmap.transpose() * X).eval();
    for (int q = 0; q < nd; ++q) X[d0_idx[q]] -= dt * hseq[k][q];
  }
  rep.initial_residual_rel =
      data.norm() > 0.0 ? X.norm() / data.norm() : X.norm();

  // duality identity against a random adjoint datum
  GaussianRng rng(0xD7);
  Eigen::VectorXd w0(dim);
  for (int i = 0; i < dim; ++i) w0[i] = rng.normal();
  Eigen::VectorXd w = w0;
  double rhs = 0.0;
  for (int k = 0; k < K; ++k) {
    double dot = 0.0;
    for (int q = 0; q < nd; ++q) dot += hseq[k][q] * w[d0_idx[q]];
    rhs += dt * disc.h * dot;
    w = Tmap * w;
  }
  const double lhs = disc.h * (data.dot(w) - X.dot(w0));
  rep.duality_residual_rel =
      std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  (void)probe_constant;
  return rep;
}

CarlemanFunctionalTerms carleman_functional_terms(const TrajectoryRecord& traj,
                                                  const CarlemanParams& p,
                                                  const SpectralBasis& basis,
                                                  int nx, double lambda_poly) {
  if (traj.times.size() < 3)
    throw InvalidArgument("trajectory", "too few time samples");
  if (std::abs(traj.times.back() - p.T) > traj.dt + 1e-12)
    throw InvalidArgument("T", "trajectory horizon must match the weights");

  const int n = basis.n_modes();
  const double hx = 1.0 / (nx - 1);
  Eigen::MatrixXd S(nx, n), C1(nx, n), S2(nx, n), C3(nx, n);
  const double s2 = std::sqrt(2.0);
  for (int j = 0; j < nx; ++j) {
    const double x = j * hx;
    for (int i = 1; i <= n; ++i) {
      const double w = i * kPi;
      S(j, i - 1) = s2 * std::sin(w * x);
      C1(j, i - 1) = s2 * w * std::cos(w * x);
      S2(j, i - 1) = -s2 * w * w * std::sin(w * x);
      C3(j, i - 1) = -s2 * w * w * w * std::cos(w * x);
    }
  }

  CarlemanFunctionalTerms out;
  const double lp = lambda_poly;
  for (std::size_t k = 1; k + 1 < traj.times.size(); ++k) {
    const double t = traj.times[k];
    if (t <= 0.0 || t >= p.T) continue;
    const double wt = traj.dt;  // interior rectangle rule; ends contribute 0
    const Eigen::VectorXd& ym = traj.states[k].y;
    const Eigen::VectorXd& zm = traj.states[k].z;
    Eigen::VectorXd pf = S * ym, px = C1 * ym, pxx = S2 * ym, pxxx = C3 * ym;
    Eigen::VectorXd qf = C1 * zm, qx = S2 * zm;

    for (int j = 0; j < nx; ++j) {
      const double x = j * hx;
      const double wx = (j == 0 || j == nx - 1) ? 0.5 * hx : hx;
      const double lphi = carleman_log_phi(p, x, t);
      const double ltheta2 = 2.0 * carleman_log_theta(p, x, t);
      const double w1 = std::exp(ltheta2 + lphi) * lp;
      const double w3 = std::exp(ltheta2 + 3.0 * lphi) * lp * lp * lp;
      const double w5 = std::exp(ltheta2 + 5.0 * lphi) * std::pow(lp, 5);
      const double w7 = std::exp(ltheta2 + 7.0 * lphi) * std::pow(lp, 7);
      const double ww = wt * wx;
      out.ks[0] += ww * w1 * pxxx[j] * pxxx[j];
      out.ks[1] += ww * w3 * pxx[j] * pxx[j];
      out.ks[2] += ww * w5 * px[j] * px[j];
      out.ks[3] += ww * w7 * pf[j] * pf[j];
      out.h[0] += ww * w1 * qx[j] * qx[j];
      out.h[1] += ww * w3 * qf[j] * qf[j];
    }
  }
  return out;
}

CarlemanFunctionals carleman_functionals(const TrajectoryRecord& traj,
                                         const CarlemanParams& p,
                                         const SpectralBasis& basis, int nx) {
  CarlemanFunctionalTerms t = carleman_functional_terms(traj, p, basis, nx, p.lambda);
  CarlemanFunctionals out;
  out.i_ks = t.ks[0] + t.ks[1] + t.ks[2] + t.ks[3];
  out.i_h = t.h[0] + t.h[1];
  return out;
}

}  // namespace kshc
