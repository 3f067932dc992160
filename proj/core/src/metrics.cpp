#include "mrcie/metrics.hpp"

#include "mrcie/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace mrcie {

VectorXd sg_derivative(const VectorXd& y, double dt, int width) {
  const int n = static_cast<int>(y.size());
  if (n < 3) throw ValidationError("derivative needs at least 3 samples");
  if (!(dt > 0.0)) throw ValidationError("derivative needs dt > 0");
  width = std::min(width, n % 2 ? n : n - 1);
  if (width < 3) width = 3;
  if (width % 2 == 0) --width;
  const int m = width / 2;
  VectorXd d(n);
  // interior: the quadratic term drops out of the centre derivative on a symmetric stencil
  double den = 0.0;
  for (int k = 1; k <= m; ++k) den += 2.0 * k * k;
  for (int i = m; i < n - m; ++i) {
    double s = 0.0;
    for (int k = 1; k <= m; ++k) s += k * (y[i + k] - y[i - k]);
    d[i] = s / (den * dt);
  }
  // edges: one quadratic per side over the first/last window
  auto edge = [&](int start, int lo, int hi) {
    Eigen::MatrixXd V(width, 3);
    VectorXd r(width);
    for (int k = 0; k < width; ++k) {
      const double tk = k * dt;
      V.row(k) << 1.0, tk, tk * tk;
      r[k] = y[start + k];
    }
    Eigen::Vector3d c = V.colPivHouseholderQr().solve(r);
    for (int i = lo; i < hi; ++i) {
      const double ti = (i - start) * dt;
      d[i] = c[1] + 2.0 * c[2] * ti;
    }
  };
  edge(0, 0, std::min(m, n));
  edge(n - width, std::max(n - m, 0), n);
  return d;
}

InertiaFit fit_emulated_inertia(const Trajectory& tr, double t_start, double window, int group, int sg_width) {
  InertiaFit fit;
  fit.t_start = t_start;
  fit.window = window;
  const VectorXd t = tr.time();
  if (t.size() < 3) throw ValidationError("trajectory too short for an inertia fit");
  if (t_start < t[0] || t_start + window > t[t.size() - 1] + 1e-9)
    throw ValidationError("inertia fit window lies outside the trajectory");
  const VectorXd w = tr.col(column("domega_d", group));
  const VectorXd p = tr.col(column("dP_g", group));
  const VectorXd dw = sg_derivative(w, tr.dt(), sg_width);
  double dd = 0.0, pd = 0.0, pp = 0.0;
  int cnt = 0;
  for (int i = 0; i < t.size(); ++i) {
    if (t[i] < t_start - 1e-12 || t[i] > t_start + window + 1e-12) continue;
    dd += dw[i] * dw[i];
    pd += p[i] * dw[i];
    pp += p[i] * p[i];
    ++cnt;
  }
  if (cnt < 3 || std::sqrt(dd / std::max(cnt, 1)) < 1e-9) {
    fit.message = "unidentifiable: frequency derivative has no energy in the window";
    return fit;
  }
  fit.identifiable = true;
  fit.H_ie = -pd / (2.0 * dd);
  double rr = 0.0;
  for (int i = 0; i < t.size(); ++i) {
    if (t[i] < t_start - 1e-12 || t[i] > t_start + window + 1e-12) continue;
    const double res = p[i] + 2.0 * fit.H_ie * dw[i];
    rr += res * res;
  }
  fit.residual = pp > 0.0 ? std::sqrt(rr / pp) : 0.0;
  return fit;
}

FrequencyMetrics frequency_metrics(const Trajectory& tr, int group, double f_bar, double rocof_window) {
  FrequencyMetrics m;
  const VectorXd t = tr.time();
  const VectorXd f = (f_bar * tr.col(column("domega_d", group))).array() + f_bar;
  const int n = static_cast<int>(f.size());
  Eigen::Index imin = 0;
  m.nadir = std::min(f_bar, f.minCoeff(&imin));
  m.t_nadir = f[imin] < f_bar ? t[imin] : t[0];
  const double dt = tr.dt();
  const int k = std::max(1, static_cast<int>(std::lround(rocof_window / std::max(dt, 1e-12))));
  for (int i = 0; i + k < n; ++i) m.max_rocof = std::max(m.max_rocof, std::abs(f[i + k] - f[i]) / (t[i + k] - t[i]));
  const int tail = std::max(1, n / 10);
  m.steady_state = (f.tail(tail).array() - f_bar).mean();
  return m;
}

TrackingMetrics tracking_metrics(const Trajectory& tr, int group, double f_bar, double t_from) {
  TrackingMetrics m;
  const VectorXd t = tr.time();
  const VectorXd e = f_bar * tr.col(column("e", group));
  const VectorXd w = tr.col(column("dP_pom", group));
  const double dt = tr.dt();
  double ee = 0.0, ww = 0.0;
  int cnt = 0;
  for (int i = 0; i < t.size(); ++i) {
    if (t[i] < t_from) continue;
    ee += e[i] * e[i];
    ww += 2.0 * w[i] * w[i];
    m.peak = std::max(m.peak, std::abs(e[i]));
    ++cnt;
  }
  m.rms = cnt ? std::sqrt(ee / cnt) : 0.0;
  m.ratio = ww > 0.0 ? std::sqrt(ee * dt) / std::sqrt(ww * dt) : 0.0;
  return m;
}

ScenarioReport make_report(const std::string& name, const Trajectory& tr, double t_dist, double f_bar,
                           double sqrt_gamma, double fit_window) {
  ScenarioReport r;
  r.name = name;
  int g = 0;
  while (tr.has(column("domega_d", g + 1))) ++g;
  r.groups = g + 1;
  for (int k = 0; k < r.groups; ++k) {
    auto f = frequency_metrics(tr, k, f_bar);
    if (k == 0 || f.nadir < r.freq.nadir) r.freq = f;
    auto tm = tracking_metrics(tr, k, f_bar);
    if (k == 0 || tm.rms > r.tracking.rms) r.tracking = tm;
    r.peak_dP_g_unit = std::max(r.peak_dP_g_unit, tr.col(column("dP_g_unit", k)).cwiseAbs().maxCoeff());
  }
  const double tend = tr.time()[tr.samples() - 1];
  const double win = std::min(fit_window, tend - t_dist);
  if (win > 0.0) r.inertia = fit_emulated_inertia(tr, t_dist, win);
  r.gamma_bound = sqrt_gamma;
  r.bound_ok = sqrt_gamma <= 0.0 || r.tracking.ratio <= sqrt_gamma;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

using cd = std::complex<double>;

double sigma_max(const Eigen::MatrixXcd& G) {
  if (G.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> sv(G);
  return sv.singularValues()(0);
}

Eigen::MatrixXcd freq_response(const MatrixXd& A, const MatrixXd& B, const MatrixXd& C, const MatrixXd& D,
                               double w) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXcd M = cd(0.0, w) * Eigen::MatrixXcd::Identity(n, n) - A.cast<cd>();
  Eigen::MatrixXcd G = C.cast<cd>() * M.partialPivLu().solve(B.cast<cd>());
  if (D.size()) G += D.cast<cd>();
  return G;
}

// imaginary-axis eigenvalues of the Hamiltonian at level g (returns their frequencies)
std::vector<double> imaginary_crossings(const MatrixXd& A, const MatrixXd& B, const MatrixXd& C, const MatrixXd& D,
                                        double g) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int p = static_cast<int>(C.rows());
  MatrixXd Dm = D.size() ? D : MatrixXd::Zero(p, m);
  // Bruinsma-Steinbuch form
  MatrixXd R = Dm.transpose() * Dm - g * g * MatrixXd::Identity(m, m);
  MatrixXd S = Dm * Dm.transpose() - g * g * MatrixXd::Identity(p, p);
  MatrixXd Ri = R.inverse(), Si = S.inverse();
  MatrixXd H(2 * n, 2 * n);
  H << A - B * Ri * Dm.transpose() * C, -g * B * Ri * B.transpose(), g * C.transpose() * Si * C,
      -A.transpose() + C.transpose() * Dm * Ri * B.transpose();
  Eigen::EigenSolver<MatrixXd> es(H, false);
  std::vector<double> out;
  for (int i = 0; i < 2 * n; ++i) {
    const cd l = es.eigenvalues()[i];
    if (std::abs(l.real()) < 1e-7 * (1.0 + std::abs(l))) out.push_back(std::abs(l.imag()));
  }
  return out;
}

} // namespace

HinfResult hinf_norm(const MatrixXd& A, const MatrixXd& B, const MatrixXd& C, const MatrixXd& D, double rel_tol) {
  HinfResult r;
  const int n = static_cast<int>(A.rows());
  if (n == 0) {
    r.norm = D.size() ? sigma_max(D.cast<cd>()) : 0.0;
    return r;
  }
  Eigen::EigenSolver<MatrixXd> es(A, false);
  if (es.eigenvalues().real().maxCoeff() >= 0.0) throw NumericError("H-infinity norm needs a stable A");
  // lower bound from a few test frequencies
  double lo = D.size() ? sigma_max(D.cast<cd>()) : 0.0;
  std::vector<double> probes{0.0};
  for (int i = 0; i < n; ++i) probes.push_back(std::abs(es.eigenvalues()[i]));
  for (double w : probes) {
    const double s = sigma_max(freq_response(A, B, C, D, w));
    if (s > lo) {
      lo = s;
      r.omega = w;
    }
  }
  if (lo <= 0.0) return r;
  double hi = 2.0 * lo;
  int widen = 0;
  while (!imaginary_crossings(A, B, C, D, hi).empty()) {
    hi *= 2.0;
    r.widened = true;
    if (++widen > 60) throw NumericError("H-infinity bisection could not bracket the norm");
  }
  if (r.widened) r.message = "upper bracket widened " + std::to_string(widen) + " times";
  double glo = lo * (1.0 + 1e-12);
  while (hi - glo > rel_tol * glo && r.iterations < 200) {
    const double mid = 0.5 * (glo + hi);
    auto x = imaginary_crossings(A, B, C, D, mid);
    if (x.empty()) {
      hi = mid;
    } else {
      glo = mid;
      r.omega = x.front();
    }
    ++r.iterations;
  }
  r.norm = 0.5 * (glo + hi);
  return r;
}

bool delayed_stable(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, double tau, int order) {
  if (B.cols() != 1) throw ValidationError("delayed_stable handles a single input");
  const int n = static_cast<int>(A.rows());
  if (tau <= 0.0) return (A + B * K).eigenvalues().real().maxCoeff() < 0.0;
  // e^{-s tau} as a cascade of [2/2] sections over tau/N each. One high-order companion form loses
  // every digit for small tau; each section here is realized in scaled time s*h so its entries stay O(1/h).
  const int sections = std::max(1, order / 2);
  const double h = tau / sections;
  Eigen::Matrix2d As;
  As << 0.0, 1.0, -12.0, -6.0;
  As /= h;
  const Eigen::Vector2d Bs(0.0, 1.0 / h);
  const Eigen::RowVector2d Cs(0.0, -12.0);
  const int m = 2 * sections;
  MatrixXd Ad = MatrixXd::Zero(m, m);
  VectorXd Bd = VectorXd::Zero(m);
  Eigen::RowVectorXd Cd = Eigen::RowVectorXd::Zero(m);
  // series connection; the feedthrough of every section is 1
  for (int k = 0; k < sections; ++k) {
    const int o = 2 * k;
    Ad.block<2, 2>(o, o) = As;
    Ad.block(o, 0, 2, o) = Bs * Cd.head(o);
    Bd.segment<2>(o) = Bs;
    Cd.segment<2>(o) = Cs;
  }
  MatrixXd M = MatrixXd::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = A + B * K;
  M.topRightCorner(n, m) = B * Cd;
  M.bottomLeftCorner(m, n) = Bd * K;
  M.bottomRightCorner(m, m) = Ad;
  return M.eigenvalues().real().maxCoeff() < 0.0;
}

GainGrid delayed_gain_grid(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, const MatrixXd& C,
                           const MatrixXd& E, double tau, double w_min, double w_max, int points) {
  if (points < 2 || !(w_max > w_min) || !(w_min > 0.0)) throw ValidationError("bad frequency grid");
  GainGrid g;
  g.points = points;
  g.decade_step = (std::log10(w_max) - std::log10(w_min)) / (points - 1);
  const int n = static_cast<int>(A.rows());
  const Eigen::MatrixXcd BK = (B * K).cast<cd>();
  for (int i = 0; i < points; ++i) {
    const double w = std::pow(10.0, std::log10(w_min) + i * g.decade_step);
    Eigen::MatrixXcd M = cd(0.0, w) * Eigen::MatrixXcd::Identity(n, n) - A.cast<cd>() - BK * std::exp(cd(0.0, -w * tau));
    const double s = sigma_max(C.cast<cd>() * M.partialPivLu().solve(E.cast<cd>()));
    if (s > g.max_gain) {
      g.max_gain = s;
      g.omega = w;
    }
  }
  return g;
}

GainGrid tracking_gain_estimate(const AugmentedSystem& aug, const Eigen::Matrix<double, 1, 7>& K, double tau,
                                int points) {
  const MatrixXd A = aug.A, B = aug.B_tilde, C = aug.C, E = aug.E;
  if (tau <= 0.0) {
    const MatrixXd Acl = A + B * K;
    if (Acl.eigenvalues().real().maxCoeff() >= 0.0) {
      GainGrid g;
      g.stable = false;
      g.max_gain = INFINITY;
      return g;
    }
    auto h = hinf_norm(Acl, E, C, MatrixXd::Zero(1, 2));
    GainGrid g;
    g.max_gain = h.norm;
    g.omega = h.omega;
    g.points = 0;
    return g;
  }
  auto g = delayed_gain_grid(A, B, K, C, E, tau, 1e-3, 1e3, points);
  g.stable = delayed_stable(A, B, K, tau);
  return g;
}

} // namespace mrcie
