#include "mrcie/equilibrium.hpp"

#include "mrcie/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mrcie {

namespace {

constexpr int kUnknowns = dfig::kStates + dfig::kAlg + 1;
using Vec21 = Eigen::Matrix<double, kUnknowns, 1>;
using Mat21 = Eigen::Matrix<double, kUnknowns, kUnknowns>;

DfigInputs inputs_of(const EquilibriumTargets& t) {
  DfigInputs in;
  in.Q_g_star = t.Q_g;
  in.v_qs = t.v_qs;
  in.v_ds = t.v_ds;
  in.omega_s = t.omega_s;
  in.wind_speed = t.wind_speed;
  return in;
}

Vec21 eq_residual(const Vec21& z, DfigModel m, const DfigInputs& in, double P_target) {
  m.turbine.power_scale = z[kUnknowns - 1];
  DfigState s = z.head<dfig::kStates>();
  DfigAlgebraic a = z.segment<dfig::kAlg>(dfig::kStates);
  auto r = dfig_residual(s, a, in, m);
  Vec21 out;
  out.head<dfig::kStates>() = r.dx;
  out.segment<dfig::kAlg>(dfig::kStates) = r.g;
  out[kUnknowns - 1] = a[dfig::P_g] - P_target;
  return out;
}

} // namespace

DfigModel DfigOperatingPoint::calibrated(const DfigModel& m) const {
  DfigModel c = m;
  c.turbine.power_scale = turbine_scale;
  return c;
}

DfigOperatingPoint solve_equilibrium(const DfigModel& m, const EquilibriumTargets& t,
                                     const EquilibriumOptions& opt) {
  m.validate();
  if (t.P_g < 0.0) throw ValidationError("P_g target must be nonnegative");
  if (t.wind_speed <= 0.0 && t.P_g > 0.0)
    throw ValidationError("P_g target unreachable without wind");
  const DfigInputs in = inputs_of(t);

  // initial guess: nominal fluxes, MPPT speed, currents from flux algebra
  Vec21 z = Vec21::Zero();
  const double wr0 = mppt_speed(t.P_g, m.eta);
  Eigen::Vector4d psi(0.0, 1.0, 0.2, 1.0);
  Eigen::Vector4d cur = flux_to_current(m, psi);
  z.head<4>() = psi;
  z[dfig::omega_r] = wr0;
  z[dfig::omega_f] = wr0;
  z[dfig::x1] = -0.6 * t.P_g / 0.8;
  z[dfig::x2] = cur[3];
  const int o = dfig::kStates;
  z.segment<4>(o) = cur;
  z[o + dfig::v_qr] = -0.2;
  z[o + dfig::v_dr] = 0.05;
  z[o + dfig::P_g] = t.P_g;
  z[o + dfig::Q_g] = t.Q_g;
  z[o + dfig::i_qr_ref] = cur[2];
  z[o + dfig::i_dr_ref] = cur[3];
  z[kUnknowns - 1] = t.P_g;

  Vec21 F = eq_residual(z, m, in, t.P_g);
  double norm = F.lpNorm<Eigen::Infinity>();
  int it = 0;
  for (; it < opt.max_iterations && norm > opt.tolerance; ++it) {
    Mat21 J;
    for (int j = 0; j < kUnknowns; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(z[j]));
      Vec21 zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      J.col(j) = (eq_residual(zp, m, in, t.P_g) - eq_residual(zm, m, in, t.P_g)) / (2.0 * h);
    }
    Eigen::FullPivLU<Mat21> lu(J);
    if (!lu.isInvertible()) {
      Eigen::JacobiSVD<Mat21> svd(J);
      const auto& sv = svd.singularValues();
      std::ostringstream os;
      os << "equilibrium Jacobian singular at iteration " << it << " (condition estimate "
         << sv[0] / sv[kUnknowns - 1] << ")";
      throw NumericError(os.str());
    }
    Vec21 dz = -lu.solve(F);
    // backtracking on the residual norm
    double step = 1.0;
    Vec21 zn;
    double nn = 0.0;
    for (int k = 0; k < 30; ++k) {
      zn = z + step * dz;
      nn = eq_residual(zn, m, in, t.P_g).lpNorm<Eigen::Infinity>();
      if (std::isfinite(nn) && nn < (1.0 - 1e-4 * step) * norm) break;
      step *= 0.5;
    }
    z = zn;
    F = eq_residual(z, m, in, t.P_g);
    norm = F.lpNorm<Eigen::Infinity>();
  }
  if (!(norm <= std::max(opt.tolerance, 1e-10))) {
    std::ostringstream os;
    os << "equilibrium Newton did not converge after " << it << " iterations; last residual "
       << norm;
    throw NumericError(os.str());
  }

  DfigOperatingPoint op;
  op.state = z.head<dfig::kStates>();
  op.algebraic = z.segment<dfig::kAlg>(dfig::kStates);
  op.inputs = in;
  op.turbine_scale = z[kUnknowns - 1];
  op.iterations = it;
  op.residual = norm;
  auto r = dfig_residual(op.state, op.algebraic, in, op.calibrated(m));
  op.T_e = r.T_e;
  op.T_m = r.T_m;
  return op;
}

namespace {

struct Jacobians {
  MatrixXd fx, fa, fu, gx, ga, gu;
};

Jacobians dae_jacobians(const DfigModel& m, const DfigOperatingPoint& op, double rel) {
  const int n = dfig::kStates, na = dfig::kAlg;
  Jacobians J;
  J.fx.resize(n, n);
  J.gx.resize(na, n);
  J.fa.resize(n, na);
  J.ga.resize(na, na);
  J.fu.resize(n, 1);
  J.gu.resize(na, 1);
  auto eval = [&](const DfigState& s, const DfigAlgebraic& a, double u) {
    DfigInputs in = op.inputs;
    in.u_ie = u;
    return dfig_residual(s, a, in, m);
  };
  const DfigState s0 = op.state;
  const DfigAlgebraic a0 = op.algebraic;
  for (int j = 0; j < n; ++j) {
    const double h = rel * std::max(1.0, std::abs(s0[j]));
    DfigState sp = s0, sm = s0;
    sp[j] += h;
    sm[j] -= h;
    auto rp = eval(sp, a0, 0.0), rm = eval(sm, a0, 0.0);
    J.fx.col(j) = (rp.dx - rm.dx) / (2 * h);
    J.gx.col(j) = (rp.g - rm.g) / (2 * h);
  }
  for (int j = 0; j < na; ++j) {
    const double h = rel * std::max(1.0, std::abs(a0[j]));
    DfigAlgebraic ap = a0, am = a0;
    ap[j] += h;
    am[j] -= h;
    auto rp = eval(s0, ap, 0.0), rm = eval(s0, am, 0.0);
    J.fa.col(j) = (rp.dx - rm.dx) / (2 * h);
    J.ga.col(j) = (rp.g - rm.g) / (2 * h);
  }
  {
    const double h = rel;
    auto rp = eval(s0, a0, h), rm = eval(s0, a0, -h);
    J.fu.col(0) = (rp.dx - rm.dx) / (2 * h);
    J.gu.col(0) = (rp.g - rm.g) / (2 * h);
  }
  return J;
}

} // namespace

LinearStateSpace linearize(const DfigModel& m_in, const DfigOperatingPoint& op,
                           const LinearizeOptions& opt) {
  const DfigModel m = op.calibrated(m_in);
  auto J = dae_jacobians(m, op, opt.rel_step);
  Eigen::FullPivLU<MatrixXd> lu(J.ga);
  if (!lu.isInvertible()) {
    // name the algebraic constraint with the weakest row
    Eigen::JacobiSVD<MatrixXd> svd(J.ga, Eigen::ComputeFullU);
    Eigen::Index row;
    svd.matrixU().col(J.ga.rows() - 1).cwiseAbs().maxCoeff(&row);
    throw NumericError("algebraic Jacobian singular; offending constraint: residual " +
                       std::to_string(row) + " (" + dfig::algebraic_labels()[row] + ")");
  }
  const MatrixXd Xg = lu.solve(J.gx);
  const MatrixXd Ug = lu.solve(J.gu);
  LinearStateSpace ss;
  ss.A = J.fx - J.fa * Xg;
  ss.B = J.fu - J.fa * Ug;
  // output dP_g is the algebraic variable P_g
  ss.C = -Xg.row(dfig::P_g);
  ss.D = -Ug.row(dfig::P_g);
  ss.E = MatrixXd::Zero(dfig::kStates, 0);
  ss.F = MatrixXd::Zero(1, 0);
  ss.states = dfig::state_labels();
  ss.inputs = {"u_ie"};
  ss.outputs = {"d_P_g"};
  return ss;
}

double linearization_step_sensitivity(const DfigModel& m, const DfigOperatingPoint& op,
                                      double rel_step) {
  auto a = linearize(m, op, {rel_step});
  auto b = linearize(m, op, {rel_step / 2});
  double worst = 0.0;
  auto cmp = [&](const MatrixXd& x, const MatrixXd& y) {
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    worst = std::max(worst, (x - y).cwiseAbs().maxCoeff() / scale);
  };
  cmp(a.A, b.A);
  cmp(a.B, b.B);
  cmp(a.C, b.C);
  cmp(a.D, b.D);
  return worst;
}

ModalAnalysis modal_analysis(const MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw ValidationError("modal analysis needs square A");
  const int n = static_cast<int>(A.rows());
  Eigen::EigenSolver<MatrixXd> es(A, true);
  if (es.info() != Eigen::Success) throw NumericError("eigenvalue decomposition failed");
  Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::VectorXcd lam = es.eigenvalues();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
  const double cond = svd.singularValues()[0] / svd.singularValues()[n - 1];
  if (!(cond < 1e12)) {
    std::ostringstream os;
    os << "matrix appears defective (eigenvector condition " << cond
       << "); Jordan blocks make participation factors meaningless";
    throw NumericError(os.str());
  }
  Eigen::MatrixXcd W = V.inverse().transpose(); // columns are left eigenvectors

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    const double ai = std::abs(lam[i].real()), aj = std::abs(lam[j].real());
    if (ai != aj) return ai < aj;
    return lam[i].imag() > lam[j].imag();
  });

  ModalAnalysis ma;
  ma.eigenvalues.resize(n);
  ma.right.resize(n, n);
  ma.left.resize(n, n);
  ma.participation.resize(n, n);
  for (int k = 0; k < n; ++k) {
    const int i = order[k];
    ma.eigenvalues[k] = lam[i];
    ma.right.col(k) = V.col(i);
    ma.left.col(k) = W.col(i);
    Eigen::VectorXd p = (V.col(i).array() * W.col(i).array()).abs().matrix();
    ma.participation.col(k) = p / p.sum();
  }
  return ma;
}

} // namespace mrcie
