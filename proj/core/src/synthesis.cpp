#include "mrcie/synthesis.hpp"

#include "mrcie/errors.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace mrcie {

using sdp::AffineMatrix;
using sdp::LmiProblem;
using sdp::Sense;

PlantModel assemble_plant(const DieselModel& d, const ReducedModel& r) {
  d.validate();
  const double f = d.f_bar, h2 = 2.0 * d.H_D;
  PlantModel p;
  p.A_p(0, 1) = f / h2;
  p.A_p(0, 3) = f * r.C_rd / h2;
  p.A_p(1, 1) = -1.0 / d.tau_d;
  p.A_p(1, 2) = 1.0 / d.tau_d;
  p.A_p(2, 0) = -1.0 / (f * d.tau_sm * d.R_D);
  p.A_p(2, 2) = -1.0 / d.tau_sm;
  p.A_p(3, 3) = r.A_rd;
  p.B_p << f * r.D_rd / h2, 0.0, 0.0, r.B_rd;
  p.E_p << -f / h2, 0.0, 0.0, 0.0;
  p.C_p << 1.0, 0.0, 0.0, 0.0;
  p.D_p = 0.0;
  return p;
}

AugmentedSystem assemble_augmented(const PlantModel& p, const ReferenceModel& ref,
                                   const DelayBounds& delays) {
  if (delays.eta_m < 0.0 || delays.kappa < 0.0) throw ValidationError("delay bounds must be >= 0");
  if (delays.eta_m > delays.kappa) throw ValidationError("eta_m must not exceed kappa");
  auto r = reference_state_space(ref);
  AugmentedSystem a;
  a.A.topLeftCorner<4, 4>() = p.A_p;
  a.A.bottomRightCorner<3, 3>() = r.A;
  a.E.block<4, 1>(0, 0) = p.E_p;
  a.E.block<3, 1>(4, 1) = r.E;
  a.B_tilde.head<4>() = p.B_p;
  a.C.head<4>() = p.C_p;
  a.C.tail<3>() = -r.C;
  a.D_p = p.D_p;
  a.delays = delays;
  return a;
}

int PolytopeSpec::uncertain_count() const { return 3 + (delta_fraction > 0.0 ? 1 : 0); }

std::vector<DieselModel> diesel_corners(const DieselModel& d, const PolytopeSpec& s) {
  for (const Interval* iv : {&s.H_D, &s.tau_d, &s.tau_sm})
    if (iv->lo < 0.0 || iv->hi < 0.0 || iv->lo >= 1.0)
      throw ValidationError("polytope bounds must satisfy 0 <= lo < 1 and hi >= 0");
  std::vector<DieselModel> out;
  for (int k = 0; k < 8; ++k) {
    DieselModel v = d;
    v.H_D = d.H_D * ((k & 1) ? 1.0 + s.H_D.hi : 1.0 - s.H_D.lo);
    v.tau_d = d.tau_d * ((k & 2) ? 1.0 + s.tau_d.hi : 1.0 - s.tau_d.lo);
    v.tau_sm = d.tau_sm * ((k & 4) ? 1.0 + s.tau_sm.hi : 1.0 - s.tau_sm.lo);
    out.push_back(v);
  }
  return out;
}

std::vector<PlantModel> enumerate_vertices(const DieselModel& d, const ReducedModel& r,
                                           const PolytopeSpec& s) {
  std::vector<PlantModel> out;
  std::vector<double> deltas{0.0};
  if (s.delta_fraction > 0.0) deltas = {-s.delta_fraction, s.delta_fraction};
  for (const auto& dv : diesel_corners(d, s))
    for (double dl : deltas) out.push_back(assemble_plant(dv, r.with_delta(dl)));
  return out;
}

double SynthesisResult::tracking_bound() const { return std::sqrt(std::max(gamma, 0.0)); }

namespace {

AffineMatrix constant(const MatrixXd& M) { return AffineMatrix(M); }
AffineMatrix zeros(int r, int c) { return AffineMatrix(r, c); }

// scalar variable times the identity
AffineMatrix scaled_identity(const AffineMatrix& s, int n) {
  AffineMatrix out(n, n);
  const int var = s.terms().front().var;
  for (int i = 0; i < n; ++i) out.add_term(var, i, i, 1.0);
  return out;
}

} // namespace

SynthesisProblem build_lmi(const std::vector<AugmentedSystem>& vertices, const SynthesisOptions& opt) {
  if (vertices.empty()) throw ValidationError("synthesis needs at least one vertex");
  const double eta_m = vertices.front().delays.eta_m;
  const double kappa = vertices.front().delays.kappa;
  for (const auto& v : vertices)
    if (v.delays.eta_m != eta_m || v.delays.kappa != kappa)
      throw ValidationError("all vertices must share the delay bounds");
  if (eta_m > kappa) throw ValidationError("eta_m must not exceed kappa");

  const int n = 7;
  const MatrixXd I = MatrixXd::Identity(n, n);
  SynthesisProblem sp;
  LmiProblem& p = sp.lmi;
  SynthesisVariables& v = sp.vars;
  v.gamma = p.scalar_variable("gamma");
  v.k_a = p.scalar_variable("k_a");
  v.k_b = p.scalar_variable("k_b");
  v.P = p.symmetric_variable("P", n);
  v.Q = p.symmetric_variable("Q", n);
  v.M1 = p.symmetric_variable("M1", n);
  v.M2 = p.symmetric_variable("M2", n);
  v.U1 = p.full_variable("U1", n, n);
  v.U2 = p.full_variable("U2", n, n);
  v.V1 = p.full_variable("V1", n, n);
  v.V2 = p.full_variable("V2", n, n);
  v.K = p.full_variable("K", 1, n);
  p.objective[v.gamma.terms()[0].var] = opt.gamma_weight;
  p.objective[v.k_a.terms()[0].var] = opt.ka_weight;
  p.objective[v.k_b.terms()[0].var] = opt.kb_weight;

  p.add_constraint("P>0", v.P, Sense::PositiveDefinite);
  p.add_constraint("Q>0", v.Q, Sense::PositiveDefinite);
  p.add_constraint("M1>0", v.M1, Sense::PositiveDefinite);
  p.add_constraint("M2>0", v.M2, Sense::PositiveDefinite);

  // gain limits: [[-k_a I, K^T], [K, -1]] < 0 and [[k_b I, I], [I, P]] > 0
  {
    AffineMatrix kaI = scaled_identity(v.k_a, n);
    AffineMatrix ga = LmiProblem::block({{-kaI, v.K.transpose()}, {{}, constant(-MatrixXd::Identity(1, 1))}},
                                        {n, 1});
    p.add_constraint("gain_a", ga, Sense::NegativeDefinite);
    AffineMatrix kbI = scaled_identity(v.k_b, n);
    AffineMatrix gb = LmiProblem::block({{kbI, constant(I)}, {{}, v.P}}, {n, n});
    p.add_constraint("gain_b", gb, Sense::PositiveDefinite);
  }

  const bool delay_free = kappa == 0.0;
  const bool has_eta = eta_m > 0.0;
  const double w2 = opt.interval_weighting ? kappa - eta_m : kappa;
  if (!delay_free && w2 <= 0.0) throw ValidationError("interval weighting needs kappa > eta_m");
  int k = 0;
  for (const auto& vx : vertices) {
    const MatrixXd A = vx.A, E = vx.E, C = vx.C, Bt = vx.B_tilde;
    AffineMatrix AP = A * v.P;
    AffineMatrix PAt = AP.transpose();
    AffineMatrix BK = Bt * v.K;
    AffineMatrix PCt = v.P * MatrixXd(C.transpose());
    AffineMatrix gI = scaled_identity(v.gamma, 2);
    AffineMatrix KDt = MatrixXd::Constant(1, 1, vx.D_p) * v.K;
    AffineMatrix main;
    if (delay_free) {
      AffineMatrix T = AP + PAt + BK + BK.transpose();
      main = LmiProblem::block({{T, constant(E), PCt + KDt.transpose()},
                                {{}, -gI, zeros(2, 1)},
                                {{}, {}, constant(-MatrixXd::Identity(1, 1))}},
                               {n, 2, 1});
    } else {
      AffineMatrix T11 = AP + PAt + v.Q + v.U1.transpose() + v.U1;
      AffineMatrix T22 = -v.Q - v.V1.transpose() - v.V1 + v.U2.transpose() + v.U2;
      AffineMatrix Y1 = 2.0 * v.P - v.M1;
      AffineMatrix Y2 = 2.0 * v.P - v.M2;
      std::vector<std::vector<AffineMatrix>> rows(9, std::vector<AffineMatrix>(9));
      rows[0][0] = T11;
      rows[0][1] = v.V1.transpose() - v.U1;
      rows[0][2] = BK;
      rows[0][5] = constant(E);
      rows[0][6] = PCt;
      rows[1][1] = T22;
      rows[1][2] = v.V2.transpose() - v.U2;
      rows[1][4] = v.U2;
      rows[2][2] = -v.V2.transpose() - v.V2;
      rows[2][4] = v.V2;
      rows[2][6] = KDt.transpose();
      rows[2][8] = BK.transpose();
      rows[4][4] = (-1.0 / w2) * Y2;
      rows[5][5] = -gI;
      rows[5][8] = constant(E.transpose());
      rows[6][6] = constant(-MatrixXd::Identity(1, 1));
      rows[8][8] = (-1.0 / w2) * v.M2;
      rows[0][8] = PAt;
      if (has_eta) {
        rows[0][3] = v.U1;
        rows[1][3] = v.V1;
        rows[0][7] = PAt;
        rows[2][7] = BK.transpose();
        rows[3][3] = (-1.0 / eta_m) * Y1;
        rows[5][7] = constant(E.transpose());
        rows[7][7] = (-1.0 / eta_m) * v.M1;
      }
      std::vector<int> sizes{n, n, n, n, n, 2, 1, n, n};
      if (!has_eta) {
        // the eta_m rows vanish in the limit eta_m -> 0
        std::vector<std::vector<AffineMatrix>> r7;
        std::vector<int> s7;
        for (int i = 0; i < 9; ++i) {
          if (i == 3 || i == 7) continue;
          std::vector<AffineMatrix> row;
          for (int j = 0; j < 9; ++j)
            if (j != 3 && j != 7) row.push_back(rows[i][j]);
          r7.push_back(row);
          s7.push_back(sizes[i]);
        }
        rows = r7;
        sizes = s7;
      }
      main = LmiProblem::block(rows, sizes);
    }
    sp.main_block_size = main.rows();
    p.add_constraint("main[" + std::to_string(k++) + "]", main, Sense::NegativeDefinite);
  }
  return sp;
}

namespace {

MatrixXd value(const AffineMatrix& a, const VectorXd& y) { return a.evaluate(y); }

SynthesisResult run(const std::vector<AugmentedSystem>& vertices, const SynthesisOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  SynthesisProblem sp = build_lmi(vertices, opt);
  auto sol = sdp::solve(sp.lmi, opt.solver);
  SynthesisResult r;
  r.status = sol.status;
  r.iterations = sol.iterations;
  r.certificate = sol.certificate;
  r.vertices = static_cast<int>(vertices.size());
  r.num_vars = sp.lmi.num_vars;
  r.main_block_size = sp.main_block_size;
  r.phase1_margin = sol.phase1_margin;
  r.message = sol.message;
  if (sol.status == sdp::Status::Infeasible)
    r.message += "; try a reference inertia closer to the plant (smaller H_hat - H_D) or relaxed delay "
                 "bounds (eta_m, kappa)";
  r.delays = vertices.front().delays;
  const VectorXd& y = sol.y;
  r.gamma = value(sp.vars.gamma, y)(0, 0);
  r.k_a = value(sp.vars.k_a, y)(0, 0);
  r.k_b = value(sp.vars.k_b, y)(0, 0);
  r.P = value(sp.vars.P, y);
  r.Q = value(sp.vars.Q, y);
  r.M1 = value(sp.vars.M1, y);
  r.M2 = value(sp.vars.M2, y);
  r.U1 = value(sp.vars.U1, y);
  r.U2 = value(sp.vars.U2, y);
  r.V1 = value(sp.vars.V1, y);
  r.V2 = value(sp.vars.V2, y);
  r.K_bar = value(sp.vars.K, y);
  Eigen::LLT<MatrixXd> llt(r.P);
  if (llt.info() == Eigen::Success)
    r.K = llt.solve(MatrixXd(r.K_bar.transpose())).transpose();
  else
    r.K = r.K_bar * r.P.completeOrthogonalDecomposition().pseudoInverse();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

} // namespace

SynthesisResult synthesize(const AugmentedSystem& aug, const SynthesisOptions& opt) {
  return run({aug}, opt);
}

SynthesisResult synthesize_robust(const std::vector<AugmentedSystem>& vertices,
                                  const SynthesisOptions& opt) {
  auto r = run(vertices, opt);
  if (r.status == sdp::Status::Infeasible && vertices.size() > 1) {
    auto subset = infeasible_vertex_subset(vertices, opt);
    std::ostringstream os;
    os << r.message << "; jointly infeasible vertex subset {";
    for (size_t i = 0; i < subset.size(); ++i) os << (i ? ", " : "") << subset[i];
    os << "}";
    r.message = os.str();
  }
  return r;
}

std::vector<int> infeasible_vertex_subset(const std::vector<AugmentedSystem>& vertices,
                                          const SynthesisOptions& opt) {
  // grow a subset one vertex at a time until the phase-1 margin turns nonnegative
  SynthesisOptions o = opt;
  std::vector<int> chosen;
  std::vector<bool> used(vertices.size(), false);
  while (chosen.size() < vertices.size()) {
    int best = -1;
    double best_margin = -INFINITY;
    for (size_t i = 0; i < vertices.size(); ++i) {
      if (used[i]) continue;
      std::vector<AugmentedSystem> sub;
      for (int c : chosen) sub.push_back(vertices[c]);
      sub.push_back(vertices[i]);
      auto sp = build_lmi(sub, o);
      auto ph = sdp::phase1(sp.lmi, o.solver);
      if (ph.phase1_margin > best_margin) {
        best_margin = ph.phase1_margin;
        best = static_cast<int>(i);
      }
    }
    chosen.push_back(best);
    used[best] = true;
    if (best_margin >= -o.solver.margin) break;
  }
  return chosen;
}

} // namespace mrcie
