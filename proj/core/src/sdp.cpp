#include "mrcie/sdp.hpp"

#include "mrcie/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace mrcie::sdp {

std::vector<std::pair<int, int>> symmetric_vectorize(int n) {
  if (n < 1) throw ValidationError("symmetric_vectorize needs n >= 1");
  std::vector<std::pair<int, int>> idx;
  idx.reserve(n * (n + 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) idx.emplace_back(i, j);
  return idx;
}

VectorXd vectorize(const MatrixXd& S) {
  const int n = static_cast<int>(S.rows());
  auto idx = symmetric_vectorize(n);
  VectorXd v(idx.size());
  for (size_t k = 0; k < idx.size(); ++k) v[k] = S(idx[k].first, idx[k].second);
  return v;
}

MatrixXd devectorize(const VectorXd& v, int n) {
  auto idx = symmetric_vectorize(n);
  if (static_cast<size_t>(v.size()) != idx.size())
    throw ValidationError("devectorize: length does not match n(n+1)/2");
  MatrixXd S(n, n);
  for (size_t k = 0; k < idx.size(); ++k) {
    S(idx[k].first, idx[k].second) = v[k];
    S(idx[k].second, idx[k].first) = v[k];
  }
  return S;
}

// ---------------------------------------------------------------------------
// AffineMatrix

AffineMatrix::AffineMatrix(int rows, int cols) : c_(MatrixXd::Zero(rows, cols)) {}
AffineMatrix::AffineMatrix(const MatrixXd& constant) : c_(constant) {}

void AffineMatrix::add_term(int var, int row, int col, double value) {
  if (value != 0.0) terms_.push_back({var, row, col, value});
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix t(MatrixXd(c_.transpose()));
  t.terms_.reserve(terms_.size());
  for (const auto& e : terms_) t.terms_.push_back({e.var, e.col, e.row, e.value});
  return t;
}

MatrixXd AffineMatrix::evaluate(const VectorXd& y) const {
  MatrixXd M = c_;
  for (const auto& e : terms_) M(e.row, e.col) += y[e.var] * e.value;
  return M;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& o) {
  if (o.rows() != rows() || o.cols() != cols()) throw ValidationError("AffineMatrix size mismatch");
  c_ += o.c_;
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& o) {
  if (o.rows() != rows() || o.cols() != cols()) throw ValidationError("AffineMatrix size mismatch");
  c_ -= o.c_;
  for (const auto& e : o.terms_) terms_.push_back({e.var, e.row, e.col, -e.value});
  return *this;
}

AffineMatrix& AffineMatrix::operator*=(double s) {
  c_ *= s;
  for (auto& e : terms_) e.value *= s;
  return *this;
}

AffineMatrix operator*(const MatrixXd& L, const AffineMatrix& a) {
  if (L.cols() != a.rows()) throw ValidationError("AffineMatrix product size mismatch");
  AffineMatrix r(MatrixXd(L * a.c_));
  for (const auto& e : a.terms_)
    for (int k = 0; k < L.rows(); ++k)
      if (L(k, e.row) != 0.0) r.terms_.push_back({e.var, k, e.col, L(k, e.row) * e.value});
  r.compress();
  return r;
}

AffineMatrix operator*(const AffineMatrix& a, const MatrixXd& R) {
  if (a.cols() != R.rows()) throw ValidationError("AffineMatrix product size mismatch");
  AffineMatrix r(MatrixXd(a.c_ * R));
  for (const auto& e : a.terms_)
    for (int k = 0; k < R.cols(); ++k)
      if (R(e.col, k) != 0.0) r.terms_.push_back({e.var, e.row, k, e.value * R(e.col, k)});
  r.compress();
  return r;
}

void AffineMatrix::compress() {
  std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
    if (a.var != b.var) return a.var < b.var;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  std::vector<Term> out;
  out.reserve(terms_.size());
  for (const auto& e : terms_) {
    if (!out.empty() && out.back().var == e.var && out.back().row == e.row && out.back().col == e.col)
      out.back().value += e.value;
    else
      out.push_back(e);
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const Term& e) { return e.value == 0.0; }),
            out.end());
  terms_.swap(out);
}

// ---------------------------------------------------------------------------
// LmiProblem

MatrixXd LmiConstraint::evaluate(const VectorXd& y) const {
  MatrixXd F = F0;
  for (const auto& [var, entries] : coeffs)
    for (const auto& e : entries) F(e.row, e.col) += y[var] * e.value;
  return F;
}

int LmiProblem::add_variable(const std::string& name) {
  var_names.push_back(name);
  objective.conservativeResize(num_vars + 1);
  objective[num_vars] = 0.0;
  return num_vars++;
}

AffineMatrix LmiProblem::scalar_variable(const std::string& name) {
  AffineMatrix a(1, 1);
  a.add_term(add_variable(name), 0, 0, 1.0);
  return a;
}

AffineMatrix LmiProblem::symmetric_variable(const std::string& name, int n) {
  AffineMatrix a(n, n);
  for (auto [i, j] : symmetric_vectorize(n)) {
    const int v = add_variable(name + "[" + std::to_string(i) + "," + std::to_string(j) + "]");
    a.add_term(v, i, j, 1.0);
    if (i != j) a.add_term(v, j, i, 1.0);
  }
  return a;
}

AffineMatrix LmiProblem::full_variable(const std::string& name, int rows, int cols) {
  AffineMatrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      a.add_term(add_variable(name + "[" + std::to_string(i) + "," + std::to_string(j) + "]"), i, j,
                 1.0);
  return a;
}

void LmiProblem::add_constraint(const std::string& name, const AffineMatrix& F, Sense sense,
                                bool phase1_slack) {
  if (F.rows() != F.cols()) throw ValidationError("constraint '" + name + "' is not square");
  AffineMatrix S = F + F.transpose();
  S *= 0.5;
  S.compress();
  LmiConstraint c;
  c.name = name;
  c.sense = sense;
  c.size = F.rows();
  c.F0 = S.constant();
  c.phase1_slack = phase1_slack;
  for (const auto& e : S.terms()) {
    if (c.coeffs.empty() || c.coeffs.back().first != e.var) c.coeffs.push_back({e.var, {}});
    c.coeffs.back().second.push_back(e);
  }
  constraints.push_back(std::move(c));
}

AffineMatrix LmiProblem::block(const std::vector<std::vector<AffineMatrix>>& upper,
                               const std::vector<int>& sizes) {
  const int nb = static_cast<int>(sizes.size());
  std::vector<int> off(nb + 1, 0);
  for (int i = 0; i < nb; ++i) off[i + 1] = off[i] + sizes[i];
  AffineMatrix out(off[nb], off[nb]);
  MatrixXd C = MatrixXd::Zero(off[nb], off[nb]);
  auto place = [&](const AffineMatrix& b, int r0, int c0, bool transposed) {
    const MatrixXd& k = b.constant();
    if (transposed)
      C.block(r0, c0, k.cols(), k.rows()) += k.transpose();
    else
      C.block(r0, c0, k.rows(), k.cols()) += k;
    for (const auto& e : b.terms()) {
      if (transposed)
        out.add_term(e.var, r0 + e.col, c0 + e.row, e.value);
      else
        out.add_term(e.var, r0 + e.row, c0 + e.col, e.value);
    }
  };
  for (int i = 0; i < nb; ++i) {
    for (int j = i; j < nb; ++j) {
      if (j >= static_cast<int>(upper[i].size())) continue;
      const AffineMatrix& b = upper[i][j];
      if (b.rows() == 0 && b.cols() == 0) continue;
      if (b.rows() != sizes[i] || b.cols() != sizes[j]) {
        std::ostringstream os;
        os << "block (" << i << "," << j << ") has size " << b.rows() << "x" << b.cols()
           << ", expected " << sizes[i] << "x" << sizes[j];
        throw ValidationError(os.str());
      }
      place(b, off[i], off[j], false);
      if (i != j) place(b, off[j], off[i], true);
    }
  }
  AffineMatrix res(C);
  res += out;
  res.compress();
  return res;
}

void LmiProblem::validate() const {
  if (objective.size() != num_vars) throw ValidationError("objective length mismatch");
  for (const auto& c : constraints) {
    if (c.F0.rows() != c.size || c.F0.cols() != c.size)
      throw ValidationError("constraint '" + c.name + "' constant has wrong size");
    if ((c.F0 - c.F0.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ValidationError("constraint '" + c.name + "' is not symmetric");
    for (const auto& [var, entries] : c.coeffs) {
      if (var < 0 || var >= num_vars) throw ValidationError("constraint references unknown variable");
      for (const auto& e : entries)
        if (e.row < 0 || e.row >= c.size || e.col < 0 || e.col >= c.size)
          throw ValidationError("constraint '" + c.name + "' entry out of range");
    }
  }
}

const char* to_string(Status s) {
  switch (s) {
  case Status::Optimal: return "optimal";
  case Status::Infeasible: return "infeasible";
  case Status::NumericalFailure: return "numerical_failure";
  case Status::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// interior point core on the standard dual form
//   max b^T y  s.t.  Z_j = C_j - sum_i y_i A_ij >= 0

namespace {

struct Coef {
  int var;
  std::vector<Term> entries; // full symmetric entries
  std::vector<int> rows;     // distinct rows, for X A W products
  std::vector<std::vector<std::pair<int, double>>> row_cols;
};

struct Block {
  int n = 0;
  MatrixXd C;
  std::vector<Coef> coefs;
};

struct Sdp {
  int m = 0;
  VectorXd b;
  std::vector<Block> blocks;
};

void finalize_coef(Coef& c) {
  std::map<int, std::vector<std::pair<int, double>>> byrow;
  for (const auto& e : c.entries) byrow[e.row].push_back({e.col, e.value});
  for (auto& [r, v] : byrow) {
    c.rows.push_back(r);
    c.row_cols.push_back(std::move(v));
  }
}

Block make_block(const LmiConstraint& lc, double margin, bool slack, int slack_var) {
  const double sg = lc.sense == Sense::NegativeDefinite ? 1.0 : -1.0;
  Block b;
  b.n = lc.size;
  b.C = -sg * lc.F0 - margin * MatrixXd::Identity(lc.size, lc.size);
  for (const auto& [var, entries] : lc.coeffs) {
    Coef c;
    c.var = var;
    for (const auto& e : entries) c.entries.push_back({var, e.row, e.col, sg * e.value});
    finalize_coef(c);
    b.coefs.push_back(std::move(c));
  }
  if (slack) {
    Coef c;
    c.var = slack_var;
    for (int i = 0; i < lc.size; ++i) c.entries.push_back({slack_var, i, i, -1.0});
    finalize_coef(c);
    b.coefs.push_back(std::move(c));
  }
  return b;
}

double inner(const Coef& c, const MatrixXd& X) {
  double s = 0.0;
  for (const auto& e : c.entries) s += e.value * X(e.row, e.col);
  return s;
}

VectorXd op_A(const Sdp& p, const std::vector<MatrixXd>& X) {
  VectorXd r = VectorXd::Zero(p.m);
  for (size_t j = 0; j < p.blocks.size(); ++j)
    for (const auto& c : p.blocks[j].coefs) r[c.var] += inner(c, X[j]);
  return r;
}

MatrixXd op_AT(const Block& bl, const VectorXd& y) {
  MatrixXd M = MatrixXd::Zero(bl.n, bl.n);
  for (const auto& c : bl.coefs)
    for (const auto& e : c.entries) M(e.row, e.col) += y[c.var] * e.value;
  return M;
}

// largest alpha in (0,1] keeping S + alpha dS positive semidefinite
double max_step(const MatrixXd& S, const MatrixXd& dS) {
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd Li = llt.matrixL().solve(MatrixXd::Identity(S.rows(), S.cols()));
  MatrixXd T = Li * dS * Li.transpose();
  T = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(T, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0.0) return 1.0;
  return std::min(1.0, -1.0 / lmin);
}

struct IpmResult {
  VectorXd y;
  double pobj = 0, dobj = 0, gap = 0, pinf = 0, dinf = 0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

IpmResult run_ipm(const Sdp& p, const SolverOptions& opt) {
  const int m = p.m;
  const int nb = static_cast<int>(p.blocks.size());
  int ntot = 0;
  for (const auto& bl : p.blocks) ntot += bl.n;

  // initial point in the spirit of standard SDP codes
  std::vector<MatrixXd> X(nb), Z(nb);
  for (int j = 0; j < nb; ++j) {
    const auto& bl = p.blocks[j];
    double amax = 0.0, ratio = 0.0;
    for (const auto& c : bl.coefs) {
      double nrm = 0.0;
      for (const auto& e : c.entries) nrm += e.value * e.value;
      nrm = std::sqrt(nrm);
      amax = std::max(amax, nrm);
      ratio = std::max(ratio, (1.0 + std::abs(p.b[c.var])) / (1.0 + nrm));
    }
    const double sn = std::sqrt(static_cast<double>(bl.n));
    const double xi = std::max({10.0, sn, bl.n * ratio});
    const double zeta = std::max({10.0, sn, amax, bl.C.norm()});
    X[j] = xi * MatrixXd::Identity(bl.n, bl.n);
    Z[j] = zeta * MatrixXd::Identity(bl.n, bl.n);
  }
  VectorXd y = VectorXd::Zero(m);
  const double bnorm = p.b.norm();
  double cnorm = 0.0;
  for (const auto& bl : p.blocks) cnorm = std::max(cnorm, bl.C.norm());

  IpmResult res, best;
  double best_score = INFINITY;
  int since_best = 0;
  double lows[4] = {INFINITY, INFINITY, INFINITY, INFINITY};
  auto finish = [&](const std::string& msg) {
    // hand back the best iterate seen rather than the last one
    if (best_score < INFINITY) {
      best.iterations = res.iterations;
      res = best;
    }
    res.message = msg;
    return res;
  };
  std::vector<MatrixXd> W(nb), Rd(nb);
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it;
    VectorXd Rp = p.b - op_A(p, X);
    double pobj = 0.0, dinf = 0.0, xz = 0.0;
    for (int j = 0; j < nb; ++j) {
      Rd[j] = p.blocks[j].C - Z[j] - op_AT(p.blocks[j], y);
      pobj += (p.blocks[j].C.array() * X[j].array()).sum();
      dinf = std::max(dinf, Rd[j].norm());
      xz += (X[j].array() * Z[j].array()).sum();
    }
    const double dobj = p.b.dot(y);
    const double mu = xz / ntot;
    res.pobj = pobj;
    res.dobj = dobj;
    res.pinf = Rp.norm() / (1.0 + bnorm);
    res.dinf = dinf / (1.0 + cnorm);
    res.gap = std::max(std::abs(pobj - dobj), xz) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.y = y;
    if (opt.verbose)
      std::cerr << "ipm " << it << " pobj " << pobj << " dobj " << dobj << " gap " << res.gap
                << " pinf " << res.pinf << " dinf " << res.dinf << " mu " << mu << "\n";
    if (!std::isfinite(pobj) || !std::isfinite(dobj)) {
      res.message = "non-finite iterate";
      return res;
    }
    if (res.gap < opt.tolerance && res.pinf < opt.tolerance && res.dinf < opt.tolerance) {
      res.converged = true;
      return res;
    }
    const double score = std::max({res.gap, res.pinf, res.dinf});
    if (score <= best_score) {
      best_score = score;
      best = res;
    }
    // stalled once none of the residuals has improved for a while
    bool progress = false;
    for (int k = 0; k < 4; ++k) {
      const double v = k == 0 ? res.gap : k == 1 ? res.pinf : k == 2 ? res.dinf : mu;
      if (v < 0.9 * lows[k]) {
        lows[k] = v;
        progress = true;
      }
    }
    if (progress)
      since_best = 0;
    else if (++since_best >= 8)
      return finish("stalled");

    // Schur complement M_ik = tr(A_i X A_k Z^-1)
    MatrixXd M = MatrixXd::Zero(m, m);
    bool ok = true;
    for (int j = 0; j < nb && ok; ++j) {
      const auto& bl = p.blocks[j];
      Eigen::LLT<MatrixXd> llt(Z[j]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      W[j] = llt.solve(MatrixXd::Identity(bl.n, bl.n));
      W[j] = 0.5 * (W[j] + W[j].transpose());
      MatrixXd H(bl.n, bl.n);
      Eigen::RowVectorXd rv(bl.n);
      for (const auto& ck : bl.coefs) {
        H.setZero();
        for (size_t q = 0; q < ck.rows.size(); ++q) {
          rv.setZero();
          for (const auto& [col, v] : ck.row_cols[q]) rv += v * W[j].row(col);
          H.noalias() += X[j].col(ck.rows[q]) * rv;
        }
        for (const auto& ci : bl.coefs) {
          double s = 0.0;
          for (const auto& e : ci.entries) s += e.value * H(e.col, e.row);
          M(ci.var, ck.var) += s;
        }
      }
    }
    if (!ok) {
      return finish("slack matrix lost definiteness");
    }
    M = 0.5 * (M + M.transpose());
    // variables that appear in no block are pinned at zero
    for (int i = 0; i < m; ++i)
      if (M(i, i) == 0.0) M(i, i) = 1.0;
    Eigen::LLT<MatrixXd> Mf(M);
    for (double rel = 1e-13; Mf.info() != Eigen::Success && rel < 1e-5; rel *= 100.0) {
      const double reg = rel * (M.diagonal().cwiseAbs().maxCoeff() + 1.0);
      Mf.compute(M + reg * MatrixXd::Identity(m, m));
    }
    {
      if (Mf.info() != Eigen::Success) {
        return finish("Schur complement not positive definite");
      }
    }

    auto direction = [&](double sigma, const std::vector<MatrixXd>* corr, VectorXd& dy,
                         std::vector<MatrixXd>& dX, std::vector<MatrixXd>& dZ) {
      std::vector<MatrixXd> T(nb);
      for (int j = 0; j < nb; ++j) {
        T[j] = X[j] * Rd[j] * W[j] - sigma * mu * W[j];
        if (corr) T[j] += (*corr)[j];
      }
      VectorXd rhs = p.b + op_A(p, T);
      dy = Mf.solve(rhs);
      for (int k = 0; k < 2; ++k) dy += Mf.solve(rhs - M * dy);
      dX.resize(nb);
      dZ.resize(nb);
      for (int j = 0; j < nb; ++j) {
        dZ[j] = Rd[j] - op_AT(p.blocks[j], dy);
        MatrixXd D = sigma * mu * W[j] - X[j] - X[j] * dZ[j] * W[j];
        if (corr) D -= (*corr)[j];
        dX[j] = 0.5 * (D + D.transpose());
      }
    };
    auto steps = [&](const std::vector<MatrixXd>& dX, const std::vector<MatrixXd>& dZ, double& ap,
                     double& ad) {
      ap = 1.0;
      ad = 1.0;
      for (int j = 0; j < nb; ++j) {
        ap = std::min(ap, max_step(X[j], dX[j]));
        ad = std::min(ad, max_step(Z[j], dZ[j]));
      }
    };

    VectorXd dy;
    std::vector<MatrixXd> dX, dZ;
    direction(0.0, nullptr, dy, dX, dZ);
    double ap, ad;
    steps(dX, dZ, ap, ad);
    double xz_aff = 0.0;
    for (int j = 0; j < nb; ++j)
      xz_aff += ((X[j] + ap * dX[j]).array() * (Z[j] + ad * dZ[j]).array()).sum();
    const double mu_aff = xz_aff / ntot;
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3);
    sigma = std::min(1.0, sigma);
    std::vector<MatrixXd> corr(nb);
    for (int j = 0; j < nb; ++j) corr[j] = dX[j] * dZ[j] * W[j];
    direction(sigma, &corr, dy, dX, dZ);
    steps(dX, dZ, ap, ad);
    const double gamma = 0.95;
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (ap < 1e-12 && ad < 1e-12) {
      return finish("step length collapsed");
    }
    for (int j = 0; j < nb; ++j) {
      X[j] += ap * dX[j];
      Z[j] += ad * dZ[j];
      X[j] = 0.5 * (X[j] + X[j].transpose());
      Z[j] = 0.5 * (Z[j] + Z[j].transpose());
    }
    y += ad * dy;
  }
  res.iterations = opt.max_iterations;
  return finish("iteration limit");
}

// column scaling y = d .* y_hat so every variable has a unit-norm coefficient
VectorXd scale_variables(Sdp& p) {
  VectorXd nrm = VectorXd::Zero(p.m);
  for (const auto& bl : p.blocks)
    for (const auto& c : bl.coefs)
      for (const auto& e : c.entries) nrm[c.var] += e.value * e.value;
  VectorXd d = VectorXd::Ones(p.m);
  for (int i = 0; i < p.m; ++i)
    if (nrm[i] > 0.0) d[i] = 1.0 / std::sqrt(nrm[i]);
  for (auto& bl : p.blocks)
    for (auto& c : bl.coefs) {
      for (auto& e : c.entries) e.value *= d[c.var];
      for (auto& rc : c.row_cols)
        for (auto& [col, v] : rc) v *= d[c.var];
    }
  p.b = p.b.cwiseProduct(d);
  return d;
}

void check_caps(const LmiProblem& p, const SolverOptions& opt) {
  if (p.num_vars > opt.max_vars) {
    std::ostringstream os;
    os << "problem has " << p.num_vars << " scalar variables, cap is " << opt.max_vars;
    throw ValidationError(os.str());
  }
  for (const auto& c : p.constraints)
    if (c.size > opt.max_block) {
      std::ostringstream os;
      os << "constraint '" << c.name << "' has size " << c.size << ", cap is " << opt.max_block;
      throw ValidationError(os.str());
    }
}

} // namespace

CertificateReport verify(const LmiProblem& p, const VectorXd& y, double tol) {
  CertificateReport rep;
  rep.pass = y.size() == p.num_vars;
  double worst = -INFINITY;
  for (size_t k = 0; k < p.constraints.size(); ++k) {
    const auto& c = p.constraints[k];
    double margin = INFINITY;
    if (y.size() == p.num_vars) {
      MatrixXd F = c.evaluate(y);
      if (c.sense == Sense::PositiveDefinite) F = -F;
      F = 0.5 * (F + F.transpose());
      // eigen decomposition (the solver itself only uses Cholesky-based tests)
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(F, Eigen::EigenvaluesOnly);
      margin = es.eigenvalues().maxCoeff();
    }
    rep.names.push_back(c.name);
    rep.margins.push_back(margin);
    if (!(margin < -tol)) rep.pass = false;
    if (margin > worst) {
      worst = margin;
      rep.worst = static_cast<int>(k);
    }
  }
  return rep;
}

LmiSolution phase1(const LmiProblem& p, const SolverOptions& opt) {
  p.validate();
  check_caps(p, opt);
  Sdp s;
  s.m = p.num_vars + 1;
  const int t = p.num_vars;
  s.b = VectorXd::Zero(s.m);
  s.b[t] = -1.0; // minimize t
  for (const auto& c : p.constraints)
    s.blocks.push_back(make_block(c, c.phase1_slack ? 0.0 : opt.margin, c.phase1_slack, t));
  // box |y_i| <= R and t >= -1
  auto scalar_block = [&](int var, double coef, double rhs) {
    Block b;
    b.n = 1;
    b.C = MatrixXd::Constant(1, 1, rhs);
    Coef c;
    c.var = var;
    c.entries.push_back({var, 0, 0, coef});
    finalize_coef(c);
    b.coefs.push_back(std::move(c));
    s.blocks.push_back(std::move(b));
  };
  for (int i = 0; i < p.num_vars; ++i) {
    scalar_block(i, 1.0, opt.phase1_box);
    scalar_block(i, -1.0, opt.phase1_box);
  }
  scalar_block(t, -1.0, 1.0);
  SolverOptions o = opt;
  o.max_iterations = std::max(opt.max_iterations, 150);
  const VectorXd d = scale_variables(s);
  auto r = run_ipm(s, o);
  r.y = r.y.cwiseProduct(d);
  LmiSolution sol;
  sol.y = r.y.head(p.num_vars);
  sol.certificate = verify(p, sol.y, opt.cert_tol);
  // the attained margin is measured on the constraints, not read off the slack variable
  sol.phase1_margin = -INFINITY;
  for (size_t k = 0; k < p.constraints.size(); ++k)
    if (p.constraints[k].phase1_slack)
      sol.phase1_margin = std::max(sol.phase1_margin, sol.certificate.margins[k]);
  sol.iterations = r.iterations;
  sol.gap = r.gap;
  sol.primal_infeasibility = r.pinf;
  sol.dual_infeasibility = r.dinf;
  sol.objective = r.y[t];
  sol.status = sol.phase1_margin < -opt.margin ? Status::Optimal : Status::Infeasible;
  if (!r.converged && sol.status == Status::Infeasible && r.gap > 1e-4)
    sol.status = Status::NumericalFailure;
  sol.message = r.converged ? "phase 1 converged" : "phase 1 stopped: " + r.message;
  return sol;
}

LmiSolution solve(const LmiProblem& p, const SolverOptions& opt) {
  p.validate();
  check_caps(p, opt);
  Sdp s;
  s.m = p.num_vars;
  s.b = -p.objective;
  for (const auto& c : p.constraints) s.blocks.push_back(make_block(c, opt.margin, false, -1));
  const VectorXd d = scale_variables(s);
  auto r = run_ipm(s, opt);
  r.y = r.y.cwiseProduct(d);
  LmiSolution sol;
  sol.y = r.y;
  sol.objective = p.objective.dot(r.y);
  sol.iterations = r.iterations;
  sol.gap = r.gap;
  sol.primal_infeasibility = r.pinf;
  sol.dual_infeasibility = r.dinf;
  sol.certificate = verify(p, sol.y, opt.cert_tol);
  // accept a stalled run when the iterate is certified and nearly optimal
  const bool near = r.gap < 1e-3 && r.dinf < 1e-3;
  if ((r.converged || near) && sol.certificate.pass) {
    sol.status = Status::Optimal;
    sol.message = r.converged ? "converged" : "converged to reduced accuracy: " + r.message;
    return sol;
  }
  sol.message = r.message.empty() ? "not converged" : r.message;
  sol.status = r.iterations >= opt.max_iterations ? Status::IterationLimit : Status::NumericalFailure;
  if (opt.run_phase1) {
    auto ph = phase1(p, opt);
    sol.phase1_margin = ph.phase1_margin;
    if (ph.status == Status::Infeasible) {
      sol.status = Status::Infeasible;
      std::ostringstream os;
      os << "phase-1 margin " << ph.phase1_margin << " cannot reach " << -opt.margin;
      sol.message = os.str();
    } else if (ph.status == Status::Optimal && !sol.certificate.pass) {
      sol.message += "; phase 1 found a strictly feasible point";
    }
  }
  return sol;
}

} // namespace mrcie::sdp
