#include "mrcie/sma.hpp"

#include "mrcie/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mrcie {

double max_real_eig(const MatrixXd& A) {
  if (A.size() == 0) return -INFINITY;
  Eigen::EigenSolver<MatrixXd> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

SmaPartition partition(const LinearStateSpace& ss, const std::string& relevant) {
  auto it = std::find(ss.states.begin(), ss.states.end(), relevant);
  if (it == ss.states.end()) throw ValidationError("unknown relevant state '" + relevant + "'");
  if (ss.B.cols() != 1 || ss.C.rows() != 1)
    throw ValidationError("selective modal reduction expects a single-input single-output model");
  const int n = ss.n();
  const int r = static_cast<int>(it - ss.states.begin());
  SmaPartition p;
  p.relevant = r;
  for (int i = 0; i < n; ++i)
    if (i != r) p.less_relevant.push_back(i);
  const int nz = n - 1;
  p.A11 = ss.A(r, r);
  p.A12.resize(nz);
  p.A21.resize(nz);
  p.A22.resize(nz, nz);
  p.B_z.resize(nz);
  p.C_z.resize(nz);
  for (int i = 0; i < nz; ++i) {
    const int zi = p.less_relevant[i];
    p.A12[i] = ss.A(r, zi);
    p.A21[i] = ss.A(zi, r);
    p.B_z[i] = ss.B(zi, 0);
    p.C_z[i] = ss.C(0, zi);
    for (int j = 0; j < nz; ++j) p.A22(i, j) = ss.A(zi, p.less_relevant[j]);
  }
  p.B_r = ss.B(r, 0);
  p.C_r = ss.C(0, r);
  p.D = ss.D.size() ? ss.D(0, 0) : 0.0;
  if (nz > 0 && max_real_eig(p.A22) >= 0.0)
    throw ValidationError("A22 has an eigenvalue with nonnegative real part; reduction invalid");
  return p;
}

void SmaPartition::reassemble(MatrixXd& A, VectorXd& B, Eigen::RowVectorXd& C) const {
  const int nz = static_cast<int>(less_relevant.size());
  const int n = nz + 1;
  A.resize(n, n);
  B.resize(n);
  C.resize(n);
  A(relevant, relevant) = A11;
  B[relevant] = B_r;
  C[relevant] = C_r;
  for (int i = 0; i < nz; ++i) {
    const int zi = less_relevant[i];
    A(relevant, zi) = A12[i];
    A(zi, relevant) = A21[i];
    B[zi] = B_z[i];
    C[zi] = C_z[i];
    for (int j = 0; j < nz; ++j) A(zi, less_relevant[j]) = A22(i, j);
  }
}

RelevantMode select_relevant_mode(const ModalAnalysis& ma, int state_index) {
  const auto& P = ma.participation;
  if (state_index < 0 || state_index >= P.rows()) throw ValidationError("state index out of range");
  RelevantMode best;
  best.participation = -1.0;
  for (int k = 0; k < P.cols(); ++k) {
    const double p = P(state_index, k);
    const double tol = 1e-9;
    if (p > best.participation + tol) {
      best.participation = p;
      best.mode_index = k;
      best.tie = false;
    } else if (std::abs(p - best.participation) <= tol) {
      best.tie = true;
      // modes are sorted by |Re| ascending, so the earlier one is kept
    }
  }
  const auto lam = ma.eigenvalues[best.mode_index];
  if (std::abs(lam.imag()) > 1e-9 * std::max(1.0, std::abs(lam)))
    throw ValidationError("most relevant mode is complex; first-order reduction needs a real mode");
  best.lambda_r = lam.real();
  return best;
}

RelevantMode select_relevant_mode(const ModalAnalysis& ma, const LinearStateSpace& ss,
                                  const std::string& state) {
  auto it = std::find(ss.states.begin(), ss.states.end(), state);
  if (it == ss.states.end()) throw ValidationError("unknown state '" + state + "'");
  return select_relevant_mode(ma, static_cast<int>(it - ss.states.begin()));
}

ReducedModel reduce(const SmaPartition& p, double lambda_r, double delta_fraction) {
  if (delta_fraction < 0.0) throw ValidationError("delta_fraction must be nonnegative");
  const int nz = static_cast<int>(p.A22.rows());
  ReducedModel r;
  r.lambda_r = lambda_r;
  r.delta_fraction = delta_fraction;
  if (nz == 0) {
    r.A_rd = p.A11;
    r.B_rd = p.B_r;
    r.C_rd = p.C_r;
    r.D_rd = p.D;
    r.delta_nominal = VectorXd();
    return r;
  }
  const MatrixXd S = lambda_r * MatrixXd::Identity(nz, nz) - p.A22;
  Eigen::FullPivLU<MatrixXd> lu(S);
  if (!lu.isInvertible()) throw NumericError("(lambda_r I - A22) is singular");
  const VectorXd X = lu.solve(p.A21);
  r.A_rd = p.A11 + p.A12.dot(X);
  r.C_rd = p.C_r + p.C_z.dot(X);
  r.delta_nominal = (-p.A22).fullPivLu().solve(p.B_z);
  r.b_shift = p.A12.dot(r.delta_nominal);
  r.d_shift = p.C_z.dot(r.delta_nominal);
  r.B_rd = p.B_r + r.b_shift;
  r.D_rd = p.D + r.d_shift;
  return r;
}

ReducedModel ReducedModel::with_delta(double s) const {
  ReducedModel r = *this;
  r.B_rd = B_rd + s * b_shift;
  r.D_rd = D_rd + s * d_shift;
  return r;
}

void ReducedModel::validate() const {
  if (!(A_rd < 0.0)) throw ValidationError("reduced model must be stable (A_rd < 0)");
  if (!std::isfinite(B_rd) || !std::isfinite(C_rd) || !std::isfinite(D_rd))
    throw ValidationError("reduced model has non-finite coefficients");
}

} // namespace mrcie
