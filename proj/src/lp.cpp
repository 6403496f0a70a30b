#include "mbp/lp.hpp"

#include <algorithm>
#include <cmath>

#include "mbp/error.hpp"

namespace mbp {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-11;

struct Tableau {
  int rows = 0;
  int cols = 0;  // excluding the right-hand side
  std::vector<double> t;  // (rows + 1) x (cols + 1), last row is the reduced-cost row
  std::vector<int> basis;

  double& at(int r, int c) { return t[static_cast<std::size_t>(r) * (cols + 1) + c]; }
  double& rhs(int r) { return at(r, cols); }
  double& cost(int c) { return at(rows, c); }

  void pivot(int pr, int pc) {
    double inv = 1.0 / at(pr, pc);
    for (int c = 0; c <= cols; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (int r = 0; r <= rows; ++r) {
      if (r == pr) continue;
      double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c <= cols; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
    basis[pr] = pc;
  }

  // Sets the reduced-cost row to obj - c_B B^-1 A for the current basis.
  void price(const std::vector<double>& obj) {
    for (int c = 0; c <= cols; ++c) cost(c) = c < cols ? obj[c] : 0.0;
    for (int r = 0; r < rows; ++r) {
      double cb = obj[basis[r]];
      if (cb == 0.0) continue;
      for (int c = 0; c <= cols; ++c) cost(c) -= cb * at(r, c);
    }
  }

  // Bland's rule. Returns false when optimal.
  bool step(const std::vector<bool>& allowed, int& iterations, int max_iterations) {
    int pc = -1;
    for (int c = 0; c < cols; ++c)
      if (allowed[c] && cost(c) > kCostTol) {
        pc = c;
        break;
      }
    if (pc < 0) return false;
    int pr = -1;
    double best = 0.0;
    for (int r = 0; r < rows; ++r) {
      double a = at(r, pc);
      if (a <= kPivotTol) continue;
      double ratio = rhs(r) / a;
      if (pr < 0 || ratio < best - 1e-13 || (ratio <= best + 1e-13 && basis[r] < basis[pr])) {
        pr = r;
        best = ratio;
      }
    }
    if (pr < 0) throw Error(ErrorCode::Unbounded, "objective grows without bound");
    pivot(pr, pc);
    if (++iterations > max_iterations) throw Error(ErrorCode::SolverStall, "iteration limit reached");
    return true;
  }
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, int max_iterations) {
  const int n = static_cast<int>(lp.c.size());
  const int rows = static_cast<int>(lp.b.size());

  // Column layout: structural | slack/surplus (one per inequality) | artificial (one per row).
  std::vector<int> slack_col(rows, -1);
  int cols = n;
  for (int r = 0; r < rows; ++r)
    if (lp.sense[r] != RowSense::Eq) slack_col[r] = cols++;
  const int art0 = cols;
  cols += rows;

  Tableau T;
  T.rows = rows;
  T.cols = cols;
  T.t.assign(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0);
  T.basis.assign(rows, -1);

  std::vector<double> sign(rows, 1.0);
  for (int r = 0; r < rows; ++r) {
    sign[r] = lp.b[r] < 0.0 ? -1.0 : 1.0;
    for (int c = 0; c < n; ++c) T.at(r, c) = sign[r] * lp.A[r][c];
    if (slack_col[r] >= 0) T.at(r, slack_col[r]) = sign[r] * (lp.sense[r] == RowSense::Le ? 1.0 : -1.0);
    T.at(r, art0 + r) = 1.0;
    T.rhs(r) = sign[r] * lp.b[r];
    T.basis[r] = art0 + r;
  }

  LpSolution sol;
  std::vector<bool> allowed(cols, true);

  // Phase one: drive the artificial variables to zero.
  std::vector<double> phase1(cols, 0.0);
  for (int r = 0; r < rows; ++r) phase1[art0 + r] = -1.0;
  T.price(phase1);
  while (T.step(allowed, sol.iterations, max_iterations)) {
  }
  double infeas = 0.0;
  for (int r = 0; r < rows; ++r)
    if (T.basis[r] >= art0) infeas += T.rhs(r);
  double scale = 1.0;
  for (double v : lp.b) scale = std::max(scale, std::abs(v));
  if (infeas > 1e-9 * scale) throw Error(ErrorCode::Infeasible, "no point satisfies the constraints");

  // Pivot remaining zero-level artificials out where a structural or slack column allows it.
  for (int r = 0; r < rows; ++r) {
    if (T.basis[r] < art0) continue;
    for (int c = 0; c < art0; ++c)
      if (std::abs(T.at(r, c)) > 1e-9) {
        T.pivot(r, c);
        break;
      }
  }
  for (int c = art0; c < cols; ++c) allowed[c] = false;

  // Phase two.
  std::vector<double> obj(cols, 0.0);
  std::copy(lp.c.begin(), lp.c.end(), obj.begin());
  T.price(obj);
  while (T.step(allowed, sol.iterations, max_iterations)) {
  }

  sol.x.assign(n, 0.0);
  for (int r = 0; r < rows; ++r)
    if (T.basis[r] < n) sol.x[T.basis[r]] = T.rhs(r);
  sol.objective = 0.0;
  for (int c = 0; c < n; ++c) sol.objective += lp.c[c] * sol.x[c];

  // The artificial column of row r is the unit vector, so its reduced cost is -y_r.
  sol.y.assign(rows, 0.0);
  for (int r = 0; r < rows; ++r) sol.y[r] = -T.cost(art0 + r) * sign[r];
  return sol;
}

LpCertificate certify(const LinearProgram& lp, const LpSolution& sol) {
  LpCertificate cert;
  const std::size_t n = lp.c.size();
  const std::size_t rows = lp.b.size();
  double dual_obj = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double ax = 0.0;
    for (std::size_t c = 0; c < n; ++c) ax += lp.A[r][c] * sol.x[c];
    double viol = 0.0;
    switch (lp.sense[r]) {
      case RowSense::Le: viol = std::max(0.0, ax - lp.b[r]); break;
      case RowSense::Ge: viol = std::max(0.0, lp.b[r] - ax); break;
      case RowSense::Eq: viol = std::abs(ax - lp.b[r]); break;
    }
    cert.primal_residual = std::max(cert.primal_residual, viol);
    // Dual sign constraints for a maximization.
    double ysign = 0.0;
    if (lp.sense[r] == RowSense::Le) ysign = std::max(0.0, -sol.y[r]);
    if (lp.sense[r] == RowSense::Ge) ysign = std::max(0.0, sol.y[r]);
    cert.dual_residual = std::max(cert.dual_residual, ysign);
    cert.complementarity = std::max(cert.complementarity, std::abs(sol.y[r] * (lp.b[r] - ax)));
    dual_obj += sol.y[r] * lp.b[r];
  }
  for (std::size_t c = 0; c < n; ++c) {
    double red = lp.c[c];
    for (std::size_t r = 0; r < rows; ++r) red -= sol.y[r] * lp.A[r][c];
    cert.dual_residual = std::max(cert.dual_residual, std::max(0.0, red));
    cert.complementarity = std::max(cert.complementarity, std::abs(red * sol.x[c]));
    cert.primal_residual = std::max(cert.primal_residual, std::max(0.0, -sol.x[c]));
  }
  cert.duality_gap = std::abs(dual_obj - sol.objective);
  return cert;
}

}  // namespace mbp
