#pragma once

#include <vector>

namespace mbp {

enum class RowSense { Le, Eq, Ge };

// max c.x  s.t.  A x (<=,=,>=) b,  x >= 0
struct LinearProgram {
  std::vector<double> c;
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  std::vector<RowSense> sense;

  int add_row(std::vector<double> row, RowSense s, double rhs) {
    A.push_back(std::move(row));
    sense.push_back(s);
    b.push_back(rhs);
    return static_cast<int>(b.size()) - 1;
  }
};

struct LpSolution {
  std::vector<double> x;
  // Shadow prices: the rate of change of the optimum in each right-hand side.
  std::vector<double> y;
  double objective = 0.0;
  int iterations = 0;
};

// Two-phase primal simplex on a dense tableau with Bland's rule. Throws
// Infeasible, Unbounded or SolverStall.
LpSolution solve_lp(const LinearProgram& lp, int max_iterations = 100000);

struct LpCertificate {
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  double duality_gap = 0.0;
};

LpCertificate certify(const LinearProgram& lp, const LpSolution& sol);

}  // namespace mbp
