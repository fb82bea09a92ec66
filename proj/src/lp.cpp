#include "mvsens/lp.hpp"

#include "mvsens/error.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace mvsens::lp {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class Tableau {
 public:
  // Rows 0..m-1 are constraints, row m is the pricing row. Column `rhs_`
  // holds right-hand sides; the pricing row's rhs is the objective value.
  Tableau(Index m, Index cols) : t_(MatrixXd::Zero(m + 1, cols + 1)), basis_(m, -1), m_(m), rhs_(cols) {}

  MatrixXd& data() { return t_; }
  std::vector<Index>& basis() { return basis_; }
  Index rows() const { return m_; }
  Index rhs() const { return rhs_; }

  void pivot(Index r, Index e) {
    const double piv = t_(r, e);
    t_.row(r) /= piv;
    VectorXd col = t_.col(e);
    col[r] = 0.0;
    const Eigen::RowVectorXd prow = t_.row(r);
    t_.noalias() -= col * prow;
    t_.col(e).setZero();
    t_(r, e) = 1.0;
    basis_[r] = e;
  }

  // Sets the pricing row to -cost and prices out the current basis.
  void price(const VectorXd& cost) {
    t_.row(m_).setZero();
    t_.row(m_).head(cost.size()) = -cost.transpose();
    for (Index r = 0; r < m_; ++r) {
      const double cb = cost[basis_[r]];
      if (cb != 0.0) t_.row(m_) += cb * t_.row(r);
    }
  }

  // Runs simplex iterations maximizing the priced objective. Columns
  // >= `allowed` never enter.
  Status iterate(Index allowed, const Options& opt, int& iterations) {
    int degenerate = 0;
    for (;;) {
      if (iterations >= opt.max_iterations) return Status::iteration_limit;
      const bool bland = degenerate >= opt.degenerate_switch;
      Index enter = -1;
      double best = -opt.tolerance;
      for (Index j = 0; j < allowed; ++j) {
        const double rc = t_(m_, j);
        if (rc < best) {
          enter = j;
          if (bland) break;
          best = rc;
        }
      }
      if (enter < 0) return Status::optimal;

      Index leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (Index r = 0; r < m_; ++r) {
        const double a = t_(r, enter);
        if (a <= opt.tolerance) continue;
        const double q = std::max(t_(r, rhs_), 0.0) / a;
        if (q < ratio - 1e-14) {
          ratio = q;
          leave = r;
        } else if (q <= ratio + 1e-14 && basis_[r] < basis_[leave]) {
          leave = r;
        }
      }
      if (leave < 0) return Status::unbounded;
      degenerate = ratio <= opt.tolerance ? degenerate + 1 : 0;
      pivot(leave, enter);
      ++iterations;
    }
  }

 private:
  MatrixXd t_;
  std::vector<Index> basis_;
  Index m_;
  Index rhs_;
};

}  // namespace

Solution solve(const LinearProgram& p, const Options& opt) {
  const Index n = p.objective.size();
  const Index m_ub = p.A_ub.rows();
  const Index m_eq = p.A_eq.rows();
  if ((m_ub > 0 && (p.A_ub.cols() != n || p.b_ub.size() != m_ub)) ||
      (m_eq > 0 && (p.A_eq.cols() != n || p.b_eq.size() != m_eq))) {
    fail(ErrorCode::DimensionMismatch, "linear program blocks have inconsistent shapes");
  }
  const Index m = m_ub + m_eq;

  // Rows needing an artificial: ub rows with negative rhs and all eq rows.
  std::vector<Index> art_rows;
  for (Index i = 0; i < m_ub; ++i) {
    if (p.b_ub[i] < 0.0) art_rows.push_back(i);
  }
  for (Index i = 0; i < m_eq; ++i) art_rows.push_back(m_ub + i);
  const Index n_art = static_cast<Index>(art_rows.size());
  const Index slack0 = n;
  const Index art0 = n + m_ub;
  const Index cols = art0 + n_art;

  Tableau tab(m, cols);
  MatrixXd& t = tab.data();
  for (Index i = 0; i < m_ub; ++i) {
    const double sign = p.b_ub[i] < 0.0 ? -1.0 : 1.0;
    t.row(i).head(n) = sign * p.A_ub.row(i);
    t(i, slack0 + i) = sign;
    t(i, tab.rhs()) = sign * p.b_ub[i];
    tab.basis()[i] = slack0 + i;
  }
  for (Index i = 0; i < m_eq; ++i) {
    const double sign = p.b_eq[i] < 0.0 ? -1.0 : 1.0;
    t.row(m_ub + i).head(n) = sign * p.A_eq.row(i);
    t(m_ub + i, tab.rhs()) = sign * p.b_eq[i];
  }
  for (Index k = 0; k < n_art; ++k) {
    t(art_rows[k], art0 + k) = 1.0;
    tab.basis()[art_rows[k]] = art0 + k;
  }

  Solution sol;
  if (n_art > 0) {
    VectorXd cost = VectorXd::Zero(cols);
    cost.tail(n_art).setConstant(-1.0);
    tab.price(cost);
    const Status s = tab.iterate(art0, opt, sol.iterations);
    if (s == Status::iteration_limit) {
      sol.status = s;
      return sol;
    }
    const double scale = 1.0 + t.col(tab.rhs()).head(m).cwiseAbs().maxCoeff();
    if (t(m, tab.rhs()) < -1e-9 * scale) {
      sol.status = Status::infeasible;
      return sol;
    }
    // Drive zero-valued artificials out of the basis where possible.
    for (Index r = 0; r < m; ++r) {
      if (tab.basis()[r] < art0) continue;
      for (Index j = 0; j < art0; ++j) {
        if (std::abs(t(r, j)) > 1e-9) {
          tab.pivot(r, j);
          break;
        }
      }
    }
  }

  VectorXd cost = VectorXd::Zero(cols);
  cost.head(n) = p.objective;
  tab.price(cost);
  sol.status = tab.iterate(art0, opt, sol.iterations);
  if (sol.status != Status::optimal) return sol;

  sol.x = VectorXd::Zero(n);
  for (Index r = 0; r < m; ++r) {
    if (tab.basis()[r] < n) sol.x[tab.basis()[r]] = std::max(t(r, tab.rhs()), 0.0);
  }
  sol.objective = p.objective.dot(sol.x);
  return sol;
}

}  // namespace mvsens::lp
