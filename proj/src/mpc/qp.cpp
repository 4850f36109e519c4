#include "towerfleet/mpc/qp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace towerfleet::mpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Working state of the dual method: J = L^-T Q, active-constraint factor R (upper triangular).
class Solver {
 public:
  Solver(const QuadraticProgram& qp) : qp_(qp), n_(static_cast<int>(qp.g.size())) {
    me_ = static_cast<int>(qp.Aeq.cols());
    mi_ = static_cast<int>(qp.Ain.cols());
    R_ = Eigen::MatrixXd::Zero(n_, n_);
    u_ = Eigen::VectorXd::Zero(n_ + 1);
    active_.assign(n_ + 1, -1);
    in_active_.assign(mi_, false);
  }

  QpResult run(int max_iterations) {
    QpResult out;
    Eigen::LLT<Eigen::MatrixXd> llt(qp_.G);
    if (llt.info() != Eigen::Success) {
      out.status = QpStatus::NotConvex;
      return out;
    }
    const Eigen::MatrixXd L = llt.matrixL();
    J_ = L.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(n_, n_));
    tolerance_ = 1e-11 * (1.0 + (mi_ ? qp_.bin.cwiseAbs().maxCoeff() : 0.0));

    x_ = -llt.solve(qp_.g);
    f_ = 0.5 * qp_.g.dot(x_);

    for (int i = 0; i < me_; ++i) {
      const Eigen::VectorXd np = qp_.Aeq.col(i);
      direction(np);
      double t2 = 0.0;
      if (z_.norm() > kEps) t2 = -(np.dot(x_) + qp_.beq(i)) / z_.dot(np);
      x_ += t2 * z_;
      u_(q_) = t2;
      for (int k = 0; k < q_; ++k) u_(k) -= t2 * r_(k);
      f_ += 0.5 * t2 * t2 * z_.dot(np);
      active_[q_] = -i - 1;
      if (!add()) {
        out.status = QpStatus::Infeasible;
        return finish(out);
      }
    }

    int iterations = 0;
    while (true) {
      // Step 1: most violated inactive inequality.
      int ip = -1;
      double worst = 0.0;
      for (int i = 0; i < mi_; ++i) {
        if (in_active_[i]) continue;
        const double s = qp_.Ain.col(i).dot(x_) + qp_.bin(i);
        if (s < worst) {
          worst = s;
          ip = i;
        }
      }
      if (ip < 0 || worst >= -tolerance_) {
        out.status = QpStatus::Optimal;
        out.iterations = iterations;
        return finish(out);
      }
      const Eigen::VectorXd np = qp_.Ain.col(ip);
      double s_ip = worst;
      u_(q_) = 0.0;
      active_[q_] = ip;

      // Step 2: move until the constraint is satisfied or another one has to go.
      while (true) {
        if (++iterations > max_iterations) {
          out.status = QpStatus::IterationLimit;
          out.iterations = iterations;
          return finish(out);
        }
        direction(np);
        double t1 = kInf;
        int drop = -1;
        for (int k = me_; k < q_; ++k) {
          if (r_(k) > 0.0 && u_(k) / r_(k) < t1) {
            t1 = u_(k) / r_(k);
            drop = k;
          }
        }
        const double znp = z_.dot(np);
        const double t2 = z_.norm() > kEps && znp > 0.0 ? -s_ip / znp : kInf;
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          out.status = QpStatus::Infeasible;
          out.iterations = iterations;
          return finish(out);
        }
        if (!std::isfinite(t2)) {
          for (int k = 0; k < q_; ++k) u_(k) -= t * r_(k);
          u_(q_) += t;
          remove(drop);
          continue;
        }
        x_ += t * z_;
        f_ += t * znp * (0.5 * t + u_(q_));
        for (int k = 0; k < q_; ++k) u_(k) -= t * r_(k);
        u_(q_) += t;
        if (t == t2) {
          if (!add()) {
            out.status = QpStatus::Infeasible;
            out.iterations = iterations;
            return finish(out);
          }
          in_active_[ip] = true;
          break;
        }
        remove(drop);
        s_ip = np.dot(x_) + qp_.bin(ip);
      }
    }
  }

 private:
  /// Primal direction z and dual direction r for adding constraint normal np.
  void direction(const Eigen::VectorXd& np) {
    d_ = J_.transpose() * np;
    z_ = J_.rightCols(n_ - q_) * d_.tail(n_ - q_);
    r_ = Eigen::VectorXd::Zero(q_);
    for (int i = q_ - 1; i >= 0; --i) {
      double acc = d_(i);
      for (int j = i + 1; j < q_; ++j) acc -= R_(i, j) * r_(j);
      r_(i) = acc / R_(i, i);
    }
  }

  /// Appends the constraint whose transformed normal is d_; false when it is linearly dependent.
  bool add() {
    for (int j = n_ - 1; j >= q_ + 1; --j) {
      double cc = d_(j - 1), ss = d_(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d_(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d_(j - 1) = -h;
      } else {
        d_(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1), t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++q_;
    for (int i = 0; i < q_; ++i) R_(i, q_ - 1) = d_(i);
    if (std::abs(d_(q_ - 1)) <= kEps * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d_(q_ - 1)));
    return true;
  }

  /// Drops the active constraint at position pos (>= me_) and restores R to triangular form.
  void remove(int pos) {
    in_active_[active_[pos]] = false;
    for (int i = pos; i < q_ - 1; ++i) {
      active_[i] = active_[i + 1];
      u_(i) = u_(i + 1);
      R_.col(i) = R_.col(i + 1);
    }
    active_[q_ - 1] = active_[q_];
    u_(q_ - 1) = u_(q_);
    active_[q_] = -1;
    u_(q_) = 0.0;
    for (int j = 0; j < q_; ++j) R_(j, q_ - 1) = 0.0;
    --q_;
    if (q_ == 0) return;
    for (int j = pos; j < q_; ++j) {
      double cc = R_(j, j), ss = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < q_; ++k) {
        const double t1 = R_(j, k), t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j), t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

  QpResult& finish(QpResult& out) {
    out.x = x_;
    out.objective = 0.5 * x_.dot(qp_.G * x_) + qp_.g.dot(x_);
    out.multipliers = Eigen::VectorXd::Zero(me_ + mi_);
    for (int k = 0; k < q_; ++k) {
      const int id = active_[k];
      if (id < 0) {
        out.multipliers(-id - 1) = u_(k);
      } else {
        out.multipliers(me_ + id) = u_(k);
        out.active.push_back(id);
      }
    }
    return out;
  }

  const QuadraticProgram& qp_;
  int n_;
  int me_ = 0;
  int mi_ = 0;
  int q_ = 0;  // active constraints
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
  Eigen::VectorXd x_;
  Eigen::VectorXd u_;
  Eigen::VectorXd d_;
  Eigen::VectorXd z_;
  Eigen::VectorXd r_;
  std::vector<int> active_;  // equality i stored as -i-1, inequality as its column
  std::vector<bool> in_active_;
  double f_ = 0.0;
  double tolerance_ = 0.0;
  double r_norm_ = 1.0;
};

}  // namespace

QpResult solve_qp(const QuadraticProgram& qp, int max_iterations) {
  const auto n = qp.g.size();
  if (qp.G.rows() != n || qp.G.cols() != n || qp.Aeq.rows() != (qp.Aeq.cols() ? n : qp.Aeq.rows()) ||
      qp.Ain.rows() != (qp.Ain.cols() ? n : qp.Ain.rows()) || qp.beq.size() != qp.Aeq.cols() ||
      qp.bin.size() != qp.Ain.cols()) {
    throw std::invalid_argument("solve_qp: inconsistent dimensions");
  }
  return Solver(qp).run(max_iterations);
}

}  // namespace towerfleet::mpc
