#pragma once

// Limited-memory BFGS with Armijo backtracking, shared by the two extraction
// objectives. Internal to the library.

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace spfa::detail {

struct LbfgsOptions {
  double objective_tolerance = 1e-9;
  double gradient_tolerance = 1e-6;
  int max_iterations = 2000;
  int memory = 10;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

// Returns f(x) and writes the gradient. May return +inf for points outside the
// domain; the line search then backtracks.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Maps an accepted iterate onto an equivalent representative without changing
// f (gauge fixing). May be empty.
using Renormalize = std::function<void(Eigen::VectorXd&)>;

inline LbfgsResult lbfgs_minimize(const Objective& fg, Eigen::VectorXd x, const LbfgsOptions& opt,
                                  const Renormalize& renormalize = {}) {
  using Eigen::VectorXd;
  LbfgsResult res;
  VectorXd g(x.size());
  double f = fg(x, g);
  res.trace.push_back(f);

  std::deque<VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  auto grad_small = [&](const VectorXd& gr) {
    return gr.size() == 0 || gr.cwiseAbs().maxCoeff() < opt.gradient_tolerance;
  };

  if (grad_small(g)) {
    res.converged = true;
    res.x = std::move(x);
    res.f = f;
    return res;
  }

  VectorXd g_new(x.size());
  for (int it = 1; it <= opt.max_iterations; ++it) {
    res.iterations = it;

    // Two-loop recursion.
    VectorXd d = -g;
    std::vector<double> alpha(s_hist.size());
    for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(d);
      d -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      d *= gamma;
    } else {
      d /= std::max(1.0, g.norm());
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(d);
      d += (alpha[k] - beta) * s_hist[k];
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g / std::max(1.0, g.norm());
      slope = g.dot(d);
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * d;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No further decrease representable; converged only if already flat.
      res.converged = grad_small(g);
      break;
    }
    if (renormalize) {
      renormalize(x_new);
      f_new = fg(x_new, g_new);
    }

    VectorXd s = x_new - x;
    VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double change = std::abs(f - f_new);
    x = std::move(x_new);
    g = g_new;
    f = f_new;
    res.trace.push_back(f);
    if (change < opt.objective_tolerance && grad_small(g)) {
      res.converged = true;
      break;
    }
  }
  res.x = std::move(x);
  res.f = f;
  return res;
}

}  // namespace spfa::detail
