#include "mrr/lm.hpp"

#include <cmath>

#include "mrr/error.hpp"

namespace mrr::fit {

namespace {

struct Linearisation {
  Eigen::MatrixXd jtj;
  Eigen::VectorXd jtr;
  double chi2 = 0.0;
};

Linearisation linearise(const Model& m, std::span<const double> x, std::span<const double> y,
                        std::span<const double> sigma, const Eigen::VectorXd& p) {
  const auto k = static_cast<Eigen::Index>(m.parameter_count);
  Linearisation out{Eigen::MatrixXd::Zero(k, k), Eigen::VectorXd::Zero(k), 0.0};
  Eigen::VectorXd g(k);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = m.eval(x[i], p, g);
    const double w = 1.0 / (sigma[i] * sigma[i]);
    const double r = y[i] - f;
    out.chi2 += w * r * r;
    out.jtj.noalias() += w * g * g.transpose();
    out.jtr.noalias() += w * r * g;
  }
  return out;
}

double chi_square(const Model& m, std::span<const double> x, std::span<const double> y,
                  std::span<const double> sigma, const Eigen::VectorXd& p) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(m.parameter_count));
  double c = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - m.eval(x[i], p, g)) / sigma[i];
    c += r * r;
  }
  return c;
}

}  // namespace

LmResult levenberg_marquardt(const Model& model, std::span<const double> x,
                             std::span<const double> y, std::span<const double> sigma,
                             Eigen::VectorXd start, const LmOptions& options) {
  if (x.size() != y.size() || x.size() != sigma.size())
    fail(ErrorKind::Numeric, "fit data arrays differ in length");
  if (static_cast<std::size_t>(start.size()) != model.parameter_count)
    fail(ErrorKind::Numeric, "start vector does not match the model parameter count");
  if (x.size() < model.parameter_count)
    fail(ErrorKind::Numeric, "fewer data points than fit parameters");

  LmResult res;
  res.parameters = std::move(start);
  double lambda = 1e-3;
  auto lin = linearise(model, x, y, sigma, res.parameters);
  const auto k = res.parameters.size();

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    Eigen::MatrixXd a = lin.jtj;
    for (Eigen::Index i = 0; i < k; ++i) a(i, i) += lambda * std::max(lin.jtj(i, i), 1e-300);
    const Eigen::VectorXd step = a.ldlt().solve(lin.jtr);
    if (!step.allFinite()) {
      lambda *= 10;
      if (lambda > 1e20) break;
      continue;
    }
    const Eigen::VectorXd trial = res.parameters + step;
    const double c = chi_square(model, x, y, sigma, trial);
    if (std::isfinite(c) && c <= lin.chi2) {
      bool small = true;
      for (Eigen::Index i = 0; i < k; ++i)
        small = small && std::abs(step(i)) <=
                             options.relative_tolerance * std::max(std::abs(trial(i)), 1e-12);
      res.parameters = trial;
      lin = linearise(model, x, y, sigma, res.parameters);
      lambda = std::max(lambda / 10, 1e-12);
      if (small) {
        res.converged = true;
        break;
      }
    } else {
      lambda *= 10;
      // Damping has swallowed the step: we are at a minimum to working precision.
      if (lambda > 1e16) {
        res.converged = true;
        break;
      }
    }
  }

  res.chi_square = lin.chi2;
  res.dof = static_cast<int>(x.size()) - static_cast<int>(k);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(lin.jtj);
  res.covariance = cod.pseudoInverse();
  return res;
}

}  // namespace mrr::fit
