#pragma once

#include <functional>
#include <span>

#include <Eigen/Dense>

namespace mrr::fit {

/// Scalar model y = f(x; p). `eval` returns f and writes df/dp into `grad`
/// (sized to the parameter count).
struct Model {
  std::size_t parameter_count = 0;
  std::function<double(double x, const Eigen::VectorXd& p, Eigen::Ref<Eigen::VectorXd> grad)>
      eval;
};

struct LmOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-9;
};

struct LmResult {
  Eigen::VectorXd parameters;
  /// (J^T W J)^+ at the solution, not rescaled by chi^2.
  Eigen::MatrixXd covariance;
  double chi_square = 0.0;
  int dof = 0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Gauss-Newton (Marquardt scaling) on sum(((y - f) / sigma)^2).
/// Converges when every parameter moves by less than relative_tolerance
/// (relative to max(|p|, 1e-12)).
LmResult levenberg_marquardt(const Model& model, std::span<const double> x,
                             std::span<const double> y, std::span<const double> sigma,
                             Eigen::VectorXd start, const LmOptions& options = {});

}  // namespace mrr::fit
