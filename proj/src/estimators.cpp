#include "mrr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include <boost/math/special_functions/erf.hpp>

#include "mrr/emitter.hpp"
#include "mrr/error.hpp"
#include "mrr/lm.hpp"

namespace mrr::est {

const Parameter& FitResult::at(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  fail(ErrorKind::Numeric, "fit result has no parameter '" + name + "'");
}

bool FitResult::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

namespace {

double poisson_sigma(double counts) { return std::sqrt(std::max(counts, 1.0)); }

double rate_sigma(const RatePoint& p, Weighting w) {
  if (w == Weighting::Uniform) return 1.0;
  return poisson_sigma(p.rate * p.exposure_s) / p.exposure_s;
}

std::vector<double> parameter_errors(const Eigen::MatrixXd& cov, double scale) {
  std::vector<double> e(static_cast<std::size_t>(cov.rows()));
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    e[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, cov(i, i) * scale));
  return e;
}

double uniform_scale(double chi2, int dof) { return dof > 0 ? chi2 / dof : 0.0; }

}  // namespace

// ---------------------------------------------------------------- power law

FitResult fit_power_law(std::span<const RatePoint> points, Weighting weighting) {
  if (points.size() < 3) fail(ErrorKind::Numeric, "power-law fit needs at least 3 points");
  for (const auto& p : points)
    if (!(p.power_mw > 0)) fail(ErrorKind::Numeric, "power-law fit needs powers > 0");

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    const double s = rate_sigma(p, weighting);
    x(i, 0) = p.power_mw / s;
    x(i, 1) = p.power_mw * p.power_mw / s;
    y(i) = p.rate / s;
  }

  FitResult r;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2)
    fail(ErrorKind::Numeric, "power-law design is rank deficient (powers not distinct)");
  Eigen::Vector2d beta = qr.solve(y);
  Eigen::Matrix2d cov = (x.transpose() * x).inverse();

  auto refit_single = [&](int keep) {
    const Eigen::VectorXd col = x.col(keep);
    const double norm2 = col.squaredNorm();
    beta.setZero();
    beta(keep) = std::max(0.0, col.dot(y) / norm2);
    cov.setZero();
    cov(keep, keep) = 1.0 / norm2;
  };
  if (beta(0) < 0 && beta(1) < 0) {
    beta.setZero();
    r.flags = {"a_clipped", "b_clipped"};
  } else if (beta(0) < 0) {
    refit_single(1);
    r.flags.push_back("a_clipped");
  } else if (beta(1) < 0) {
    refit_single(0);
    r.flags.push_back("b_clipped");
  }

  const double chi2 = (y - x * beta).squaredNorm();
  const int dof = static_cast<int>(n) - 2;
  const double scale = weighting == Weighting::Uniform ? uniform_scale(chi2, dof) : 1.0;
  const auto err = parameter_errors(cov, scale);
  r.parameters = {{"a", beta(0), err[0]}, {"b", beta(1), err[1]}};
  r.reduced_chi_square = dof > 0 ? chi2 / dof : 0.0;
  r.covariance = cov * scale;
  return r;
}

FitResult fit_quadratic(std::span<const RatePoint> points, Weighting weighting) {
  if (points.empty()) fail(ErrorKind::Numeric, "quadratic fit needs at least one point");
  double sxx = 0, sxy = 0;
  for (const auto& p : points) {
    const double s = rate_sigma(p, weighting);
    const double x = p.power_mw * p.power_mw / s;
    sxx += x * x;
    sxy += x * p.rate / s;
  }
  if (!(sxx > 0)) fail(ErrorKind::Numeric, "quadratic fit needs a nonzero power");
  const double c = sxy / sxx;
  double chi2 = 0;
  for (const auto& p : points) {
    const double s = rate_sigma(p, weighting);
    const double r = (p.rate - c * p.power_mw * p.power_mw) / s;
    chi2 += r * r;
  }
  const int dof = static_cast<int>(points.size()) - 1;
  const double scale = weighting == Weighting::Uniform ? uniform_scale(chi2, dof) : 1.0;
  FitResult r;
  r.parameters = {{"c", c, std::sqrt(scale / sxx)}};
  r.reduced_chi_square = dof > 0 ? chi2 / dof : 0.0;
  r.covariance = Eigen::MatrixXd::Constant(1, 1, scale / sxx);
  return r;
}

// ---------------------------------------------------------------- CAR

CarPrediction predict_car(const CarModel& m, double p) {
  if (!(m.window_ps > 0)) fail(ErrorKind::Numeric, "CAR prediction needs a window > 0");
  if (p < 0) fail(ErrorKind::Numeric, "pump power must be >= 0");
  const double pair_s = m.b_signal * p * p, pair_i = m.b_idler * p * p;
  const double raw_s = m.a_signal * p + pair_s + m.dark_signal;
  const double raw_i = m.a_idler * p + pair_i + m.dark_idler;
  const double sat_s = emitter::saturated_rate(raw_s, m.dead_time_ns);
  const double sat_i = emitter::saturated_rate(raw_i, m.dead_time_ns);
  const double f_s = raw_s > 0 ? sat_s / raw_s : 1.0;
  const double f_i = raw_i > 0 ? sat_i / raw_i : 1.0;

  CarPrediction out{};
  out.singles_signal = sat_s;
  out.singles_idler = sat_i;
  const double joint = std::exp(m.pair_coincidence_coefficient * p * p * m.dead_time_ns * 1e-9);
  out.coincidence_rate = m.coincidence_coefficient * p * p * f_s * f_i * joint;
  out.accidental_rate = sat_s * sat_i * m.window_ps * 1e-12;
  const double q = (raw_s > 0 ? pair_s / raw_s : 0.0) * (raw_i > 0 ? pair_i / raw_i : 0.0);
  out.raw_coincidence_rate = out.coincidence_rate + out.accidental_rate * (1 + m.thermal_excess * q);
  if (out.accidental_rate > 0)
    out.car = 1.0 + m.thermal_excess * q + out.coincidence_rate / out.accidental_rate;
  else
    out.car = std::numeric_limits<double>::infinity();
  return out;
}

double thermal_window_overlap(double tau, double window) {
  if (!(tau > 0) || !(window > 0)) fail(ErrorKind::Numeric, "overlap needs tau, window > 0");
  // Excess seen at delay D: integral over u of exp(-2|u|/tau) * L(D - u).
  auto smeared = [tau](double d) {
    const int n = 4000;
    const double lo = -30 * tau, hi = 30 * tau, h = (hi - lo) / n;
    double s = 0;
    for (int i = 0; i <= n; ++i) {
      const double u = lo + i * h;
      const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
      s += w * std::exp(-2 * std::abs(u) / tau) * std::exp(-std::abs(d - u) / tau) / (2 * tau);
    }
    return s * h / 3;
  };
  const int m = 200;
  const double h = window / m;
  double s = 0;
  for (int i = 0; i <= m; ++i) {
    const double w = (i == 0 || i == m) ? 1 : (i % 2 ? 4 : 2);
    s += w * smeared(-window / 2 + i * h);
  }
  return s * h / 3 / window;
}

// ---------------------------------------------------------------- rates

double pair_generation_rate(double s_signal, double s_idler, double coincidences) {
  if (!(coincidences > 0)) fail(ErrorKind::Numeric, "PGR undefined for zero coincidences");
  return s_signal * s_idler / coincidences;
}

ArmTransmission arm_transmission(double s_signal, double s_idler, double coincidences) {
  if (!(s_signal > 0) || !(s_idler > 0))
    fail(ErrorKind::Numeric, "arm transmission needs nonzero singles");
  ArmTransmission t{};
  t.signal = coincidences / s_idler;
  t.idler = coincidences / s_signal;
  t.signal_db = 10 * std::log10(t.signal);
  t.idler_db = 10 * std::log10(t.idler);
  return t;
}

double brightness(double pgr_coefficient, double bandwidth_mhz) {
  if (!(bandwidth_mhz > 0)) fail(ErrorKind::Numeric, "brightness needs bandwidth > 0");
  return pgr_coefficient / bandwidth_mhz;
}

// ---------------------------------------------------------------- peaks

namespace {

struct ShapeValue {
  double h;
  double d_width;
  double d_x;  // derivative with respect to the delay argument
};

double erfcx(double u) {
  if (u < 20) return std::exp(u * u) * boost::math::erfc(u);
  const double u2 = u * u;
  return 1.0 / (u * std::sqrt(std::numbers::pi)) *
         (1 - 1 / (2 * u2) + 3 / (4 * u2 * u2) - 15 / (8 * u2 * u2 * u2));
}

// exp(-|x|/l) convolved with N(0, s^2).
ShapeValue double_exponential(double x, double l, double s) {
  if (s <= 0) {
    const double h = std::exp(-std::abs(x) / l);
    return {h, std::abs(x) / (l * l) * h, (x > 0 ? -h : (x < 0 ? h : 0.0)) / l};
  }
  const double gauss = std::exp(-x * x / (2 * s * s));
  auto term = [&](double a, double u) {
    return u > 0 ? gauss * erfcx(u) : std::exp(a) * boost::math::erfc(u);
  };
  const double base = s * s / (2 * l * l);
  const double em = term(base - x / l, (s / l - x / s) / std::numbers::sqrt2);
  const double ep = term(base + x / l, (s / l + x / s) / std::numbers::sqrt2);
  const double g = std::sqrt(2 / std::numbers::pi) * s / (l * l) * gauss;
  const double s2l3 = s * s / (l * l * l);
  const double dl = 0.5 * (ep * (-s2l3 - x / (l * l)) + em * (-s2l3 + x / (l * l)) + 2 * g);
  return {0.5 * (ep + em), dl, (ep - em) / (2 * l)};
}

struct HermiteRule {
  std::vector<double> nodes, weights;
};

// Gauss-Hermite rule (weight exp(-t^2)) by Golub-Welsch.
const HermiteRule& hermite_rule() {
  static const HermiteRule rule = [] {
    const int n = 48;
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(i / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    HermiteRule r;
    for (int i = 0; i < n; ++i) {
      r.nodes.push_back(es.eigenvalues()(i));
      const double v = es.eigenvectors()(0, i);
      r.weights.push_back(std::sqrt(std::numbers::pi) * v * v);
    }
    return r;
  }();
  return rule;
}

ShapeValue lorentzian(double x, double g, double s) {
  auto bare = [g](double y) {
    const double q = 1.0 / (1.0 + (y / g) * (y / g));
    return ShapeValue{q, 2 * y * y / (g * g * g) * q * q, -2 * y / (g * g) * q * q};
  };
  if (s <= 0) return bare(x);
  const auto& r = hermite_rule();
  ShapeValue acc{0, 0, 0};
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const auto v = bare(x - std::numbers::sqrt2 * s * r.nodes[i]);
    acc.h += r.weights[i] * v.h;
    acc.d_width += r.weights[i] * v.d_width;
    acc.d_x += r.weights[i] * v.d_x;
  }
  const double norm = 1.0 / std::sqrt(std::numbers::pi);
  return {acc.h * norm, acc.d_width * norm, acc.d_x * norm};
}

// Delays at which a bin is evaluated: the representable multiples of the
// timestamp quantum, or Gauss-Legendre points for fine quanta.
std::vector<double> bin_samples(const engine::Histogram& h, std::size_t j) {
  const auto lo = h.bin_lo(j);
  const auto hi = lo + h.bin_width_ps;
  std::vector<double> out;
  const auto tick = static_cast<std::int64_t>(h.tick_ps);
  if (tick > 1 && tick * 4 > h.bin_width_ps) {
    std::int64_t d = (lo >= 0 ? (lo + tick - 1) / tick : -((-lo) / tick)) * tick;
    for (; d < hi; d += tick) out.push_back(static_cast<double>(d));
    return out;
  }
  static constexpr double gl[4] = {-0.8611363115940526, -0.3399810435848563,
                                   0.3399810435848563, 0.8611363115940526};
  const double mid = 0.5 * static_cast<double>(lo + hi);
  const double half = 0.5 * static_cast<double>(h.bin_width_ps);
  for (double g : gl) out.push_back(mid + half * g);
  return out;
}

// Gauss-Legendre weights for the 4-point rule; equal weights for lattice points.
std::vector<double> bin_weights(std::size_t n, bool lattice) {
  if (lattice || n != 4) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  return {0.3478548451374538 / 2, 0.6521451548625461 / 2, 0.6521451548625461 / 2,
          0.3478548451374538 / 2};
}

struct PeakData {
  std::vector<double> x;  // bin index
  std::vector<double> y;
  std::vector<double> sigma;
};

class PeakModel {
 public:
  PeakModel(const engine::Histogram& h, const PeakFitOptions& o) : shape_(o.shape) {
    const bool lattice = h.tick_ps > 1 && static_cast<std::int64_t>(h.tick_ps) * 4 > h.bin_width_ps;
    double s2 = o.jitter_sigma_ps * o.jitter_sigma_ps;
    if (h.tick_ps > 1) s2 += static_cast<double>(h.tick_ps) * h.tick_ps / 6.0;
    sigma_ = std::sqrt(s2);
    samples_.resize(h.bins());
    weights_.resize(h.bins());
    for (std::size_t j = 0; j < h.bins(); ++j) {
      samples_[j] = bin_samples(h, j);
      weights_[j] = bin_weights(samples_[j].size(), lattice);
    }
  }

  bool representable(std::size_t j) const { return !samples_[j].empty(); }

  // p = (baseline, amplitude, width, center)
  double eval(std::size_t j, const Eigen::VectorXd& p, Eigen::Ref<Eigen::VectorXd> g) const {
    double h = 0, dw = 0, dx = 0;
    const double width = std::abs(p(2));
    for (std::size_t k = 0; k < samples_[j].size(); ++k) {
      const double x = samples_[j][k] - p(3);
      const auto v = shape_ == PeakShape::DoubleExponential ? double_exponential(x, width, sigma_)
                                                            : lorentzian(x, width, sigma_);
      h += weights_[j][k] * v.h;
      dw += weights_[j][k] * v.d_width;
      dx += weights_[j][k] * v.d_x;
    }
    if (p(2) < 0) dw = -dw;
    g(0) = 1.0;
    g(1) = h;
    g(2) = p(1) * dw;
    g(3) = -p(1) * dx;
    return p(0) + p(1) * h;
  }

 private:
  PeakShape shape_;
  double sigma_;
  std::vector<std::vector<double>> samples_;
  std::vector<std::vector<double>> weights_;
};

}  // namespace

std::vector<double> peak_model(const engine::Histogram& h, const PeakFitOptions& opts,
                               double baseline, double amplitude, double width_ps,
                               double center_ps) {
  PeakModel model(h, opts);
  Eigen::VectorXd p(4);
  p << baseline, amplitude, width_ps, center_ps;
  Eigen::VectorXd g(4);
  std::vector<double> out(h.bins());
  for (std::size_t j = 0; j < h.bins(); ++j)
    out[j] = model.representable(j) ? model.eval(j, p, g) : 0.0;
  return out;
}

FitResult fit_peak(const engine::Histogram& hist, const PeakFitOptions& opts) {
  PeakModel model(hist, opts);
  PeakData d;
  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < hist.bins(); ++j) {
    if (std::abs(hist.bin_center(j)) > opts.fit_half_range_ps || !model.representable(j))
      continue;
    used.push_back(j);
    const auto c = static_cast<double>(hist.counts[j]);
    d.x.push_back(static_cast<double>(j));
    d.y.push_back(c);
    d.sigma.push_back(opts.weighting == Weighting::Poisson ? poisson_sigma(c) : 1.0);
  }
  if (used.size() < 8) fail(ErrorKind::Numeric, "too few histogram bins for a peak fit");

  // Starting point: outer fifth for the baseline, maximum for the peak.
  std::vector<std::pair<double, double>> by_distance;
  for (std::size_t i = 0; i < used.size(); ++i)
    by_distance.emplace_back(std::abs(hist.bin_center(used[i])), d.y[i]);
  std::sort(by_distance.begin(), by_distance.end());
  const std::size_t outer = std::max<std::size_t>(1, by_distance.size() / 5);
  double baseline = 0;
  for (std::size_t i = by_distance.size() - outer; i < by_distance.size(); ++i)
    baseline += by_distance[i].second;
  baseline /= static_cast<double>(outer);
  const auto peak_it = std::max_element(d.y.begin(), d.y.end());
  const auto peak_i = static_cast<std::size_t>(peak_it - d.y.begin());
  double amplitude = *peak_it - baseline;
  double width = opts.width_guess_ps;
  if (width <= 0) {
    std::size_t above = 0;
    for (double y : d.y) above += (y - baseline > amplitude / 2) ? 1 : 0;
    const double fwhm = std::max(1.0, static_cast<double>(above)) *
                        static_cast<double>(hist.bin_width_ps);
    width = opts.shape == PeakShape::DoubleExponential ? fwhm / (2 * std::numbers::ln2)
                                                       : fwhm / 2;
  }
  if (!(amplitude > 0)) amplitude = std::max(1e-6, 1e-3 * std::abs(baseline));

  fit::Model m;
  m.parameter_count = 4;
  m.eval = [&model](double x, const Eigen::VectorXd& p, Eigen::Ref<Eigen::VectorXd> g) {
    return model.eval(static_cast<std::size_t>(x), p, g);
  };
  Eigen::VectorXd start(4);
  start << baseline, amplitude, width, hist.bin_center(used[peak_i]);
  const auto lm = fit::levenberg_marquardt(m, d.x, d.y, d.sigma, start);

  const double scale =
      opts.weighting == Weighting::Uniform ? uniform_scale(lm.chi_square, lm.dof) : 1.0;
  const auto err = parameter_errors(lm.covariance, scale);
  FitResult r;
  r.parameters = {{"baseline", lm.parameters(0), err[0]},
                  {"amplitude", lm.parameters(1), err[1]},
                  {"width_ps", std::abs(lm.parameters(2)), err[2]},
                  {"center_ps", lm.parameters(3), err[3]}};
  r.covariance = lm.covariance * scale;
  r.reduced_chi_square = lm.dof > 0 ? lm.chi_square / lm.dof : 0.0;
  r.converged = lm.converged;
  if (!lm.converged) r.flags.push_back("not_converged");
  return r;
}

FitResult fit_g2(const engine::Histogram& hist, const PeakFitOptions& opts) {
  const FitResult peak = fit_peak(hist, opts);
  const double b = peak.value("baseline"), a = peak.value("amplitude");
  if (!(b > 0)) fail(ErrorKind::Statistics, "g2 fit needs a nonzero background");
  const auto& c = peak.covariance;
  const double g2 = 1.0 + a / b;
  const double var = c(1, 1) / (b * b) + a * a * c(0, 0) / (b * b * b * b) -
                     2 * a * c(0, 1) / (b * b * b);
  const double g2_err = std::sqrt(std::max(0.0, var));

  FitResult r;
  r.covariance = peak.covariance;
  r.reduced_chi_square = peak.reduced_chi_square;
  r.converged = peak.converged;
  r.flags = peak.flags;
  r.parameters = {{"g2_zero", g2, g2_err},
                  peak.at("width_ps"),
                  peak.at("baseline"),
                  peak.at("center_ps")};
  if (g2 > 1.0) {
    const double x = g2 - 1.0;
    r.parameters.push_back({"schmidt_number", 1.0 / x, g2_err / (x * x)});
  } else {
    r.parameters.push_back({"schmidt_number", std::numeric_limits<double>::infinity(), 0.0});
    r.flags.push_back("schmidt_unbounded");
  }
  return r;
}

// ---------------------------------------------------------------- visibility

namespace {

struct Harmonic {
  double c0, v, x0, residual;
};

// Linear fit of y = alpha + beta cos(kx) + gamma sin(kx).
Harmonic harmonic_fit(std::span<const PhasePoint> pts, const std::vector<double>& sigma,
                      double k) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pts[static_cast<std::size_t>(i)];
    const double s = sigma[static_cast<std::size_t>(i)];
    a(i, 0) = 1 / s;
    a(i, 1) = std::cos(k * p.control) / s;
    a(i, 2) = std::sin(k * p.control) / s;
    y(i) = p.counts / s;
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(y);
  const double amp = std::hypot(c(1), c(2));
  return {c(0), c(0) != 0 ? amp / c(0) : 0.0, std::atan2(-c(2), c(1)),
          (y - a * c).squaredNorm()};
}

double wrap_phase(double x) {
  x = std::remainder(x, 2 * std::numbers::pi);
  return x <= -std::numbers::pi ? x + 2 * std::numbers::pi : x;
}

}  // namespace

FitResult fit_visibility(std::span<const PhasePoint> points, double accidental_level,
                         const VisibilityOptions& opts, double accidental_error) {
  if (points.size() < 5) fail(ErrorKind::Numeric, "visibility fit needs at least 5 points");
  {
    std::set<long long> distinct;
    for (const auto& p : points) {
      double x = p.control;
      if (opts.period) x = std::fmod(std::fmod(x, *opts.period) + *opts.period, *opts.period);
      distinct.insert(std::llround(x * 1e9));
    }
    if (distinct.size() < 3)
      fail(ErrorKind::Numeric, "fringe is not identifiable: control values form a single cluster");
  }
  std::vector<double> sigma;
  for (const auto& p : points)
    sigma.push_back(opts.weighting == Weighting::Poisson ? poisson_sigma(p.counts) : 1.0);

  double k;
  Harmonic h{};
  if (opts.period) {
    if (!(*opts.period > 0)) fail(ErrorKind::Numeric, "fringe period must be > 0");
    k = 2 * std::numbers::pi / *opts.period;
    h = harmonic_fit(points, sigma, k);
  } else {
    double lo = points.front().control, hi = lo;
    std::vector<double> xs;
    for (const auto& p : points) {
      lo = std::min(lo, p.control);
      hi = std::max(hi, p.control);
      xs.push_back(p.control);
    }
    std::sort(xs.begin(), xs.end());
    double min_gap = hi - lo;
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (xs[i] > xs[i - 1]) min_gap = std::min(min_gap, xs[i] - xs[i - 1]);
    const double p_min = 2 * min_gap, p_max = 2 * (hi - lo);
    h.residual = std::numeric_limits<double>::infinity();
    k = 2 * std::numbers::pi / p_max;
    for (int i = 0; i <= 600; ++i) {
      const double period = p_min * std::pow(p_max / p_min, i / 600.0);
      const double kk = 2 * std::numbers::pi / period;
      const auto cand = harmonic_fit(points, sigma, kk);
      if (cand.residual < h.residual) {
        h = cand;
        k = kk;
      }
    }
  }

  const bool free_period = !opts.period;
  fit::Model m;
  m.parameter_count = free_period ? 4 : 3;
  m.eval = [k, free_period](double x, const Eigen::VectorXd& p, Eigen::Ref<Eigen::VectorXd> g) {
    const double kk = free_period ? p(3) : k;
    const double th = kk * x + p(2);
    const double c = std::cos(th), s = std::sin(th);
    g(0) = 1 + p(1) * c;
    g(1) = p(0) * c;
    g(2) = -p(0) * p(1) * s;
    if (free_period) g(3) = -p(0) * p(1) * s * x;
    return p(0) * (1 + p(1) * c);
  };
  Eigen::VectorXd start(m.parameter_count);
  start(0) = h.c0;
  start(1) = h.v;
  start(2) = h.x0;
  if (free_period) start(3) = k;
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    xs.push_back(p.control);
    ys.push_back(p.counts);
  }
  const auto lm = fit::levenberg_marquardt(m, xs, ys, sigma, start);
  const double scale =
      opts.weighting == Weighting::Uniform ? uniform_scale(lm.chi_square, lm.dof) : 1.0;
  const Eigen::MatrixXd cov = lm.covariance * scale;

  double c0 = lm.parameters(0), v = lm.parameters(1), x0 = lm.parameters(2);
  if (v < 0) {
    v = -v;
    x0 += std::numbers::pi;
  }
  const double kk = free_period ? lm.parameters(3) : k;
  const double period = 2 * std::numbers::pi / std::abs(kk);

  const double denom = c0 - accidental_level;
  if (!(denom > 0)) fail(ErrorKind::Statistics, "accidental level exceeds the fringe mean");
  const double net = c0 * v / denom;
  const double d_c0 = -v * accidental_level / (denom * denom);
  const double d_v = c0 / denom;
  const double d_acc = c0 * v / (denom * denom);
  const double net_var = d_c0 * d_c0 * cov(0, 0) + d_v * d_v * cov(1, 1) +
                         2 * d_c0 * d_v * cov(0, 1) +
                         d_acc * d_acc * accidental_error * accidental_error;

  FitResult r;
  r.covariance = cov;
  r.reduced_chi_square = lm.dof > 0 ? lm.chi_square / lm.dof : 0.0;
  r.converged = lm.converged;
  if (!lm.converged) r.flags.push_back("not_converged");
  const double period_err =
      free_period ? period * std::sqrt(std::max(0.0, cov(3, 3))) / std::abs(kk) : 0.0;
  r.parameters = {{"raw_visibility", v, std::sqrt(std::max(0.0, cov(1, 1)))},
                  {"net_visibility", net, std::sqrt(std::max(0.0, net_var))},
                  {"phase_offset", wrap_phase(x0), std::sqrt(std::max(0.0, cov(2, 2)))},
                  {"period", period, period_err},
                  {"mean_counts", c0, std::sqrt(std::max(0.0, cov(0, 0)))}};
  return r;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> sigma) {
  if (x.size() < 2 || x.size() != y.size() || x.size() != sigma.size())
    fail(ErrorKind::Numeric, "line fit needs at least 2 matching points");
  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1 / (sigma[i] * sigma[i]);
    s += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = s * sxx - sx * sx;
  if (!(det > 0)) fail(ErrorKind::Numeric, "line fit x values are degenerate");
  return {(sxx * sy - sx * sxy) / det, (s * sxy - sx * sy) / det, std::sqrt(sxx / det),
          std::sqrt(s / det)};
}

}  // namespace mrr::est
