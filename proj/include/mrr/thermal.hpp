#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace mrr::thermal {

using Rng = boost::random::mt19937_64;

/// Derives an independent generator seed from a run seed and a substream
/// label (splitmix64 finaliser over both words).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Relative weights of the spectral modes that make up the emission
/// intensity, normalised to sum 1, such that 1 + sum(w^2) = 1 + 1/n.
/// ceil(n) modes: all unit weight except one smaller mode that carries the
/// fractional part. n >= 1.
std::vector<double> schmidt_mode_weights(double schmidt_number);

/// Doubly stochastic Poisson event clock. The intensity is
/// I(t) = sum_k w_k |z_k(t)|^2 with each z_k an independent stationary complex
/// Ornstein-Uhlenbeck field of correlation time tau, so E[I] = 1 and the
/// zero-delay intensity correlation is 1 + 1/n.
///
/// Sampling is exact thinning against a bound on I, but the field is only
/// materialised near accepted events: once more than kFarCoherenceTimes * tau
/// has passed since the last observation, the field is independent of the
/// past, acceptance is Bernoulli(1/B) and the field at an accepted point is
/// drawn from its size-biased law.
class PairClock {
 public:
  static constexpr double kBound = 20.0;
  static constexpr double kFarCoherenceTimes = 20.0;

  /// rate in events per ps; `schmidt_number` of infinity gives a plain
  /// Poisson process.
  PairClock(double rate_per_ps, double schmidt_number, double coherence_ps, double t_start_ps)
      : rate_(rate_per_ps),
        tau_(coherence_ps),
        t_(t_start_ps),
        far_after_(kFarCoherenceTimes * coherence_ps) {
    if (std::isfinite(schmidt_number) && schmidt_number < kPoissonAbove) {
      weights_ = schmidt_mode_weights(schmidt_number);
      field_.resize(weights_.size());
      cumulative_.resize(weights_.size());
      double c = 0;
      for (std::size_t k = 0; k < weights_.size(); ++k) cumulative_[k] = (c += weights_[k]);
    }
  }

  double now() const { return t_; }

  template <class G>
  double next(G& rng) {
    if (rate_ <= 0) return t_ = std::numeric_limits<double>::infinity();
    if (weights_.empty()) return t_ += exp_(rng) / rate_;
    for (;;) {
      if (t_ >= t_obs_ + far_after_) {
        t_ += exp_(rng) / rate_;
        draw_size_biased(rng);
        t_obs_ = t_;
        return t_;
      }
      const double cand = t_ + exp_(rng) / (rate_ * kBound);
      if (cand > t_obs_ + far_after_) {
        t_ = t_obs_ + far_after_;
        continue;
      }
      t_ = cand;
      propagate(rng, t_ - t_obs_);
      t_obs_ = t_;
      if (uni_(rng) * kBound < intensity()) return t_;
    }
  }

  double intensity() const {
    double s = 0;
    for (std::size_t k = 0; k < field_.size(); ++k) s += weights_[k] * std::norm(field_[k]);
    return s;
  }

 private:
  static constexpr double kPoissonAbove = 1000.0;

  template <class G>
  std::complex<double> complex_normal(G& rng) {
    return {norm_(rng) * std::numbers::sqrt2 / 2, norm_(rng) * std::numbers::sqrt2 / 2};
  }

  template <class G>
  void propagate(G& rng, double dt) {
    const double rho = std::exp(-dt / tau_);
    const double kick = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (auto& z : field_) z = rho * z + kick * complex_normal(rng);
  }

  template <class G>
  void draw_size_biased(G& rng) {
    const double u = uni_(rng);
    std::size_t chosen = 0;
    while (chosen + 1 < cumulative_.size() && u >= cumulative_[chosen]) ++chosen;
    for (std::size_t k = 0; k < field_.size(); ++k) {
      if (k == chosen) {
        const double r2 = exp_(rng) + exp_(rng);  // Gamma(2, 1)
        const double phase = 2 * std::numbers::pi * uni_(rng);
        field_[k] = std::polar(std::sqrt(r2), phase);
      } else {
        field_[k] = complex_normal(rng);
      }
    }
  }

  double rate_;
  double tau_;
  double t_;
  double t_obs_ = -std::numeric_limits<double>::infinity();
  double far_after_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::vector<std::complex<double>> field_;
  boost::random::exponential_distribution<double> exp_{1.0};
  boost::random::normal_distribution<double> norm_{0.0, 1.0};
  boost::random::uniform_01<double> uni_;
};

}  // namespace mrr::thermal
