#include "mrr/thermal.hpp"

#include "mrr/error.hpp"

namespace mrr::thermal {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

std::vector<double> schmidt_mode_weights(double n) {
  if (!(n >= 1.0)) fail(ErrorKind::Config, "schmidt_modes must be >= 1");
  const double m = std::ceil(n - 1e-12);
  const auto count = static_cast<std::size_t>(m);
  std::vector<double> w(count, 1.0);
  if (count > 1) {
    // Solve (k + r^2) / (k + r)^2 = 1/n for the fractional mode r in (0, 1].
    const double k = m - 1;
    const double disc = k * k - (n - 1) * k * (n - k);
    const double r = (k - std::sqrt(std::max(0.0, disc))) / (n - 1);
    w.back() = std::min(1.0, std::max(r, 0.0));
  }
  double sum = 0;
  for (double x : w) sum += x;
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace mrr::thermal
