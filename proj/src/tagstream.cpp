#include "mrr/tagstream.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

#include "mrr/error.hpp"

namespace mrr {

bool TagStream::is_sorted() const { return std::is_sorted(ticks.begin(), ticks.end()); }

void TagStream::validate() const {
  if (ticks.size() != channels.size())
    fail(ErrorKind::Io, "tag stream has mismatched timestamp/channel arrays");
  if (resolution_ps == 0) fail(ErrorKind::Io, "tag stream resolution must be > 0");
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i] >= channel_count)
      fail(ErrorKind::Io, "record " + std::to_string(i) + " has channel " +
                              std::to_string(channels[i]) + " outside declared set of " +
                              std::to_string(channel_count));
  if (!is_sorted()) fail(ErrorKind::Statistics, "tag stream timestamps are not sorted");
}

void TagStream::sort() {
  if (is_sorted()) return;
  std::vector<std::size_t> idx(ticks.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return ticks[a] < ticks[b]; });
  std::vector<std::int64_t> t(ticks.size());
  std::vector<std::uint8_t> c(channels.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    t[i] = ticks[idx[i]];
    c[i] = channels[idx[i]];
  }
  ticks = std::move(t);
  channels = std::move(c);
}

std::vector<std::int64_t> TagStream::channel_ps(std::uint8_t ch) const {
  std::vector<std::int64_t> out;
  out.reserve(count(ch));
  const auto res = static_cast<std::int64_t>(resolution_ps);
  for (std::size_t i = 0; i < ticks.size(); ++i)
    if (channels[i] == ch) out.push_back(ticks[i] * res);
  return out;
}

std::size_t TagStream::count(std::uint8_t ch) const {
  return static_cast<std::size_t>(std::count(channels.begin(), channels.end(), ch));
}

double TagStream::span_s() const {
  if (ticks.size() < 2) return 0.0;
  return static_cast<double>(ticks.back() - ticks.front()) * resolution_ps * 1e-12;
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

TagStream merge_channels(const std::vector<std::vector<std::int64_t>>& per_channel_ps,
                         std::uint32_t resolution_ps) {
  if (resolution_ps == 0) fail(ErrorKind::Config, "resolution_ps must be > 0");
  if (per_channel_ps.size() > 255) fail(ErrorKind::Config, "too many channels");
  TagStream out;
  out.resolution_ps = resolution_ps;
  out.channel_count = static_cast<std::uint8_t>(per_channel_ps.size());
  std::size_t total = 0;
  for (const auto& v : per_channel_ps) total += v.size();
  out.ticks.reserve(total);
  out.channels.reserve(total);

  // k-way merge keyed on (tick, channel).
  using Head = std::pair<std::int64_t, std::uint8_t>;
  std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
  std::vector<std::size_t> pos(per_channel_ps.size(), 0);
  const auto res = static_cast<std::int64_t>(resolution_ps);
  for (std::size_t c = 0; c < per_channel_ps.size(); ++c)
    if (!per_channel_ps[c].empty())
      heap.emplace(floor_div(per_channel_ps[c][0], res), static_cast<std::uint8_t>(c));
  while (!heap.empty()) {
    auto [tick, c] = heap.top();
    heap.pop();
    out.ticks.push_back(tick);
    out.channels.push_back(c);
    if (++pos[c] < per_channel_ps[c].size())
      heap.emplace(floor_div(per_channel_ps[c][pos[c]], res), c);
  }
  return out;
}

}  // namespace mrr
