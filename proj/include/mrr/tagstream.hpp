#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mrr {

/// Where a stream came from. Carried into file headers of CSV/JSON outputs.
struct StreamOrigin {
  std::string mode;         // "cw", "timebin", "import", ...
  std::uint64_t seed = 0;
  std::string config_hash;  // empty when not produced from a config
};

/// Time-ordered detection records. Timestamps are integer ticks of
/// `resolution_ps`; channel ids are < channel_count.
struct TagStream {
  std::vector<std::int64_t> ticks;
  std::vector<std::uint8_t> channels;
  std::uint32_t resolution_ps = 81;
  std::uint8_t channel_count = 2;
  StreamOrigin origin;

  std::size_t size() const { return ticks.size(); }
  bool empty() const { return ticks.empty(); }

  bool is_sorted() const;
  /// Throws Error(Statistics) for unsorted data, Error(Io) for bad channels.
  void validate() const;
  /// Stable sort by timestamp (channel order preserved within equal ticks).
  void sort();

  /// Timestamps (in ps) of one channel, in stream order.
  std::vector<std::int64_t> channel_ps(std::uint8_t ch) const;
  std::size_t count(std::uint8_t ch) const;
  /// Span covered by the records in seconds (last - first tick).
  double span_s() const;

  friend bool operator==(const TagStream& a, const TagStream& b) {
    return a.ticks == b.ticks && a.channels == b.channels &&
           a.resolution_ps == b.resolution_ps && a.channel_count == b.channel_count;
  }
};

/// Merges per-channel sorted ps timestamps into one stream, quantising to
/// `resolution_ps` with floor. Equal ticks are ordered by channel id.
TagStream merge_channels(const std::vector<std::vector<std::int64_t>>& per_channel_ps,
                         std::uint32_t resolution_ps);

}  // namespace mrr
