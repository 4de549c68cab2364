#pragma once

#include <cstdint>
#include <string>

#include "mrr/tagstream.hpp"

namespace mrr::io {

inline constexpr char kTagMagic[8] = {'M', 'R', 'R', 'T', 'A', 'G', 'S', '1'};
inline constexpr std::uint16_t kTagVersion = 1;
inline constexpr std::size_t kHeaderBytes = 23;
inline constexpr std::size_t kRecordBytes = 9;

/// MRRTAGS1: 23-byte little-endian header (magic, u16 version, u32
/// resolution_ps, u8 channel_count, u64 record_count) then 9-byte records
/// (u64 ticks, u8 channel). Written atomically.
void write_tags(const std::string& path, const TagStream& s);

/// Throws Error(Io) on bad magic, version or truncated body. Unsorted
/// timestamps warn on stderr and are sorted when `sort` is set, otherwise
/// throw Error(Statistics).
TagStream read_tags(const std::string& path, bool sort = false);

/// Headered CSV "timestamp_ps,channel". Timestamps are ticks * resolution.
void write_tags_csv(const std::string& path, const TagStream& s);

/// Timestamps are quantised (floor) to `resolution_ps`; channel_count is
/// max(2, largest channel + 1).
TagStream read_tags_csv(const std::string& path, std::uint32_t resolution_ps = 1,
                        bool sort = false);

/// Ingestion seam for external dumps. Known formats: "mrrtags", "csv".
/// Vendor TDC formats are not implemented and raise Error(Io).
TagStream import_tags(const std::string& path, const std::string& format,
                      std::uint32_t resolution_ps = 1, bool sort = false);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace mrr::io
