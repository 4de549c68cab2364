#include "mrr/tagio.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "mrr/error.hpp"

namespace mrr::io {

namespace {

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void finish_read(TagStream& s, const std::string& path, bool sort) {
  if (s.is_sorted()) return;
  std::cerr << "warning: " << path << ": timestamps are not monotonic\n";
  if (!sort)
    fail(ErrorKind::Statistics, path + ": timestamps are not monotonic (use --sort)");
  s.sort();
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(ErrorKind::Io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorKind::Io, "cannot rename onto '" + path + "': " + ec.message());
  }
}

void write_tags(const std::string& path, const TagStream& s) {
  std::string out;
  out.reserve(kHeaderBytes + kRecordBytes * s.size());
  out.append(kTagMagic, sizeof kTagMagic);
  put_le<std::uint16_t>(out, kTagVersion);
  put_le<std::uint32_t>(out, s.resolution_ps);
  put_le<std::uint8_t>(out, s.channel_count);
  put_le<std::uint64_t>(out, s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.ticks[i] < 0) fail(ErrorKind::Io, "negative timestamp cannot be stored");
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(s.ticks[i]));
    put_le<std::uint8_t>(out, s.channels[i]);
  }
  write_file_atomic(path, out);
}

TagStream read_tags(const std::string& path, bool sort) {
  const std::string raw = slurp(path);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < kHeaderBytes) fail(ErrorKind::Io, path + ": truncated header");
  if (std::memcmp(p, kTagMagic, sizeof kTagMagic) != 0)
    fail(ErrorKind::Io, path + ": bad magic (not an MRRTAGS1 file)");
  const auto version = get_le<std::uint16_t>(p + 8);
  if (version != kTagVersion)
    fail(ErrorKind::Io, path + ": unsupported version " + std::to_string(version));
  TagStream s;
  s.resolution_ps = get_le<std::uint32_t>(p + 10);
  s.channel_count = get_le<std::uint8_t>(p + 14);
  const auto n = get_le<std::uint64_t>(p + 15);
  if (s.resolution_ps == 0) fail(ErrorKind::Io, path + ": zero resolution");
  const std::size_t body = raw.size() - kHeaderBytes;
  if (n > body / kRecordBytes || body != n * kRecordBytes)
    fail(ErrorKind::Io, path + ": body holds " + std::to_string(body) + " bytes, header claims " +
                            std::to_string(n) + " records");
  s.ticks.resize(n);
  s.channels.resize(n);
  const unsigned char* r = p + kHeaderBytes;
  for (std::uint64_t i = 0; i < n; ++i, r += kRecordBytes) {
    const auto t = get_le<std::uint64_t>(r);
    if (t > static_cast<std::uint64_t>(INT64_MAX)) fail(ErrorKind::Io, path + ": timestamp overflow");
    s.ticks[i] = static_cast<std::int64_t>(t);
    s.channels[i] = r[8];
    if (s.channels[i] >= s.channel_count)
      fail(ErrorKind::Io, path + ": record " + std::to_string(i) + " has channel " +
                              std::to_string(s.channels[i]) + " >= channel_count");
  }
  s.origin.mode = "import";
  finish_read(s, path, sort);
  return s;
}

void write_tags_csv(const std::string& path, const TagStream& s) {
  std::string out = "timestamp_ps,channel\n";
  out.reserve(out.size() + s.size() * 16);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += std::to_string(s.ticks[i] * static_cast<std::int64_t>(s.resolution_ps));
    out += ',';
    out += std::to_string(s.channels[i]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

TagStream read_tags_csv(const std::string& path, std::uint32_t resolution_ps, bool sort) {
  if (resolution_ps == 0) fail(ErrorKind::Io, "resolution must be > 0");
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Io, path + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "timestamp_ps,channel")
    fail(ErrorKind::Io, path + ": expected header 'timestamp_ps,channel'");
  TagStream s;
  s.resolution_ps = resolution_ps;
  const auto res = static_cast<std::int64_t>(resolution_ps);
  int max_ch = 1;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    std::int64_t ps = 0;
    int ch = -1;
    const char* b = line.data();
    const char* e = b + line.size();
    bool ok = comma != std::string::npos;
    if (ok) {
      auto r1 = std::from_chars(b, b + comma, ps);
      auto r2 = std::from_chars(b + comma + 1, e, ch);
      ok = r1.ec == std::errc{} && r1.ptr == b + comma && r2.ec == std::errc{} && r2.ptr == e &&
           ps >= 0 && ch >= 0 && ch < 256;
    }
    if (!ok) fail(ErrorKind::Io, path + ":" + std::to_string(row) + ": malformed row");
    s.ticks.push_back(ps / res);
    s.channels.push_back(static_cast<std::uint8_t>(ch));
    max_ch = std::max(max_ch, ch);
  }
  s.channel_count = static_cast<std::uint8_t>(std::min(255, max_ch + 1));
  s.origin.mode = "import";
  finish_read(s, path, sort);
  return s;
}

TagStream import_tags(const std::string& path, const std::string& format,
                      std::uint32_t resolution_ps, bool sort) {
  if (format == "mrrtags") return read_tags(path, sort);
  if (format == "csv") return read_tags_csv(path, resolution_ps, sort);
  fail(ErrorKind::Io, "unsupported tag format '" + format +
                          "' (convert vendor dumps to CSV timestamp_ps,channel first)");
}

}  // namespace mrr::io
