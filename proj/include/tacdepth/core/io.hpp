#pragma once

// File formats:
//   PGM  binary P5, maxval 1..65535 (16-bit samples big-endian per Netpbm).
//   PFM  single channel "Pf"; a negative scale line means little-endian.
//        Scanlines are stored bottom-to-top as in the reference PFM
//        format; in memory the origin is the top-left pixel. Invalid depth
//        is written as -1.0; on read, NaN/inf and non-positive values all
//        decode as invalid.
//   PLY  ASCII, one "element vertex" with double x, y, z.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "tacdepth/core/image.hpp"
#include "tacdepth/error.hpp"

namespace tacdepth::io {

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(FormatIssue::kOpenFailed, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(FormatIssue::kOpenFailed, path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(FormatIssue::kOpenFailed, path.string());
}

/// Cursor over a Netpbm-style header: whitespace separated tokens with
/// '#' comments running to end of line.
class HeaderCursor {
 public:
  HeaderCursor(const std::vector<unsigned char>& bytes, std::string where)
      : bytes_(bytes), where_(std::move(where)) {}

  std::string token() {
    skip_space_and_comments();
    std::string t;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#')
      t.push_back(static_cast<char>(bytes_[pos_++]));
    if (t.empty()) throw IoError(FormatIssue::kMalformedHeader, where_);
    return t;
  }

  long integer() {
    const std::string t = token();
    long value = 0;
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c)) || value > 1'000'000'000)
        throw IoError(FormatIssue::kMalformedHeader, where_);
      value = value * 10 + (c - '0');
    }
    return value;
  }

  /// Consumes the single whitespace byte separating header from payload.
  void end_of_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw IoError(FormatIssue::kMalformedHeader, where_);
    ++pos_;
  }

  std::size_t position() const { return pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  std::string where_;
  std::size_t pos_ = 0;
};

inline std::string read_line(const std::vector<unsigned char>& bytes, std::size_t& pos,
                             const std::string& where) {
  std::string line;
  while (pos < bytes.size() && bytes[pos] != '\n') line.push_back(static_cast<char>(bytes[pos++]));
  if (pos >= bytes.size()) throw IoError(FormatIssue::kMalformedHeader, where);
  ++pos;
  return line;
}

}  // namespace detail

// ---------------------------------------------------------------- PGM

inline GrayImage read_pgm(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const std::string where = path.string();
  if (bytes.size() < 2 || bytes[0] != 'P' || !std::isdigit(bytes[1]))
    throw IoError(bytes.size() >= 2 && bytes[0] == 'P' ? FormatIssue::kUnsupportedMagic
                                                       : FormatIssue::kMalformedHeader,
                  where);
  if (bytes[1] != '5') throw IoError(FormatIssue::kUnsupportedMagic, where);

  detail::HeaderCursor cur(bytes, where);
  cur.token();  // magic
  const long width = cur.integer();
  const long height = cur.integer();
  const long maxval = cur.integer();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
    throw IoError(FormatIssue::kMalformedHeader, where);
  cur.end_of_header();

  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - cur.position() < n * bps)
    throw IoError(FormatIssue::kTruncatedPayload, where);

  std::vector<double> data(n);
  const unsigned char* p = bytes.data() + cur.position();
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned raw = bps == 2 ? (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1] : p[i];
    if (raw > static_cast<unsigned>(maxval)) throw IoError(FormatIssue::kMalformedHeader, where);
    data[i] = raw * scale;
  }
  return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path,
                      int maxval = 65535) {
  if (maxval <= 0 || maxval > 65535) throw DomainError("write_pgm: maxval must be in 1..65535");
  if (!img.in_range()) throw DomainError("write_pgm: intensities must be finite and in [0,1]");
  std::ostringstream out;
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  std::string bytes = out.str();
  const bool wide = maxval > 255;
  bytes.reserve(bytes.size() + img.size() * (wide ? 2 : 1));
  for (double x : img.data()) {
    const auto q = static_cast<unsigned>(std::lround(x * maxval));
    if (wide) {
      bytes.push_back(static_cast<char>((q >> 8) & 0xFF));
      bytes.push_back(static_cast<char>(q & 0xFF));
    } else {
      bytes.push_back(static_cast<char>(q & 0xFF));
    }
  }
  detail::write_file(path, bytes);
}

/// Writes a 0/255 mask image.
inline void write_mask_pgm(const PixelMask& mask, const std::filesystem::path& path) {
  GrayImage img(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) img[i] = mask.bits[i] ? 1.0 : 0.0;
  write_pgm(img, path, 255);
}

// ---------------------------------------------------------------- PFM

inline constexpr float kInvalidDepthCode = -1.0f;

inline DepthMap read_pfm(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const std::string where = path.string();
  std::size_t pos = 0;
  std::string magic = detail::read_line(bytes, pos, where);
  while (!magic.empty() && std::isspace(static_cast<unsigned char>(magic.back()))) magic.pop_back();
  if (magic != "Pf") {
    throw IoError(magic.size() == 2 && magic[0] == 'P' ? FormatIssue::kUnsupportedMagic
                                                       : FormatIssue::kMalformedHeader,
                  where);
  }
  long width = 0, height = 0;
  {
    std::istringstream dims(detail::read_line(bytes, pos, where));
    std::string extra;
    if (!(dims >> width >> height) || (dims >> extra) || width <= 0 || height <= 0)
      throw IoError(FormatIssue::kMalformedHeader, where);
  }
  double scale = 0.0;
  {
    std::istringstream s(detail::read_line(bytes, pos, where));
    if (!(s >> scale) || scale == 0.0 || !std::isfinite(scale))
      throw IoError(FormatIssue::kMalformedHeader, where);
  }
  const bool little = scale < 0.0;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos != n * 4) throw IoError(FormatIssue::kByteCountMismatch, where);

  const bool host_little = std::endian::native == std::endian::little;
  std::vector<double> depth(n, 0.0);
  std::vector<std::uint8_t> valid(n, 0);
  for (long row = 0; row < height; ++row) {
    const long v = height - 1 - row;  // bottom-to-top scanlines
    for (long u = 0; u < width; ++u) {
      unsigned char b[4];
      std::memcpy(b, bytes.data() + pos + 4 * (static_cast<std::size_t>(row) * width + u), 4);
      if (little != host_little) std::reverse(b, b + 4);
      float f;
      std::memcpy(&f, b, 4);
      const std::size_t i = static_cast<std::size_t>(v) * width + u;
      if (std::isfinite(f) && f > 0.0f) {
        depth[i] = f;
        valid[i] = 1;
      }
    }
  }
  return DepthMap(static_cast<int>(width), static_cast<int>(height), std::move(depth),
                  std::move(valid));
}

namespace detail {

inline void write_pfm_values(const DepthMap& dmap, float invalid_code, const std::filesystem::path& path) {
  std::string bytes = "Pf\n" + std::to_string(dmap.width()) + ' ' +
                      std::to_string(dmap.height()) + "\n-1.0\n";
  const std::size_t header = bytes.size();
  bytes.resize(header + dmap.size() * 4);
  const bool host_little = std::endian::native == std::endian::little;
  for (int row = 0; row < dmap.height(); ++row) {
    const int v = dmap.height() - 1 - row;
    for (int u = 0; u < dmap.width(); ++u) {
      const float f = dmap.valid(u, v) ? static_cast<float>(dmap.depth(u, v)) : invalid_code;
      unsigned char b[4];
      std::memcpy(b, &f, 4);
      if (!host_little) std::reverse(b, b + 4);
      std::memcpy(bytes.data() + header + 4 * (static_cast<std::size_t>(row) * dmap.width() + u), b, 4);
    }
  }
  write_file(path, bytes);
}

}  // namespace detail

inline void write_pfm(const DepthMap& dmap, const std::filesystem::path& path) {
  if (!dmap.well_formed()) throw DomainError("write_pfm: valid pixels must hold positive finite depth");
  detail::write_pfm_values(dmap, kInvalidDepthCode, path);
}

/// Non-negative scalar map (error statistics) as PFM. Pixels without data
/// are written as NaN; zeros are kept, so read_pfm reports them invalid.
inline void write_scalar_pfm(const DepthMap& map, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < map.size(); ++i)
    if (map.valid(i) && !(std::isfinite(map.depth(i)) && map.depth(i) >= 0.0))
      throw DomainError("write_scalar_pfm: values must be finite and non-negative");
  detail::write_pfm_values(map, std::numeric_limits<float>::quiet_NaN(), path);
}

// ---------------------------------------------------------------- PLY

inline void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  if (cloud.empty()) throw IoError(FormatIssue::kEmptyCloud, path.string());
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  out << std::setprecision(17);
  for (const auto& p : cloud) {
    if (!p.allFinite()) throw DomainError("write_ply: non-finite point");
    out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  detail::write_file(path, out.str());
}

/// Reads the ASCII subset written by write_ply: one vertex element whose
/// first three properties are x, y, z.
inline PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(FormatIssue::kOpenFailed, path.string());
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw IoError(FormatIssue::kUnsupportedMagic, path.string());
  long count = -1;
  int props = 0;
  bool ascii = false;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (key == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") throw IoError(FormatIssue::kMalformedHeader, path.string());
    } else if (key == "property") {
      ++props;
    }
  }
  if (line != "end_header" || !ascii || count < 0 || props < 3)
    throw IoError(FormatIssue::kMalformedHeader, path.string());
  PointCloud cloud;
  cloud.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw IoError(FormatIssue::kTruncatedPayload, path.string());
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) throw IoError(FormatIssue::kTruncatedPayload, path.string());
    cloud.emplace_back(x, y, z);
  }
  if (cloud.empty()) throw IoError(FormatIssue::kEmptyCloud, path.string());
  return cloud;
}

}  // namespace tacdepth::io
