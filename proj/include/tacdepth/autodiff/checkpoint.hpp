#pragma once

// Parameter checkpoint, little-endian:
//   magic    8 bytes  "TDCKPT01"
//   count    uint32
//   count x { name_len uint32, name bytes, dims 4 x int32, payload float64[] }

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "tacdepth/autodiff/tensor.hpp"
#include "tacdepth/error.hpp"

namespace tacdepth::ad {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Ordered, name-addressable parameter collection.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor value) {
    if (find(name)) throw DomainError("duplicate parameter '" + name + "'");
    items_.push_back({std::move(name), std::move(value)});
    return items_.back().value;
  }

  std::size_t size() const { return items_.size(); }
  NamedTensor& operator[](std::size_t i) { return items_[i]; }
  const NamedTensor& operator[](std::size_t i) const { return items_[i]; }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  const Tensor* find(const std::string& name) const {
    for (const auto& it : items_)
      if (it.name == name) return &it.value;
    return nullptr;
  }

  const Tensor& at(const std::string& name) const {
    if (const Tensor* t = find(name)) return *t;
    throw DomainError("no parameter named '" + name + "'");
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& it : items_) n += it.value.size();
    return n;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.items_.size() != b.items_.size()) return false;
    for (std::size_t i = 0; i < a.items_.size(); ++i)
      if (a.items_[i].name != b.items_[i].name || !(a.items_[i].value == b.items_[i].value)) return false;
    return true;
  }

 private:
  std::vector<NamedTensor> items_;
};

namespace detail {

inline constexpr char kCheckpointMagic[9] = "TDCKPT01";

template <class T>
void put_le(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native != std::endian::little) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const std::vector<char>& in, std::size_t& pos, const std::string& where) {
  if (in.size() - pos < sizeof(T)) throw IoError(FormatIssue::kTruncatedPayload, where);
  unsigned char b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native != std::endian::little) std::reverse(b, b + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

inline void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  std::string out(detail::kCheckpointMagic, 8);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    for (int d : p.value.shape()) detail::put_le<std::int32_t>(out, d);
    for (double x : p.value.values()) detail::put_le<double>(out, x);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(FormatIssue::kOpenFailed, path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(FormatIssue::kOpenFailed, path.string());
}

inline ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(FormatIssue::kOpenFailed, path.string());
  const std::vector<char> in{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  const std::string where = path.string();
  if (in.size() < 8 || std::memcmp(in.data(), detail::kCheckpointMagic, 8) != 0)
    throw IoError(FormatIssue::kUnsupportedMagic, where);
  std::size_t pos = 8;
  const auto count = detail::get_le<std::uint32_t>(in, pos, where);
  ParameterSet params;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = detail::get_le<std::uint32_t>(in, pos, where);
    if (in.size() - pos < len) throw IoError(FormatIssue::kTruncatedPayload, where);
    std::string name(in.data() + pos, len);
    pos += len;
    Shape shape;
    for (int& d : shape) {
      d = detail::get_le<std::int32_t>(in, pos, where);
      if (d < 0) throw IoError(FormatIssue::kMalformedHeader, where);
    }
    Tensor t(shape);
    for (double& x : t.storage()) x = detail::get_le<double>(in, pos, where);
    params.add(std::move(name), std::move(t));
  }
  if (pos != in.size()) throw IoError(FormatIssue::kByteCountMismatch, where);
  return params;
}

}  // namespace tacdepth::ad
