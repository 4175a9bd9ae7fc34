// Copyright the mscat authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef MSCAT_CONTAINER_HPP
#define MSCAT_CONTAINER_HPP

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string_view>

#include <json.hpp>

#include "mscat/core.hpp"

namespace mscat
{

using Json = nlohmann::json;

//
// Binary container layout, little-endian:
//   magic bytes | u64 header length | UTF-8 JSON header | raw arrays
//
class FormatError : public Error
{
public:
  enum class Kind
  {
    BadMagic,
    Truncated,
    CountMismatch,
    BadHeader,
    Io
  };

  FormatError(Kind kind, const std::string &what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

class ByteWriter
{
public:
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  void u64(std::uint64_t v)
  {
    for (int i = 0; i < 8; ++i)
    {
      bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
  }

  void u32(std::uint32_t v)
  {
    for (int i = 0; i < 4; ++i)
    {
      bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  const std::vector<char> &bytes() const { return bytes_; }

private:
  std::vector<char> bytes_;
};

class ByteReader
{
public:
  explicit ByteReader(std::span<const char> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::string_view raw(std::size_t n)
  {
    need(n);
    std::string_view s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::uint64_t u64()
  {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
    {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::uint32_t u32()
  {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
    {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

private:
  void need(std::size_t n) const
  {
    if (remaining() < n)
    {
      throw FormatError(FormatError::Kind::Truncated,
                        concat("truncated payload: need ", n, " bytes, ", remaining(), " left"));
    }
  }

  std::span<const char> bytes_;
  std::size_t pos_ = 0;
};

inline void write_file(const std::filesystem::path &path, std::span<const char> bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw FormatError(FormatError::Kind::Io, concat("cannot open '", path.string(), "' for writing"));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
  {
    throw FormatError(FormatError::Kind::Io, concat("write failed for '", path.string(), "'"));
  }
}

inline std::vector<char> read_file(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw FormatError(FormatError::Kind::Io, concat("cannot open '", path.string(), "'"));
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes magic, header length and header; arrays follow via the writer.
inline void begin_container(ByteWriter &w, std::string_view magic, const Json &header)
{
  const std::string text = header.dump();
  w.raw(magic);
  w.u64(text.size());
  w.raw(text);
}

inline Json open_container(ByteReader &r, std::string_view magic)
{
  if (r.remaining() < magic.size() || r.raw(magic.size()) != magic)
  {
    throw FormatError(FormatError::Kind::BadMagic, concat("bad magic, expected '", magic, "'"));
  }
  const std::uint64_t len = r.u64();
  if (len > r.remaining())
  {
    throw FormatError(FormatError::Kind::Truncated, "truncated header");
  }
  const std::string_view text = r.raw(static_cast<std::size_t>(len));
  try
  {
    return Json::parse(text);
  }
  catch (const Json::exception &e)
  {
    throw FormatError(FormatError::Kind::BadHeader, concat("malformed header: ", e.what()));
  }
}

inline Json to_json(const Vec3 &v) { return Json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const Json &j)
{
  if (!j.is_array() || j.size() != 3)
  {
    throw FormatError(FormatError::Kind::BadHeader, "expected a 3-vector");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace mscat

#endif  // MSCAT_CONTAINER_HPP
