// SPDX-License-Identifier: Apache-2.0
#include "hbvla/npy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

namespace hbvla {

namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreamble = 10;  // magic + version + u16 header length

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are little-endian; big-endian hosts need byte swapping");

[[noreturn]] void format_error(const std::string& field, const std::string& detail) {
  fail(ErrorCode::format, "npy: bad " + field + ": " + detail);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

// Returns the raw text of the value following 'key': up to the next top-level comma.
std::string_view dict_value(std::string_view header, std::string_view key) {
  const std::string quoted_single = "'" + std::string(key) + "'";
  const std::string quoted_double = "\"" + std::string(key) + "\"";
  auto pos = header.find(quoted_single);
  std::size_t klen = quoted_single.size();
  if (pos == std::string_view::npos) {
    pos = header.find(quoted_double);
    klen = quoted_double.size();
  }
  if (pos == std::string_view::npos) format_error(std::string(key), "missing key");
  auto rest = header.substr(pos + klen);
  rest = trim(rest);
  if (rest.empty() || rest.front() != ':') format_error(std::string(key), "expected ':'");
  rest.remove_prefix(1);
  rest = trim(rest);
  int depth = 0;
  std::size_t end = 0;
  for (; end < rest.size(); ++end) {
    const char c = rest[end];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if ((c == ',' && depth == 0) || (c == '}' && depth == 0)) break;
  }
  return trim(rest.substr(0, end));
}

std::vector<std::size_t> parse_shape(std::string_view v) {
  if (v.size() < 2 || v.front() != '(' || v.back() != ')') format_error("shape", std::string(v));
  v = v.substr(1, v.size() - 2);
  std::vector<std::size_t> dims;
  while (true) {
    v = trim(v);
    if (v.empty()) break;
    std::size_t i = 0;
    while (i < v.size() && v[i] >= '0' && v[i] <= '9') ++i;
    if (i == 0) format_error("shape", "non-integer dimension");
    dims.push_back(std::stoull(std::string(v.substr(0, i))));
    v.remove_prefix(i);
    v = trim(v);
    if (!v.empty()) {
      if (v.front() != ',') format_error("shape", "expected ','");
      v.remove_prefix(1);
    }
  }
  if (dims.size() > 2) format_error("shape", "rank " + std::to_string(dims.size()) + " > 2");
  return dims;
}

}  // namespace

Matrix decode_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreamble || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    format_error("magic", "not an NPY file");
  }
  if (bytes[6] != 1 || bytes[7] != 0) {
    format_error("version", std::to_string(bytes[6]) + "." + std::to_string(bytes[7]));
  }
  const std::size_t header_len = bytes[8] | (std::size_t{bytes[9]} << 8);
  if (bytes.size() < kPreamble + header_len) format_error("header_len", "exceeds file size");
  const std::string_view header(reinterpret_cast<const char*>(bytes.data() + kPreamble),
                                header_len);

  const auto descr = dict_value(header, "descr");
  Precision precision;
  if (descr == "'<f4'" || descr == "\"<f4\"") {
    precision = Precision::f32;
  } else if (descr == "'<f8'" || descr == "\"<f8\"") {
    precision = Precision::f64;
  } else {
    format_error("descr", std::string(descr));
  }

  const auto fortran = dict_value(header, "fortran_order");
  if (fortran != "False") format_error("fortran_order", std::string(fortran));

  const auto dims = parse_shape(dict_value(header, "shape"));
  std::size_t rows = 1;
  std::size_t cols = 1;
  if (dims.size() == 1) cols = dims[0];
  if (dims.size() == 2) {
    rows = dims[0];
    cols = dims[1];
  }

  const std::size_t elem = precision == Precision::f32 ? 4 : 8;
  const std::size_t count = rows * cols;
  const std::size_t available = bytes.size() - kPreamble - header_len;
  if (available < count * elem) {
    fail(ErrorCode::truncation, "npy: shape declares " + std::to_string(count) +
                                    " values, payload holds " + std::to_string(available / elem));
  }
  if (available != count * elem) format_error("payload", "trailing bytes after data");

  const std::uint8_t* p = bytes.data() + kPreamble + header_len;
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (precision == Precision::f32) {
      float f;
      std::memcpy(&f, p + i * 4, 4);
      data[i] = f;
    } else {
      std::memcpy(&data[i], p + i * 8, 8);
    }
    if (!std::isfinite(data[i])) format_error("payload", "non-finite value");
  }
  return Matrix(rows, cols, std::move(data), precision);
}

std::vector<std::uint8_t> encode_npy(const Matrix& m) {
  const bool f32 = m.precision() == Precision::f32;
  std::string header = std::string("{'descr': '") + (f32 ? "<f4" : "<f8") +
                       "', 'fortran_order': False, 'shape': (" + std::to_string(m.rows()) + ", " +
                       std::to_string(m.cols()) + "), }";
  // Pad so the payload starts on a 64-byte boundary, newline-terminated.
  const std::size_t unpadded = kPreamble + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  const std::size_t elem = f32 ? 4 : 8;
  std::vector<std::uint8_t> out(kPreamble + header.size() + m.size() * elem);
  std::memcpy(out.data(), kMagic, sizeof kMagic);
  out[6] = 1;
  out[7] = 0;
  out[8] = static_cast<std::uint8_t>(header.size() & 0xFF);
  out[9] = static_cast<std::uint8_t>(header.size() >> 8);
  std::memcpy(out.data() + kPreamble, header.data(), header.size());
  std::size_t off = kPreamble + header.size();
  for (double v : m.data()) {
    if (f32) {
      const float f = static_cast<float>(v);
      std::memcpy(out.data() + off, &f, 4);
    } else {
      std::memcpy(out.data() + off, &v, 8);
    }
    off += elem;
  }
  return out;
}

Matrix read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_npy(bytes);
}

void write_tensor(const std::filesystem::path& path, const Matrix& m) {
  const auto bytes = encode_npy(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace hbvla
