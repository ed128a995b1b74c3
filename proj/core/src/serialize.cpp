// SPDX-License-Identifier: Apache-2.0
#include "hbvla/serialize.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace hbvla {

namespace {

constexpr std::uint8_t kMagic[4] = {'H', 'B', 'Q', '1'};
// magic + version + n + m + config block + payload bits
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4 + (1 + 1 + 4 + 1 + 1 + 4 + 1) + 8;
constexpr std::size_t kMaxElements = std::size_t{1} << 32;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8(const char* field) { return static_cast<std::uint8_t>(le(1, field)); }
  std::uint16_t u16(const char* field) { return static_cast<std::uint16_t>(le(2, field)); }
  std::uint32_t u32(const char* field) { return static_cast<std::uint32_t>(le(4, field)); }
  std::uint64_t u64(const char* field) { return le(8, field); }
  std::size_t pos() const noexcept { return pos_; }

 private:
  std::uint64_t le(std::size_t n, const char* field) {
    if (pos_ + n > b_.size()) fail(ErrorCode::truncation, std::string("hbq: truncated at ") + field);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{b_[pos_ + i]} << (8 * i);
    pos_ += n;
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

class BitWriter {
 public:
  void put(std::uint64_t v, unsigned nbits) {
    for (unsigned i = nbits; i-- > 0;) bit((v >> i) & 1u);
  }
  void bit(bool b) {
    if (used_ % 8 == 0) bytes_.push_back(0);
    if (b) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (used_ % 8));
    ++used_;
  }
  std::uint64_t bits() const noexcept { return used_; }
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t used_ = 0;
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> b, std::uint64_t nbits) : b_(b), limit_(nbits) {}
  std::uint64_t get(unsigned nbits) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < nbits; ++i) v = (v << 1) | (bit() ? 1u : 0u);
    return v;
  }
  bool bit() {
    if (pos_ >= limit_) fail(ErrorCode::truncation, "hbq: payload ended early");
    const bool b = (b_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return b;
  }
  std::uint64_t pos() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::uint64_t limit_;
  std::uint64_t pos_ = 0;
};

unsigned index_bits(std::size_t m) {
  return m <= 1 ? 1u : static_cast<unsigned>(std::bit_width(m - 1));
}

std::size_t window_for(const LayerFormat& fmt, std::size_t len) {
  return fmt.split_scope == SplitScope::row ? std::max<std::size_t>(len, 1) : fmt.group_window;
}

void write_sequence(BitWriter& bw, const CodedSequence& seq, std::size_t window,
                    std::size_t max_groups) {
  if (seq.shared_mu) bw.put(*seq.shared_mu, 16);
  for (const auto& code : seq.windows) {
    if (max_groups == 2) bw.bit(code.split());
    if (code.split())
      for (auto b : code.membership) bw.bit(b != 0);
    for (auto mu : code.mu) bw.put(mu, 16);
    for (auto a : code.alpha) bw.put(a, 16);
    for (auto s : code.signs) bw.bit(s != 0);
  }
  (void)window;
}

CodedSequence read_sequence(BitReader& br, std::size_t len, std::size_t window,
                            std::size_t max_groups, bool shared_mean) {
  CodedSequence seq;
  seq.len = len;
  if (shared_mean) seq.shared_mu = static_cast<std::uint16_t>(br.get(16));
  for (std::size_t w0 = 0; w0 < len; w0 += window) {
    const std::size_t wl = std::min(window, len - w0);
    WindowCode code;
    const bool split = max_groups == 2 && br.bit();
    const std::size_t groups = split ? 2 : 1;
    if (split) {
      code.membership.resize(wl);
      for (auto& b : code.membership) b = br.bit() ? 1 : 0;
    }
    if (!shared_mean) {
      code.mu.resize(groups);
      for (auto& mu : code.mu) mu = static_cast<std::uint16_t>(br.get(16));
    }
    code.alpha.resize(groups);
    for (auto& a : code.alpha) a = static_cast<std::uint16_t>(br.get(16));
    code.signs.resize(wl);
    for (auto& s : code.signs) s = br.bit() ? 1 : 0;
    seq.windows.push_back(std::move(code));
  }
  return seq;
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept {
  uLong c = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    c = ::crc32(c, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(c);
}

std::vector<std::uint8_t> serialize_layer(const BinarizedLayer& layer) {
  const auto& fmt = layer.format;
  if (layer.n == 0 || layer.m < 2 || layer.n > 0xFFFFFFFFu || layer.m > 0xFFFFFFFFu) {
    fail(ErrorCode::size_limit, "hbq: layer shape not representable");
  }
  if (fmt.group_window == 0 || fmt.group_window > 0xFFFFFFFFu || (fmt.max_groups != 1 && fmt.max_groups != 2)) {
    fail(ErrorCode::configuration, "hbq: unsupported layer format");
  }
  if (layer.salient_planes.size() > 255) fail(ErrorCode::size_limit, "hbq: too many salient planes");
  if (layer.ordering.m() != layer.m) fail(ErrorCode::inconsistent, "hbq: ordering length != m");
  if (layer.salient_planes.empty() != layer.salient.empty()) {
    fail(ErrorCode::inconsistent, "hbq: salient columns and residual planes disagree");
  }

  const bool odd_m = layer.m % 2 == 1;
  const bool odd_n_rows = layer.n % 2 == 1 && !layer.salient.empty();
  if (odd_m != layer.leftover_column.has_value()) {
    fail(ErrorCode::inconsistent, "hbq: leftover column presence does not match m");
  }

  BitWriter bw;
  const unsigned ib = index_bits(layer.m);
  for (std::size_t c : layer.ordering.order) bw.put(c, ib);
  for (std::size_t c : layer.salient) bw.put(c, 32);
  const std::size_t half = layer.m / 2;
  for (const auto* band : {&layer.nonsalient_lo, &layer.nonsalient_hi}) {
    if (band->size() != layer.n) fail(ErrorCode::inconsistent, "hbq: band row count != n");
    for (const auto& seq : *band) {
      if (seq.len != half || !seq.shared_mu) fail(ErrorCode::inconsistent, "hbq: malformed band row");
      write_sequence(bw, seq, window_for(fmt, half), fmt.max_groups);
    }
  }
  for (const auto& plane : layer.salient_planes) {
    if (plane.lo.size() != layer.salient.size() || plane.hi.size() != layer.salient.size() ||
        plane.leftover_row.has_value() != odd_n_rows) {
      fail(ErrorCode::inconsistent, "hbq: malformed salient plane");
    }
    for (const auto* band : {&plane.lo, &plane.hi})
      for (const auto& seq : *band) write_sequence(bw, seq, window_for(fmt, layer.n / 2), fmt.max_groups);
    if (plane.leftover_row) write_sequence(bw, *plane.leftover_row, layer.salient.size(), 1);
  }
  if (layer.leftover_column) write_sequence(bw, *layer.leftover_column, layer.n, 1);

  ByteWriter out;
  for (auto b : kMagic) out.u8(b);
  out.u16(kHbqVersion);
  out.u32(static_cast<std::uint32_t>(layer.n));
  out.u32(static_cast<std::uint32_t>(layer.m));
  out.u8(fmt.normalization == HaarNorm::average ? 0 : 1);
  out.u8(static_cast<std::uint8_t>(fmt.max_groups));
  out.u32(static_cast<std::uint32_t>(fmt.group_window));
  out.u8(fmt.split_scope == SplitScope::window ? 0 : 1);
  out.u8(static_cast<std::uint8_t>(layer.salient_planes.size()));
  out.u32(static_cast<std::uint32_t>(layer.salient.size()));
  out.u8(static_cast<std::uint8_t>((odd_m ? 1 : 0) | (odd_n_rows ? 2 : 0)));
  out.u64(bw.bits());
  auto& bytes = out.bytes();
  bytes.insert(bytes.end(), bw.bytes().begin(), bw.bytes().end());
  const std::uint32_t crc = crc32(bytes);
  out.u32(crc);
  return std::move(out.bytes());
}

std::uint64_t payload_bits(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) fail(ErrorCode::truncation, "hbq: truncated header");
  ByteReader r(bytes.subspan(kHeaderBytes - 8));
  return r.u64("payload bits");
}

BinarizedLayer deserialize_layer(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  for (auto b : kMagic) {
    if (r.u8("magic") != b) fail(ErrorCode::format, "hbq: bad magic");
  }
  const auto version = r.u16("version");
  if (version != kHbqVersion) fail(ErrorCode::format, "hbq: unsupported version " + std::to_string(version));

  BinarizedLayer layer;
  layer.n = r.u32("n");
  layer.m = r.u32("m");
  const auto norm = r.u8("normalization");
  const auto max_groups = r.u8("max_groups");
  const auto window = r.u32("group_window");
  const auto scope = r.u8("split_scope");
  const auto planes = r.u8("salient planes");
  const auto salient_count = r.u32("salient count");
  const auto flags = r.u8("flags");
  const auto nbits = r.u64("payload bits");

  if (norm > 1) fail(ErrorCode::format, "hbq: bad normalization field");
  if (max_groups != 1 && max_groups != 2) fail(ErrorCode::format, "hbq: bad max_groups field");
  if (window == 0) fail(ErrorCode::format, "hbq: bad group_window field");
  if (scope > 1) fail(ErrorCode::format, "hbq: bad split_scope field");
  if (flags > 3) fail(ErrorCode::format, "hbq: bad flags field");
  if (layer.n == 0 || layer.m < 2) fail(ErrorCode::format, "hbq: bad shape field");
  if (layer.n * layer.m > kMaxElements) fail(ErrorCode::size_limit, "hbq: layer too large");
  if (salient_count >= layer.m) fail(ErrorCode::format, "hbq: bad salient count field");
  if ((planes == 0) != (salient_count == 0)) fail(ErrorCode::format, "hbq: salient planes and count disagree");
  const bool odd_m = layer.m % 2 == 1;
  const bool odd_n_rows = layer.n % 2 == 1 && salient_count > 0;
  if (((flags & 1) != 0) != odd_m || ((flags & 2) != 0) != odd_n_rows) {
    fail(ErrorCode::format, "hbq: flags inconsistent with shape");
  }

  const std::uint64_t payload_bytes = (nbits + 7) / 8;
  if (nbits > std::numeric_limits<std::uint64_t>::max() - 7 ||
      bytes.size() < kHeaderBytes + payload_bytes + 4) {
    fail(ErrorCode::truncation, "hbq: file shorter than declared payload");
  }
  if (bytes.size() != kHeaderBytes + payload_bytes + 4) fail(ErrorCode::format, "hbq: trailing bytes");
  const auto body = bytes.subspan(0, kHeaderBytes + payload_bytes);
  ByteReader tail(bytes.subspan(body.size()));
  if (tail.u32("crc") != crc32(body)) fail(ErrorCode::format, "hbq: CRC32 mismatch");

  layer.format.normalization = norm == 0 ? HaarNorm::average : HaarNorm::orthonormal;
  layer.format.max_groups = max_groups;
  layer.format.group_window = window;
  layer.format.split_scope = scope == 0 ? SplitScope::window : SplitScope::row;
  const auto& fmt = layer.format;

  BitReader br(bytes.subspan(kHeaderBytes, payload_bytes), nbits);
  const unsigned ib = index_bits(layer.m);
  layer.ordering.order.resize(layer.m);
  for (auto& c : layer.ordering.order) c = br.get(ib);
  layer.ordering.validate();
  layer.salient.resize(salient_count);
  for (std::size_t i = 0; i < salient_count; ++i) {
    layer.salient[i] = br.get(32);
    if (layer.salient[i] >= layer.m || (i > 0 && layer.salient[i] <= layer.salient[i - 1])) {
      fail(ErrorCode::format, "hbq: salient indices must be ascending and in range");
    }
  }
  const std::size_t half = layer.m / 2;
  for (auto* band : {&layer.nonsalient_lo, &layer.nonsalient_hi}) {
    band->reserve(layer.n);
    for (std::size_t r2 = 0; r2 < layer.n; ++r2)
      band->push_back(read_sequence(br, half, window_for(fmt, half), fmt.max_groups, true));
  }
  for (std::size_t p = 0; p < planes; ++p) {
    SalientPlane plane;
    const std::size_t len = layer.n / 2;
    for (auto* band : {&plane.lo, &plane.hi})
      for (std::size_t c = 0; c < salient_count; ++c)
        band->push_back(read_sequence(br, len, window_for(fmt, len), fmt.max_groups, false));
    if (odd_n_rows) plane.leftover_row = read_sequence(br, salient_count, salient_count, 1, false);
    layer.salient_planes.push_back(std::move(plane));
  }
  if (odd_m) layer.leftover_column = read_sequence(br, layer.n, layer.n, 1, false);
  if (br.pos() != nbits) fail(ErrorCode::format, "hbq: payload length does not match contents");
  return layer;
}

void write_layer(const std::filesystem::path& path, const BinarizedLayer& layer) {
  const auto bytes = serialize_layer(layer);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::io, "write failed: " + path.string());
}

BinarizedLayer read_layer(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_layer(bytes);
}

}  // namespace hbvla
