// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/io/binary.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fxda::io {
namespace fs = std::filesystem;
namespace {

constexpr char kMagic[4] = {'F', 'X', 'D', 'A'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
    }
  }
  void f32(double v) { uint(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void string(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void header(char kind) {
    bytes(kMagic, 4);
    uint(static_cast<std::uint8_t>(kind));
    uint(kFormatVersion);
  }
  void tensor(const diff::Tensor& t) {
    uint(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape()) uint(static_cast<std::uint32_t>(e));
    for (double v : t.values()) f32(v);
  }
  /// Appends a CRC-32 trailer over everything written so far.
  void seal() { uint(static_cast<std::uint32_t>(crc32(0L, buf_.data(), static_cast<uInt>(buf_.size())))); }

  void save(const fs::path& path) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    end_ = buf_.size();
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("'" + path_.string() + "': " + what);
  }
  void need(std::size_t n) const {
    if (pos_ + n > end_) fail("truncated file");
  }
  template <typename T>
  T uint() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(uint<std::uint32_t>())); }
  std::string string() {
    const auto n = uint<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void header(char kind) {
    need(7);
    if (std::memcmp(buf_.data(), kMagic, 4) != 0) fail("bad magic bytes");
    pos_ = 4;
    const auto k = uint<std::uint8_t>();
    if (k != static_cast<std::uint8_t>(kind)) {
      fail(std::string("expected format '") + kind + "', found '" + static_cast<char>(k) + "'");
    }
    const auto version = uint<std::uint16_t>();
    if (version != kFormatVersion) fail("unsupported version " + std::to_string(version));
  }
  diff::Tensor tensor() {
    const auto rank = uint<std::uint8_t>();
    diff::Shape shape(rank);
    std::size_t count = 1;
    for (auto& e : shape) {
      e = uint<std::uint32_t>();
      count *= e;
    }
    need(count * 4);
    std::vector<double> values(count);
    for (auto& v : values) v = f32();
    return diff::Tensor(std::move(shape), std::move(values));
  }
  /// Verifies and strips a CRC-32 trailer.
  void checksum() {
    if (buf_.size() < 4) fail("truncated file");
    end_ = buf_.size() - 4;
    std::uint32_t stored = 0;
    for (std::size_t i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(buf_[end_ + i]) << (8 * i);
    const auto actual = static_cast<std::uint32_t>(crc32(0L, buf_.data(), static_cast<uInt>(end_)));
    if (stored != actual) {
      fail("checksum mismatch (stored " + hex32(stored) + ", computed " + hex32(actual) + ")");
    }
  }
  void finish() const {
    if (pos_ != end_) fail("trailing bytes");
  }

 private:
  fs::path path_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

}  // namespace

std::string hex32(std::uint32_t value) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", value);
  return buf;
}

void write_grid(const fs::path& path, const diff::Tensor& tensor) {
  Writer w;
  w.header('G');
  w.tensor(tensor);
  w.seal();
  w.save(path);
}

diff::Tensor read_grid(const fs::path& path) {
  Reader r(path);
  r.checksum();
  r.header('G');
  auto t = r.tensor();
  r.finish();
  return t;
}

void write_obs(const fs::path& path, const obs::SuperObsGrid& g) {
  Writer w;
  w.header('O');
  for (std::size_t v : {g.crop.row0, g.crop.col0, g.crop.height, g.crop.width, g.frames}) {
    w.uint(static_cast<std::uint32_t>(v));
  }
  w.uint(static_cast<std::uint32_t>(g.channel_ids.size()));
  for (int id : g.channel_ids) w.uint(static_cast<std::uint32_t>(id));
  w.uint(static_cast<std::uint64_t>(g.epoch_minutes));
  w.tensor(g.bt);
  w.uint(static_cast<std::uint32_t>(g.mask.size()));
  for (std::size_t i = 0; i < g.mask.size(); i += 8) {
    std::uint8_t byte = 0;
    for (std::size_t b = 0; b < 8 && i + b < g.mask.size(); ++b) {
      if (g.mask[i + b]) byte |= static_cast<std::uint8_t>(1u << b);
    }
    w.uint(byte);
  }
  w.tensor(g.aux);
  w.tensor(g.cloud_fraction);
  w.seal();
  w.save(path);
}

obs::SuperObsGrid read_obs(const fs::path& path) {
  Reader r(path);
  r.checksum();
  r.header('O');
  obs::SuperObsGrid g;
  g.crop.row0 = r.uint<std::uint32_t>();
  g.crop.col0 = r.uint<std::uint32_t>();
  g.crop.height = r.uint<std::uint32_t>();
  g.crop.width = r.uint<std::uint32_t>();
  g.frames = r.uint<std::uint32_t>();
  const auto k = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < k; ++i) g.channel_ids.push_back(static_cast<int>(r.uint<std::uint32_t>()));
  g.epoch_minutes = static_cast<std::int64_t>(r.uint<std::uint64_t>());
  g.bt = r.tensor();
  const auto bits = r.uint<std::uint32_t>();
  g.mask.resize(bits);
  for (std::size_t i = 0; i < bits; i += 8) {
    const auto byte = r.uint<std::uint8_t>();
    for (std::size_t b = 0; b < 8 && i + b < bits; ++b) g.mask[i + b] = (byte >> b) & 1u;
  }
  g.aux = r.tensor();
  g.cloud_fraction = r.tensor();
  r.finish();
  const diff::Shape bt_shape{g.frames * k, g.crop.height, g.crop.width};
  if (g.bt.shape() != bt_shape || bits != g.frames * g.crop.height * g.crop.width ||
      g.aux.shape() != diff::Shape{g.frames * obs::kAuxPlanes, g.crop.height, g.crop.width}) {
    r.fail("inconsistent plane extents");
  }
  return g;
}

const diff::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void write_checkpoint(const fs::path& path, const Checkpoint& ck) {
  Writer w;
  w.header('C');
  w.string(ck.meta.dump());
  w.uint(static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    w.string(name);
    w.tensor(t);
  }
  w.seal();
  w.save(path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  Reader r(path);
  r.checksum();
  r.header('C');
  Checkpoint ck;
  try {
    ck.meta = nlohmann::json::parse(r.string());
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad metadata: ") + e.what());
  }
  const auto n = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = r.string();
    ck.tensors.emplace_back(std::move(name), r.tensor());
  }
  r.finish();
  return ck;
}

std::uint32_t file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
}

std::uint32_t directory_crc32(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  uLong crc = 0L;
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, dir).generic_string();
    crc = crc32(crc, reinterpret_cast<const Bytef*>(rel.data()), static_cast<uInt>(rel.size()));
    const auto c = file_crc32(f);
    std::uint8_t b[4] = {static_cast<std::uint8_t>(c), static_cast<std::uint8_t>(c >> 8),
                         static_cast<std::uint8_t>(c >> 16), static_cast<std::uint8_t>(c >> 24)};
    crc = crc32(crc, b, 4);
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace fxda::io
