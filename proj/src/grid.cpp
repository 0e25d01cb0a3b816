#include "coref/grid.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coref {

OccupancyGrid::OccupancyGrid(Dim dim, std::array<int, 3> res) : dim_(dim), res_(res) {
  if (dim == Dim::TwoD) res_[2] = 1;
  for (int i = 0; i < 3; ++i)
    if (res_[i] < 1) throw std::invalid_argument("grid resolution must be >= 1");
  cells_ = int64_t(res_[0]) * res_[1] * res_[2];
  words_.assign(size_t((cells_ + 63) / 64), 0);
}

std::array<double, 3> OccupancyGrid::cell_center(int64_t i) const {
  auto c = coords(i);
  std::array<double, 3> w{0, 0, 0};
  for (int a = 0; a < dim_count(dim_); ++a)
    w[a] = (double(c[a]) + 0.5) / res_[a] * 2.0 - 1.0;
  return w;
}

int64_t OccupancyGrid::cell_at(const std::array<double, 3>& world) const {
  int idx[3] = {0, 0, 0};
  for (int a = 0; a < dim_count(dim_); ++a) {
    double t = (world[a] + 1.0) * 0.5 * res_[a];
    int i = int(std::floor(t));
    if (i < 0 || i >= res_[a]) return -1;
    idx[a] = i;
  }
  return index(idx[0], idx[1], idx[2]);
}

int64_t OccupancyGrid::count() const {
  int64_t n = 0;
  for (uint64_t w : words_) n += std::popcount(w);
  return n;
}

int64_t OccupancyGrid::hamming(const OccupancyGrid& o) const {
  if (!same_shape(o)) throw std::invalid_argument("hamming: shape mismatch");
  int64_t n = 0;
  for (size_t i = 0; i < words_.size(); ++i) n += std::popcount(words_[i] ^ o.words_[i]);
  return n;
}

void OccupancyGrid::mask_tail() {
  int tail = int(cells_ & 63);
  if (tail && !words_.empty()) words_.back() &= (1ull << tail) - 1;
}

std::array<double, 3> OccupancyGrid::Box::center() const {
  return {(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2};
}
std::array<double, 3> OccupancyGrid::Box::extent() const {
  return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
}

OccupancyGrid::IndexBox OccupancyGrid::index_box() const {
  IndexBox b;
  b.lo = {res_[0], res_[1], res_[2]};
  b.hi = {-1, -1, -1};
  for (int64_t i = 0; i < cells_; ++i) {
    if (!get(i)) continue;
    auto c = coords(i);
    for (int a = 0; a < 3; ++a) {
      b.lo[a] = std::min(b.lo[a], c[a]);
      b.hi[a] = std::max(b.hi[a], c[a]);
    }
  }
  b.empty = b.hi[0] < 0;
  if (b.empty) b.lo = b.hi = {0, 0, 0};
  return b;
}

OccupancyGrid::Box OccupancyGrid::bounding_box() const {
  Box out;
  IndexBox ib = index_box();
  if (ib.empty) return out;
  out.empty = false;
  for (int a = 0; a < dim_count(dim_); ++a) {
    double cell = 2.0 / res_[a];
    out.lo[a] = (double(ib.lo[a]) + 0.5) / res_[a] * 2.0 - 1.0 - cell / 2;
    out.hi[a] = (double(ib.hi[a]) + 0.5) / res_[a] * 2.0 - 1.0 + cell / 2;
  }
  return out;
}

namespace {
OccupancyGrid binop(const OccupancyGrid& a, const OccupancyGrid& b, uint64_t (*f)(uint64_t, uint64_t)) {
  if (!a.same_shape(b)) throw std::invalid_argument("grid op: shape mismatch");
  OccupancyGrid out = a;
  auto& w = out.words();
  const auto& wb = b.words();
  for (size_t i = 0; i < w.size(); ++i) w[i] = f(w[i], wb[i]);
  out.mask_tail();
  return out;
}
}  // namespace

OccupancyGrid grid_or(const OccupancyGrid& a, const OccupancyGrid& b) {
  return binop(a, b, [](uint64_t x, uint64_t y) { return x | y; });
}
OccupancyGrid grid_and(const OccupancyGrid& a, const OccupancyGrid& b) {
  return binop(a, b, [](uint64_t x, uint64_t y) { return x & y; });
}
OccupancyGrid grid_andnot(const OccupancyGrid& a, const OccupancyGrid& b) {
  return binop(a, b, [](uint64_t x, uint64_t y) { return x & ~y; });
}
OccupancyGrid grid_xor(const OccupancyGrid& a, const OccupancyGrid& b) {
  return binop(a, b, [](uint64_t x, uint64_t y) { return x ^ y; });
}
OccupancyGrid grid_not(const OccupancyGrid& a) {
  OccupancyGrid out = a;
  for (auto& w : out.words()) w = ~w;
  out.mask_tail();
  return out;
}

OccupancyGrid apply_bool_op(BoolOp op, const OccupancyGrid& a, const OccupancyGrid& b) {
  switch (op) {
    case BoolOp::Union: return grid_or(a, b);
    case BoolOp::Intersect: return grid_and(a, b);
    case BoolOp::Subtract: return grid_andnot(a, b);
  }
  throw std::logic_error("bad op");
}

// ---------------------------------------------------------------------------

static const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 2 < bytes.size()) {
    uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    uint32_t v = bytes[i] << 16;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
  int8_t rev[256];
  for (int i = 0; i < 256; ++i) rev[i] = -1;
  for (int i = 0; i < 64; ++i) rev[uint8_t(kB64[i])] = int8_t(i);
  std::vector<uint8_t> out;
  uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    int8_t v = rev[uint8_t(c)];
    if (v < 0) throw std::invalid_argument("bad base64 character");
    acc = (acc << 6) | uint32_t(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(uint8_t((acc >> bits) & 0xff));
    }
  }
  return out;
}

std::string encode_grid(const OccupancyGrid& g) {
  std::ostringstream os;
  os << "OCC " << dim_count(g.dim()) << ' ' << g.res()[0] << ' ' << g.res()[1];
  if (g.dim() == Dim::ThreeD) os << ' ' << g.res()[2];
  os << '\n';
  std::vector<uint8_t> bytes(size_t((g.cell_count() + 7) / 8), 0);
  for (int64_t i = 0; i < g.cell_count(); ++i)
    if (g.get(i)) bytes[size_t(i >> 3)] |= uint8_t(1u << (i & 7));
  os << base64_encode(bytes) << '\n';
  return os.str();
}

OccupancyGrid decode_grid(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  int d = 0;
  is >> magic >> d;
  if (magic != "OCC" || (d != 2 && d != 3)) throw std::invalid_argument("bad grid header");
  std::array<int, 3> res{1, 1, 1};
  for (int i = 0; i < d; ++i)
    if (!(is >> res[i])) throw std::invalid_argument("bad grid header");
  std::string payload;
  is >> payload;
  OccupancyGrid g(d == 2 ? Dim::TwoD : Dim::ThreeD, res);
  std::vector<uint8_t> bytes = base64_decode(payload);
  if (int64_t(bytes.size()) * 8 < g.cell_count())
    throw std::invalid_argument("grid payload too short");
  for (int64_t i = 0; i < g.cell_count(); ++i)
    if ((bytes[size_t(i >> 3)] >> (i & 7)) & 1u) g.set(i, true);
  return g;
}

void save_grid(const std::string& path, const OccupancyGrid& g) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << encode_grid(g);
}

OccupancyGrid load_grid(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return decode_grid(os.str());
}

}  // namespace coref
