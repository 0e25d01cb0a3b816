#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "coref/ast.hpp"

namespace coref {

// Dense binary occupancy over the axis-aligned domain [-1,1]^dim, sampled at
// cell centers: coordinate of cell i along an axis with resolution r is
// ((i + 0.5) / r) * 2 - 1. Bits are packed row-major with x fastest:
// index = (z * ry + y) * rx + x. Trailing bits of the last word stay zero.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(Dim dim, std::array<int, 3> res);

  static std::array<int, 3> default_res(Dim d) {
    return d == Dim::TwoD ? std::array<int, 3>{64, 64, 1} : std::array<int, 3>{32, 32, 32};
  }
  static OccupancyGrid zeros(Dim d) { return OccupancyGrid(d, default_res(d)); }

  Dim dim() const { return dim_; }
  const std::array<int, 3>& res() const { return res_; }
  int64_t cell_count() const { return cells_; }

  bool get(int64_t i) const { return (words_[size_t(i >> 6)] >> (i & 63)) & 1u; }
  void set(int64_t i, bool v) {
    uint64_t mask = 1ull << (i & 63);
    if (v)
      words_[size_t(i >> 6)] |= mask;
    else
      words_[size_t(i >> 6)] &= ~mask;
  }

  int64_t index(int x, int y, int z = 0) const {
    return (int64_t(z) * res_[1] + y) * res_[0] + x;
  }
  std::array<int, 3> coords(int64_t i) const {
    int x = int(i % res_[0]);
    int y = int((i / res_[0]) % res_[1]);
    int z = int(i / (int64_t(res_[0]) * res_[1]));
    return {x, y, z};
  }
  std::array<double, 3> cell_center(int64_t i) const;

  // Nearest cell index for a world point, or -1 when outside the domain.
  int64_t cell_at(const std::array<double, 3>& world) const;

  int64_t count() const;
  bool any() const { return count() > 0; }
  bool same_shape(const OccupancyGrid& o) const { return dim_ == o.dim_ && res_ == o.res_; }

  bool operator==(const OccupancyGrid& o) const {
    return same_shape(o) && words_ == o.words_;
  }

  int64_t hamming(const OccupancyGrid& o) const;

  const std::vector<uint64_t>& words() const { return words_; }
  std::vector<uint64_t>& words() { return words_; }
  void mask_tail();  // clear bits past cell_count()

  // World-space bounding box of the occupied region (occupied cell centers
  // padded by half a cell on each side). empty == true when no cell is set.
  struct Box {
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{0, 0, 0};
    bool empty = true;
    std::array<double, 3> center() const;
    std::array<double, 3> extent() const;
  };
  Box bounding_box() const;

  // Index-space bounding box [lo, hi] inclusive; valid only when any().
  struct IndexBox {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};
    bool empty = true;
  };
  IndexBox index_box() const;

 private:
  Dim dim_ = Dim::TwoD;
  std::array<int, 3> res_{0, 0, 1};
  int64_t cells_ = 0;
  std::vector<uint64_t> words_;
};

OccupancyGrid grid_or(const OccupancyGrid& a, const OccupancyGrid& b);
OccupancyGrid grid_and(const OccupancyGrid& a, const OccupancyGrid& b);
OccupancyGrid grid_andnot(const OccupancyGrid& a, const OccupancyGrid& b);
OccupancyGrid grid_not(const OccupancyGrid& a);
OccupancyGrid grid_xor(const OccupancyGrid& a, const OccupancyGrid& b);
OccupancyGrid apply_bool_op(BoolOp op, const OccupancyGrid& a, const OccupancyGrid& b);

// File format: "OCC <dim> <rx> <ry> [<rz>]\n" followed by one line of base64
// over the packed little-endian bit bytes.
std::string encode_grid(const OccupancyGrid& g);
OccupancyGrid decode_grid(const std::string& text);
void save_grid(const std::string& path, const OccupancyGrid& g);
OccupancyGrid load_grid(const std::string& path);

std::string base64_encode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> base64_decode(const std::string& text);

}  // namespace coref
