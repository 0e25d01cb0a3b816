#pragma once

#include <string>

#include "coref/grid.hpp"

namespace coref {

// 2D grid as ASCII PGM (P2); row r holds y index r, occupied cells are 255.
std::string to_pgm(const OccupancyGrid& g);
OccupancyGrid from_pgm(const std::string& text);

// 3D grid as a strip of z slices side by side (width rx * rz, height ry).
std::string to_slice_strip_pgm(const OccupancyGrid& g);

// 3D grid as text: "VOX rx ry rz" then one "x y z" line per occupied cell.
std::string to_voxel_text(const OccupancyGrid& g);
OccupancyGrid from_voxel_text(const std::string& text);

// Dispatch by extension: .pgm (2D image / 3D slice strip) or .txt (3D voxel
// list; 2D falls back to PGM content regardless).
void render_to_file(const OccupancyGrid& g, const std::string& path);

}  // namespace coref
