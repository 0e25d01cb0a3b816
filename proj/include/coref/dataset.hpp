#pragma once

#include <string>
#include <vector>

#include "coref/ast.hpp"
#include "coref/grid.hpp"

namespace coref {

struct Shape {
  std::string id;
  OccupancyGrid grid;
};

struct ManifestEntry {
  std::string shape_id;
  std::string grid_file;     // relative to root
  std::string program_file;  // optional ground truth, may be empty
};

struct DatasetManifest {
  std::string root;
  std::vector<ManifestEntry> entries;
};

// Samples grammar programs (33-bin parameters, boolean depth <= depth_max),
// executes them and writes program + grid files plus manifest.txt. Samples
// whose occupied fraction falls outside [0.01, 0.99] are rejected and
// redrawn, so every emitted grid is neither empty nor full.
DatasetManifest gen_data(Dim dim, int count, int depth_max, uint64_t seed,
                         const std::string& out_dir, const std::array<int, 3>& res);
DatasetManifest gen_data(Dim dim, int count, int depth_max, uint64_t seed,
                         const std::string& out_dir);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

std::vector<Shape> load_shapes(const DatasetManifest& m);
std::vector<Shape> load_shapes_dir(const std::string& dir);  // reads dir/manifest.txt

}  // namespace coref
