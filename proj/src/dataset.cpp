#include "coref/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coref/executor.hpp"
#include "coref/proposal.hpp"
#include "coref/rng.hpp"

namespace fs = std::filesystem;

namespace coref {

DatasetManifest gen_data(Dim dim, int count, int depth_max, uint64_t seed,
                         const std::string& out_dir, const std::array<int, 3>& res) {
  if (count < 1) throw std::invalid_argument("gen_data: count must be >= 1");
  fs::create_directories(out_dir);
  DatasetManifest m;
  m.root = out_dir;
  const int64_t cells = int64_t(res[0]) * res[1] * (dim == Dim::ThreeD ? res[2] : 1);
  for (int i = 0; i < count; ++i) {
    ExprPtr prog;
    OccupancyGrid grid;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::runtime_error("gen_data: rejection sampling stuck");
      Rng rng(mix_seed(seed, uint64_t(i), uint64_t(attempt)));
      prog = sample_program(rng, dim, depth_max);
      grid = execute_hard(*prog, res);
      double frac = double(grid.count()) / double(cells);
      if (frac >= 0.01 && frac <= 0.99) break;
    }
    char name[32];
    std::snprintf(name, sizeof name, "shape_%04d", i);
    ManifestEntry e;
    e.shape_id = name;
    e.grid_file = std::string(name) + ".occ";
    e.program_file = std::string(name) + ".csg";
    save_grid((fs::path(out_dir) / e.grid_file).string(), grid);
    std::ofstream pf(fs::path(out_dir) / e.program_file, std::ios::binary);
    pf << print_program(*prog) << '\n';
    m.entries.push_back(std::move(e));
  }
  save_manifest(m, (fs::path(out_dir) / "manifest.txt").string());
  return m;
}

DatasetManifest gen_data(Dim dim, int count, int depth_max, uint64_t seed,
                         const std::string& out_dir) {
  return gen_data(dim, count, depth_max, seed, out_dir, OccupancyGrid::default_res(dim));
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  for (const auto& e : m.entries) {
    f << e.shape_id << '\t' << e.grid_file;
    if (!e.program_file.empty()) f << '\t' << e.program_file;
    f << '\n';
  }
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    ManifestEntry e;
    std::getline(is, e.shape_id, '\t');
    std::getline(is, e.grid_file, '\t');
    std::getline(is, e.program_file, '\t');
    if (e.shape_id.empty() || e.grid_file.empty())
      throw std::runtime_error("bad manifest line: " + line);
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::vector<Shape> load_shapes(const DatasetManifest& m) {
  std::vector<Shape> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    Shape s;
    s.id = e.shape_id;
    s.grid = load_grid((fs::path(m.root) / e.grid_file).string());
    if (!out.empty() && !out.front().grid.same_shape(s.grid))
      throw std::runtime_error("manifest grids disagree on dim/resolution");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Shape> load_shapes_dir(const std::string& dir) {
  return load_shapes(load_manifest((fs::path(dir) / "manifest.txt").string()));
}

}  // namespace coref
