#include "coref/bp_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace coref {

const char* source_name(Source s) {
  switch (s) {
    case Source::NS: return "NS";
    case Source::PO: return "PO";
    case Source::CP: return "CP";
    case Source::CG: return "CG";
  }
  return "?";
}

std::optional<Source> source_from_name(const std::string& name) {
  if (name == "NS") return Source::NS;
  if (name == "PO") return Source::PO;
  if (name == "CP") return Source::CP;
  if (name == "CG") return Source::CG;
  return std::nullopt;
}

bool BPStore::update(const std::string& shape_id, Source source, const ExprPtr& program,
                     const OccupancyGrid& x, int round) {
  Score s = objective(x, *program, cfg_);
  Key key{shape_id, int(source)};
  auto it = map_.find(key);
  if (it != map_.end() && it->second.score.objective >= s.objective) return false;
  BPEntry e;
  e.shape_id = shape_id;
  e.source = source;
  e.program = program;
  e.score = s;
  e.round_written = round;
  map_[key] = std::move(e);
  return true;
}

int BPStore::purge_stale(const std::string& shape_id, double search_objective) {
  int removed = 0;
  for (auto it = map_.begin(); it != map_.end();) {
    if (it->first.shape == shape_id && it->second.source != Source::NS &&
        it->second.score.objective < search_objective) {
      it = map_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

int BPStore::purge_stale(const std::string& shape_id, const ExprPtr& search_program,
                         const OccupancyGrid& x) {
  return purge_stale(shape_id, objective(x, *search_program, cfg_).objective);
}

const BPEntry* BPStore::find(const std::string& shape_id, Source source) const {
  auto it = map_.find(Key{shape_id, int(source)});
  return it == map_.end() ? nullptr : &it->second;
}

const BPEntry* BPStore::best_entry(const std::string& shape_id) const {
  const BPEntry* best = nullptr;
  for (int s = 0; s < 4; ++s) {
    const BPEntry* e = find(shape_id, Source(s));
    if (e && (!best || e->score.objective > best->score.objective)) best = e;
  }
  return best;
}

std::vector<std::string> BPStore::shape_ids() const {
  std::vector<std::string> out;
  for (const auto& [key, e] : map_)
    if (out.empty() || out.back() != key.shape) out.push_back(key.shape);
  return out;
}

std::vector<const BPEntry*> BPStore::all_entries() const {
  std::vector<const BPEntry*> out;
  out.reserve(map_.size());
  for (const auto& [key, e] : map_) out.push_back(&e);
  return out;
}

BPStore::RewriteSample BPStore::sample_for_rewrite(double frac_po, double frac_cp,
                                                   double frac_cg, Rng& rng) const {
  std::vector<std::string> shapes = shape_ids();
  const size_t n = shapes.size();
  auto draw = [&](double frac) {
    std::vector<const BPEntry*> out;
    if (n == 0 || frac <= 0) return out;
    size_t take = size_t(std::ceil(frac * double(n)));
    take = std::min(take, n);
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    for (size_t i : idx) out.push_back(best_entry(shapes[i]));
    return out;
  };
  RewriteSample s;
  s.po = draw(frac_po);
  s.cp = draw(frac_cp);
  s.cg = draw(frac_cg);
  return s;
}

std::vector<std::pair<std::string, ExprPtr>> BPStore::training_set(bool ns_only) const {
  std::vector<std::pair<std::string, ExprPtr>> out;
  for (const auto& [key, e] : map_) {
    if (ns_only && e.source != Source::NS) continue;
    out.emplace_back(key.shape, e.program);
  }
  return out;
}

void BPStore::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  for (const auto& [key, e] : map_) {
    char obj[64];
    std::snprintf(obj, sizeof obj, "%.17g", e.score.objective);
    f << key.shape << '\t' << source_name(e.source) << '\t' << obj << '\t'
      << print_program(*e.program) << '\n';
  }
}

BPStore BPStore::load(const std::string& path, Dim dim, ObjectiveConfig cfg) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  BPStore store(cfg);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 4) throw std::runtime_error("bad store line: " + line);
    auto src = source_from_name(fields[1]);
    if (!src) throw std::runtime_error("bad source: " + fields[1]);
    BPEntry e;
    e.shape_id = fields[0];
    e.source = *src;
    e.program = parse_program(fields[3], dim);
    e.score.objective = std::stod(fields[2]);
    e.score.length = program_length(*e.program);
    // objective = recon - weight * length, so recon is recoverable exactly
    e.score.recon = e.score.objective + cfg.length_weight * double(e.score.length);
    store.map_[Key{e.shape_id, int(e.source)}] = std::move(e);
  }
  return store;
}

}  // namespace coref
