#include "coref/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "coref/dataset.hpp"
#include "coref/diff.hpp"
#include "coref/executor.hpp"
#include "coref/graft.hpp"
#include "coref/objective.hpp"
#include "coref/po.hpp"
#include "coref/prune.hpp"
#include "coref/render.hpp"
#include "coref/rng.hpp"
#include "coref/siri.hpp"
#include "coref/ttr.hpp"

namespace coref {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << content;
}

ExprPtr load_program(const std::string& path) {
  std::string text = read_file(path);
  return parse_program(text, infer_dim(text));
}

ObjectiveConfig make_obj(Dim dim, double alpha, const std::string& recon) {
  ObjectiveConfig cfg = ObjectiveConfig::defaults_for(dim);
  cfg.length_weight = alpha;
  if (recon == "iou")
    cfg.recon = ReconMetric::IoU;
  else if (recon == "chamfer")
    cfg.recon = ReconMetric::NegChamfer;
  else if (recon != "auto")
    throw CLI::ValidationError("--recon", "expected auto, iou or chamfer");
  return cfg;
}

json metrics_json(const OccupancyGrid& x, const Expr& z, const ObjectiveConfig& cfg) {
  OccupancyGrid ez = execute_hard(z, x.res());
  Score s = objective_given_exec(x, ez, program_length(z), cfg);
  return json{{"iou", iou(x, ez)},
              {"chamfer", chamfer(x, ez, cfg.chamfer_empty_penalty)},
              {"length", s.length},
              {"recon", s.recon},
              {"objective", s.objective}};
}

void add_config_option(CLI::App* cmd) {
  // Recognized for help only; run_cli expands the file into flags before
  // parsing so values behave exactly like command-line arguments.
  cmd->add_option("--config", "flat key=value file; flags given on the command line win")
      ->configurable(false);
  cmd->fallthrough();
}

// Expands "--config FILE" into "--key value" flags appended after the
// explicit arguments. Explicit flags win; unknown keys surface as ordinary
// unknown-option usage errors.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string config_path;
  std::vector<std::string> out;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ValidationError("--config", "missing file name");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (config_path.empty()) return out;
  std::ifstream f(config_path);
  if (!f) throw std::runtime_error("cannot open config: " + config_path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--config",
                                 "line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      size_t b = s.find_first_not_of(" \t\r");
      size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw CLI::ValidationError("--config", "line " + std::to_string(lineno) + ": empty key");
    std::string flag = "--" + key;
    bool given = false;
    for (const auto& arg : out)
      if (arg == flag || arg.rfind(flag + "=", 0) == 0) given = true;
    if (given) continue;
    out.push_back(flag);
    out.push_back(value);
  }
  return out;
}

struct GlobalOpts {
  uint64_t seed = 0;
  int threads = 0;
};

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"coref: CSG program inference by search and code rewriting"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "master random seed")->envname("COREF_SEED");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");

  // gen-data ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "sample random programs and write grids");
  int gen_dim = 2, gen_count = 10, gen_depth = 3, gen_res = 0;
  std::string gen_out;
  gen->add_option("--dim", gen_dim, "2 or 3")->check(CLI::IsMember({2, 3}));
  gen->add_option("--count", gen_count, "number of shapes")->check(CLI::PositiveNumber);
  gen->add_option("--depth-max", gen_depth, "maximum boolean depth");
  gen->add_option("--res", gen_res, "grid resolution (0 = 64/32 default)");
  gen->add_option("--out-dir", gen_out, "output directory")->required();
  add_config_option(gen);
  gen->callback([&] {
    Dim d = gen_dim == 2 ? Dim::TwoD : Dim::ThreeD;
    auto res = OccupancyGrid::default_res(d);
    if (gen_res > 0) res = {gen_res, gen_res, d == Dim::ThreeD ? gen_res : 1};
    DatasetManifest m = gen_data(d, gen_count, gen_depth, g.seed, gen_out, res);
    std::cout << m.root << "/manifest.txt with " << m.entries.size() << " shapes\n";
  });

  // execute -----------------------------------------------------------------
  auto* exec = app.add_subcommand("execute", "run a program to an occupancy grid");
  std::string exec_prog, exec_out;
  int exec_res = 0;
  exec->add_option("--program", exec_prog)->required();
  exec->add_option("--res", exec_res, "per-axis resolution (0 = default)");
  exec->add_option("--out", exec_out)->required();
  add_config_option(exec);
  exec->callback([&] {
    ExprPtr z = load_program(exec_prog);
    auto res = OccupancyGrid::default_res(z->dim);
    if (exec_res > 0) res = {exec_res, exec_res, z->dim == Dim::ThreeD ? exec_res : 1};
    save_grid(exec_out, execute_hard(*z, res));
  });

  // render ------------------------------------------------------------------
  auto* rend = app.add_subcommand("render", "write a grid as PGM / voxel text");
  std::string rend_grid, rend_prog, rend_out;
  int rend_res = 0;
  rend->add_option("--grid", rend_grid, "grid file");
  rend->add_option("--program", rend_prog, "program file (executed first)");
  rend->add_option("--res", rend_res);
  rend->add_option("--out", rend_out)->required();
  add_config_option(rend);
  rend->callback([&] {
    if (rend_grid.empty() == rend_prog.empty())
      throw CLI::ValidationError("render", "give exactly one of --grid / --program");
    OccupancyGrid grid;
    if (!rend_grid.empty()) {
      grid = load_grid(rend_grid);
    } else {
      ExprPtr z = load_program(rend_prog);
      auto res = OccupancyGrid::default_res(z->dim);
      if (rend_res > 0) res = {rend_res, rend_res, z->dim == Dim::ThreeD ? rend_res : 1};
      grid = execute_hard(*z, res);
    }
    render_to_file(grid, rend_out);
  });

  // eval --------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "score programs against target grids");
  std::vector<std::string> ev_progs, ev_targets;
  double ev_alpha = 0.015;
  std::string ev_recon = "auto";
  ev->add_option("--program", ev_progs)->required();
  ev->add_option("--target", ev_targets)->required();
  ev->add_option("--alpha", ev_alpha);
  ev->add_option("--recon", ev_recon, "auto | iou | chamfer");
  add_config_option(ev);
  ev->callback([&] {
    if (ev_progs.size() != ev_targets.size())
      throw CLI::ValidationError("eval", "--program and --target counts differ");
    std::cout << "program,target,iou,chamfer,length,objective\n";
    for (size_t i = 0; i < ev_progs.size(); ++i) {
      ExprPtr z = load_program(ev_progs[i]);
      OccupancyGrid x = load_grid(ev_targets[i]);
      ObjectiveConfig cfg = make_obj(z->dim, ev_alpha, ev_recon);
      OccupancyGrid ez = execute_hard(*z, x.res());
      Score s = objective_given_exec(x, ez, program_length(*z), cfg);
      char buf[160];
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%lld,%.9g", iou(x, ez),
                    chamfer(x, ez, cfg.chamfer_empty_penalty), (long long)s.length,
                    s.objective);
      std::cout << ev_progs[i] << ',' << ev_targets[i] << ',' << buf << '\n';
    }
  });

  // po ----------------------------------------------------------------------
  auto* po = app.add_subcommand("po", "parameter-optimization rewrite");
  std::string po_prog, po_target, po_out, po_recon = "auto";
  POConfig po_cfg;
  double po_alpha = 0.015;
  po->add_option("--program", po_prog)->required();
  po->add_option("--target", po_target)->required();
  po->add_option("--steps", po_cfg.steps);
  po->add_option("--lr", po_cfg.lr);
  po->add_option("--subsample", po_cfg.subsample, "cells per step (0 = all)");
  po->add_option("--sharp-lo", po_cfg.sharpness_lo);
  po->add_option("--sharp-hi", po_cfg.sharpness_hi);
  po->add_option("--alpha", po_alpha);
  po->add_option("--recon", po_recon);
  po->add_option("--out", po_out, "write the resulting program here");
  add_config_option(po);
  po->callback([&] {
    ExprPtr z = load_program(po_prog);
    OccupancyGrid x = load_grid(po_target);
    ObjectiveConfig obj = make_obj(z->dim, po_alpha, po_recon);
    po_cfg.seed = g.seed;
    auto result = rewrite_po(x, z, po_cfg, obj);
    ExprPtr final_prog = result ? *result : z;
    json j{{"rewriter", "po"},
           {"accepted", bool(result)},
           {"before", metrics_json(x, *z, obj)},
           {"after", metrics_json(x, *final_prog, obj)},
           {"program", print_program(*final_prog)}};
    std::cout << j.dump() << '\n';
    if (!po_out.empty()) write_file(po_out, print_program(*final_prog) + "\n");
  });

  // cp ----------------------------------------------------------------------
  auto* cp = app.add_subcommand("cp", "code-pruning rewrite");
  std::string cp_prog, cp_target, cp_out, cp_recon = "auto";
  double cp_alpha = 0.015;
  int cp_tol = 0;
  bool cp_oracle = false;
  cp->add_option("--program", cp_prog)->required();
  cp->add_option("--target", cp_target)->required();
  cp->add_option("--alpha", cp_alpha);
  cp->add_option("--recon", cp_recon);
  cp->add_option("--tolerance", cp_tol, "grid cells allowed to differ in match tests");
  cp->add_flag("--oracle", cp_oracle, "exhaustive enumeration (<= 15 nodes)");
  cp->add_option("--out", cp_out);
  add_config_option(cp);
  cp->callback([&] {
    ExprPtr z = load_program(cp_prog);
    OccupancyGrid x = load_grid(cp_target);
    ObjectiveConfig obj = make_obj(z->dim, cp_alpha, cp_recon);
    ExprPtr final_prog;
    bool accepted;
    if (cp_oracle) {
      final_prog = oracle_cp(x, z, obj);
      accepted = !structural_equal(*final_prog, *z);
    } else {
      auto result = rewrite_cp(x, z, obj, cp_tol);
      accepted = bool(result);
      final_prog = result ? *result : z;
    }
    json j{{"rewriter", cp_oracle ? "cp-oracle" : "cp"},
           {"accepted", accepted},
           {"before", metrics_json(x, *z, obj)},
           {"after", metrics_json(x, *final_prog, obj)},
           {"program", print_program(*final_prog)}};
    std::cout << j.dump() << '\n';
    if (!cp_out.empty()) write_file(cp_out, print_program(*final_prog) + "\n");
  });

  // cg ----------------------------------------------------------------------
  auto* cg = app.add_subcommand("cg", "code-grafting rewrite");
  std::string cg_prog, cg_target, cg_cache, cg_out, cg_recon = "auto";
  double cg_alpha = 0.015;
  int cg_k = 8, cg_max_repl = 4;
  cg->add_option("--program", cg_prog)->required();
  cg->add_option("--target", cg_target)->required();
  cg->add_option("--cache", cg_cache)->required();
  cg->add_option("--k", cg_k, "retrieval candidates per site");
  cg->add_option("--max-repl", cg_max_repl);
  cg->add_option("--alpha", cg_alpha);
  cg->add_option("--recon", cg_recon);
  cg->add_option("--out", cg_out);
  add_config_option(cg);
  cg->callback([&] {
    ExprPtr z = load_program(cg_prog);
    OccupancyGrid x = load_grid(cg_target);
    ObjectiveConfig obj = make_obj(z->dim, cg_alpha, cg_recon);
    SubexprCache cache = load_cache(cg_cache);
    auto result = rewrite_cg(x, z, cache, obj, cg_k, cg_max_repl);
    ExprPtr final_prog = result ? *result : z;
    json j{{"rewriter", "cg"},
           {"accepted", bool(result)},
           {"before", metrics_json(x, *z, obj)},
           {"after", metrics_json(x, *final_prog, obj)},
           {"program", print_program(*final_prog)}};
    std::cout << j.dump() << '\n';
    if (!cg_out.empty()) write_file(cg_out, print_program(*final_prog) + "\n");
  });

  // ttr ---------------------------------------------------------------------
  auto* ttr = app.add_subcommand("ttr", "greedy interleaved test-time rewriting");
  std::string ttr_prog, ttr_target, ttr_cache, ttr_out, ttr_recon = "auto";
  std::string ttr_order = "po,cp,cg";
  double ttr_alpha = 0.015;
  TTRConfig ttr_cfg;
  ttr->add_option("--program", ttr_prog)->required();
  ttr->add_option("--target", ttr_target)->required();
  ttr->add_option("--cache", ttr_cache, "sub-expression cache file (optional)");
  ttr->add_option("--k", ttr_cfg.k, "rounds of the rewriter family");
  ttr->add_option("--order", ttr_order, "comma list of po/cp/cg");
  ttr->add_option("--steps", ttr_cfg.po.steps, "PO steps");
  ttr->add_option("--alpha", ttr_alpha);
  ttr->add_option("--recon", ttr_recon);
  ttr->add_option("--out", ttr_out);
  add_config_option(ttr);
  ttr->callback([&] {
    ExprPtr z = load_program(ttr_prog);
    OccupancyGrid x = load_grid(ttr_target);
    ttr_cfg.obj = make_obj(z->dim, ttr_alpha, ttr_recon);
    ttr_cfg.order.clear();
    std::istringstream is(ttr_order);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      if (tok == "po") ttr_cfg.order.push_back(RewriterKind::PO);
      else if (tok == "cp") ttr_cfg.order.push_back(RewriterKind::CP);
      else if (tok == "cg") ttr_cfg.order.push_back(RewriterKind::CG);
      else throw CLI::ValidationError("--order", "expected po, cp or cg");
    }
    SubexprCache cache = ttr_cache.empty() ? SubexprCache::make(z->dim) : load_cache(ttr_cache);
    TTRResult result = ttr_run(x, z, cache, ttr_cfg);
    json trace = json::array();
    for (const auto& step : result.trace)
      trace.push_back(json{{"rewriter", rewriter_name(step.rw)},
                           {"input_fp", step.input_fp},
                           {"accepted", step.accepted},
                           {"objective_before", step.obj_before},
                           {"objective_after", step.obj_after},
                           {"millis", step.millis}});
    json j{{"before", metrics_json(x, *z, ttr_cfg.obj)},
           {"after", metrics_json(x, *result.program, ttr_cfg.obj)},
           {"trace", trace},
           {"program", print_program(*result.program)}};
    std::cout << j.dump() << '\n';
    if (!ttr_out.empty()) write_file(ttr_out, print_program(*result.program) + "\n");
  });

  // siri ----------------------------------------------------------------------
  auto* si = app.add_subcommand("siri", "bootstrapped search/rewrite/train loop");
  std::string si_mode = "siri", si_train, si_val, si_out = "history.csv";
  std::string si_source = "retriever", si_recon = "auto";
  LoopConfig si_cfg;
  double si_alpha = 0.015;
  int si_depth = 3, si_subset = 0;
  si->add_option("--mode", si_mode, "plad | p+r | siri");
  si->add_option("--rounds", si_cfg.rounds);
  si->add_option("--beam", si_cfg.beam);
  si->add_option("--frac-po", si_cfg.frac_po);
  si->add_option("--frac-cp", si_cfg.frac_cp);
  si->add_option("--frac-cg", si_cfg.frac_cg);
  si->add_option("--alpha", si_alpha);
  si->add_option("--recon", si_recon);
  si->add_option("--po-steps", si_cfg.po.steps);
  si->add_option("--cg-k", si_cfg.cg_k);
  si->add_option("--train-dir", si_train)->required();
  si->add_option("--val-dir", si_val);
  si->add_option("--train-subset", si_subset, "use only the first N train shapes");
  si->add_option("--source", si_source, "random | retriever");
  si->add_option("--depth-max", si_depth, "proposal sampler depth");
  si->add_option("--out", si_out, "history CSV path");
  add_config_option(si);
  si->callback([&] {
    if (si_mode == "plad") si_cfg.mode = Mode::PLAD;
    else if (si_mode == "p+r" || si_mode == "pr") si_cfg.mode = Mode::PPlusR;
    else if (si_mode == "siri") si_cfg.mode = Mode::SIRI;
    else throw CLI::ValidationError("--mode", "expected plad, p+r or siri");
    std::vector<Shape> train = load_shapes_dir(si_train);
    if (si_subset > 0 && si_subset < int(train.size())) train.resize(size_t(si_subset));
    std::vector<Shape> val;
    if (!si_val.empty()) val = load_shapes_dir(si_val);
    if (train.empty()) throw std::runtime_error("no training shapes");
    Dim d = train.front().grid.dim();
    si_cfg.obj = make_obj(d, si_alpha, si_recon);
    si_cfg.seed = g.seed;
    si_cfg.threads = g.threads;
    std::unique_ptr<ProposalSource> src;
    if (si_source == "random")
      src = std::make_unique<RandomSampler>(d, si_depth, g.seed);
    else if (si_source == "retriever")
      src = std::make_unique<MemorizingRetriever>(d, si_depth, g.seed);
    else
      throw CLI::ValidationError("--source", "expected random or retriever");
    RunResult result = run_loop(train, val, si_cfg, *src);
    write_file(si_out, history_csv(result.history));
    result.store.save(si_out + ".store.txt");
    save_cache(si_out + ".cache.txt", result.cache);
    std::cout << "wrote " << si_out << " (" << result.history.size() << " rounds)\n";
  });

  // cache-stats ---------------------------------------------------------------
  auto* cs = app.add_subcommand("cache-stats", "summarize a sub-expression cache");
  std::string cs_cache;
  cs->add_option("--cache", cs_cache)->required();
  add_config_option(cs);
  cs->callback([&] {
    SubexprCache cache = load_cache(cs_cache);
    double mean_len = 0;
    for (const auto& e : cache.entries) mean_len += double(e.length);
    if (!cache.entries.empty()) mean_len /= double(cache.entries.size());
    int64_t min_ham = -1;
    size_t n = cache.entries.size();
    if (n >= 2) {
      if (n <= 2000) {
        for (size_t i = 0; i < n; ++i)
          for (size_t j = i + 1; j < n; ++j) {
            int64_t h = cache.entries[i].bits.hamming(cache.entries[j].bits);
            if (min_ham < 0 || h < min_ham) min_ham = h;
          }
      } else {
        Rng rng(g.seed);
        for (int s = 0; s < 200000; ++s) {
          size_t i = size_t(rng.below(n)), j = size_t(rng.below(n));
          if (i == j) continue;
          int64_t h = cache.entries[i].bits.hamming(cache.entries[j].bits);
          if (min_ham < 0 || h < min_ham) min_ham = h;
        }
      }
    }
    std::cout << "entries " << n << '\n'
              << "dedup_threshold " << cache.dedup_threshold << '\n'
              << "capacity " << cache.capacity << '\n'
              << "mean_length " << mean_len << '\n'
              << "min_pairwise_hamming " << min_ham << '\n';
  });

  try {
    std::vector<std::string> expanded = expand_config(args);
    std::vector<std::string> rev(expanded.rbegin(), expanded.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n' << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace coref
