// tlra: command-line driver for the tensor low-rank approximation library.
//
// Exit codes: 0 success, 1 acceptance criteria failed, 2 parse error,
// 3 invalid parameters, 4 numerical failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acceptance/suite.hpp"
#include "tlra/curt.hpp"
#include "tlra/distsim.hpp"
#include "tlra/fro_lra.hpp"
#include "tlra/io.hpp"
#include "tlra/l1_lra.hpp"
#include "tlra/planted.hpp"
#include "tlra/streaming.hpp"

namespace fs = std::filesystem;
using namespace tlra;

namespace {

enum Exit { kOk = 0, kCriteriaFailed = 1, kParse = 2, kInvalid = 3, kNumerical = 4 };

struct Common {
  std::uint64_t seed = 0;
  bool reproducible = false;
};

struct FroOptions {
  std::string input;
  std::string norm = "fro";
  std::string mode = "quadratic";
  Index k = 1;
  double eps = 0.5;
  int trials = 9;
  Index s = 0;
  Index t = 0;
  std::string l1_sketch = "cauchy_dense";
  std::string out;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Applies SEED from the environment, which takes precedence over --seed.
std::uint64_t effective_seed(std::uint64_t flag) {
  const char* env = std::getenv("SEED");
  if (!env || !*env) return flag;
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(env, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != std::string(env).size()) throw InvalidParams(std::string("SEED is not an unsigned integer: ") + env);
  return v;
}

AlgoParams fro_params(const FroOptions& o, std::uint64_t seed) {
  AlgoParams p;
  p.k = o.k;
  p.eps = o.eps;
  p.trials = o.trials;
  p.s = o.s;
  p.t = o.t;
  p.seed = seed;
  return p;
}

/// Costs are always recomputed from the factors that are written out.
RunMeta finish(RunMeta meta, const Tensor3& a, const FactorTriple& f, const std::string& out, Clock::time_point t0) {
  CostReport c = residual_cost(a, f);
  meta.rank = f.rank();
  meta.cost_fro2 = c.fro2;
  meta.cost_l1 = c.l1;
  meta.extra["relative_fro"] = a.fro_norm2() > 0.0 ? std::sqrt(c.fro2 / a.fro_norm2()) : 0.0;
  meta.extra["dims"] = {a.dims().n1, a.dims().n2, a.dims().n3};
  meta.elapsed_ms = ms_since(t0);
  if (!out.empty()) {
    write_factors(out, f);
    write_meta(fs::path(out) / "meta.json", meta);
  }
  std::cout << meta.to_json().dump(2) << '\n';
  return meta;
}

// ---------------------------------------------------------------- decompose

int cmd_decompose(const FroOptions& o, const Common& c) {
  auto t0 = Clock::now();
  std::uint64_t seed = effective_seed(c.seed);
  Tensor3 a = read_tns(o.input);
  RunMeta meta;
  meta.k = o.k;
  meta.eps = o.eps;
  meta.seed = seed;
  meta.extra["trials"] = o.trials;
  FactorTriple f;
  if (o.norm == "l1") {
    L1Params p;
    p.k = o.k;
    p.trials = o.trials;
    p.s = o.s;
    p.t = o.t;
    p.seed = seed;
    p.sketch = sketch_kind_from_string(o.l1_sketch);
    L1Result r = l1_bicriteria(a, p);
    f = r.factors;
    meta.algo = "l1-bicriteria";
    meta.extra["trial_costs"] = r.trial_costs;
    meta.extra["best_trial"] = r.best_trial;
  } else if (o.norm == "fro") {
    AlgoParams p = fro_params(o, seed).resolved();
    meta.eps = p.eps;
    meta.extra["s"] = p.s;
    meta.extra["t"] = p.t;
    if (o.mode == "quadratic") {
      FroResult r = bicriteria_quadratic(a, p);
      f = r.factors;
      meta.extra["trial_costs"] = r.trial_costs;
      meta.extra["best_trial"] = r.best_trial;
    } else if (o.mode == "cubic") {
      CubicResult r = bicriteria_cubic(a, p);
      f = r.compressed();
      meta.extra["trial_costs"] = r.trial_costs;
      meta.extra["best_trial"] = r.best_trial;
    } else if (o.mode == "rank-k") {
      FroResult r = fro_rank_k(a, p);
      f = r.factors;
      meta.extra["trial_costs"] = r.trial_costs;
      meta.extra["best_trial"] = r.best_trial;
    } else {
      throw InvalidParams("unknown mode '" + o.mode + "'");
    }
    meta.algo = "fro-" + o.mode;
  } else {
    throw InvalidParams("unknown norm '" + o.norm + "'");
  }
  finish(meta, a, f, o.out, t0);
  return kOk;
}

// ---------------------------------------------------------------- curt / cur

nlohmann::json sample_json(const SamplingOperator& s) {
  return {{"indices", s.indices}, {"weights", s.weights}};
}

int cmd_curt(const FroOptions& o, const std::string& factors_dir, const Common& c) {
  auto t0 = Clock::now();
  std::uint64_t seed = effective_seed(c.seed);
  Tensor3 a = read_tns(o.input);
  FactorTriple start;
  if (!factors_dir.empty()) {
    start = read_factors(factors_dir);
  } else {
    // Seed the decomposition with the sketched rank-k factors.
    AlgoParams p = fro_params(o, derive_seed(seed, 1));
    start = fro_rank_k(a, p).factors;
  }
  CurtParams p;
  p.eps = o.eps;
  p.trials = o.trials;
  p.d = o.s;
  p.seed = seed;
  CurtResult r = curt_decompose(a, start, p);
  RunMeta meta;
  meta.algo = "curt";
  meta.k = start.rank();
  meta.eps = o.eps;
  meta.seed = seed;
  meta.extra["samples"] = {{"cols", sample_json(r.cols)}, {"rows", sample_json(r.rows)}, {"tubes", sample_json(r.tubes)}};
  meta.extra["trial_costs"] = r.trial_costs;
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_matrix(fs::path(o.out) / "C.txt", r.C);
    write_matrix(fs::path(o.out) / "R.txt", r.R);
    write_matrix(fs::path(o.out) / "T.txt", r.T);
  }
  finish(meta, a, r.factors(), o.out, t0);
  return kOk;
}

int cmd_cur(const std::string& input, Index k, double eps, const std::string& out, const Common& c) {
  auto t0 = Clock::now();
  std::uint64_t seed = effective_seed(c.seed);
  Matrix m = read_matrix(input);
  CurResult r = matrix_cur(m, k, eps, seed);
  Matrix res = r.C * r.U * r.R - m;
  RunMeta meta;
  meta.algo = "cur";
  meta.k = k;
  meta.eps = eps;
  meta.rank = k;
  meta.seed = seed;
  meta.cost_fro2 = res.squaredNorm();
  meta.cost_l1 = res.cwiseAbs().sum();
  meta.extra["samples"] = {{"cols", sample_json(r.cols)}, {"rows", sample_json(r.rows)}};
  meta.extra["dims"] = {m.rows(), m.cols()};
  meta.elapsed_ms = ms_since(t0);
  if (!out.empty()) {
    fs::create_directories(out);
    write_matrix(fs::path(out) / "C.txt", r.C);
    write_matrix(fs::path(out) / "U.txt", r.U);
    write_matrix(fs::path(out) / "R.txt", r.R);
    write_meta(fs::path(out) / "meta.json", meta);
  }
  std::cout << meta.to_json().dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- stream / distsim

Dims parse_dims(const std::vector<Index>& v) {
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw InvalidParams("--dims takes one or three values");
}

StreamMode stream_mode(const std::string& s) {
  if (s == "bicriteria" || s == "cubic") return StreamMode::bicriteria;
  if (s == "rank-k") return StreamMode::rank_k;
  throw InvalidParams("unknown mode '" + s + "'");
}

int cmd_stream(const FroOptions& o, const std::vector<Index>& dims, bool evaluate, const Common& c) {
  auto t0 = Clock::now();
  std::uint64_t seed = effective_seed(c.seed);
  Dims d = parse_dims(dims);
  AlgoParams p = fro_params(o, seed);
  p.trials = 1;
  StreamState st(d, p, seed);
  std::ifstream in(o.input);
  if (!in) throw ParseError("cannot open " + o.input, 0);
  UpdateReader reader(in);
  // The sketch state sees each update once. The side copy below exists only
  // to report the residual and is skipped with --no-eval.
  std::vector<Entry> seen;
  Update u;
  std::size_t count = 0;
  while (reader.next(u)) {
    try {
      st.update(u);
    } catch (const ShapeError& e) {
      throw ParseError(e.what(), reader.line());
    }
    if (evaluate) seen.push_back({u.i, u.j, u.l, u.delta});
    ++count;
  }
  StreamMode mode = stream_mode(o.mode);
  StreamResult r = st.finalize(mode);
  RunMeta meta;
  meta.algo = mode == StreamMode::bicriteria ? "stream-bicriteria" : "stream-rank-k";
  meta.k = o.k;
  meta.eps = o.eps;
  meta.seed = seed;
  meta.extra["updates"] = count;
  meta.extra["space_words"] = st.space_words();
  meta.extra["seed_words"] = st.seed_words();
  if (evaluate) {
    finish(meta, Tensor3::from_entries(d, std::move(seen)), r.factors, o.out, t0);
    return kOk;
  }
  meta.rank = r.factors.rank();
  meta.cost_fro2 = meta.cost_l1 = std::nan("");
  meta.elapsed_ms = ms_since(t0);
  if (!o.out.empty()) {
    write_factors(o.out, r.factors);
    write_meta(fs::path(o.out) / "meta.json", meta);
  }
  std::cout << meta.to_json().dump(2) << '\n';
  return kOk;
}

int cmd_distsim(const FroOptions& o, const std::vector<std::string>& parts, bool skip_upload,
                const std::string& ledger_path, const Common& c) {
  auto t0 = Clock::now();
  std::uint64_t seed = effective_seed(c.seed);
  std::vector<Tensor3> tensors;
  for (const std::string& path : parts) tensors.push_back(read_tns(path));
  AlgoParams p = fro_params(o, seed);
  p.trials = 1;
  DistOptions opts;
  opts.mode = stream_mode(o.mode);
  opts.skip_upload = skip_upload;
  DistResult r = distsim_run(tensors, p, seed, opts);
  std::string ledger = r.ledger.to_json();
  if (!ledger_path.empty()) std::ofstream(ledger_path) << ledger << '\n';
  RunMeta meta;
  meta.algo = opts.mode == StreamMode::rank_k ? "distsim-rank-k" : "distsim-bicriteria";
  meta.k = o.k;
  meta.eps = o.eps;
  meta.seed = seed;
  meta.extra["machines"] = tensors.size();
  meta.extra["ledger"] = nlohmann::json::parse(ledger);
  meta.extra["protocol_words"] = protocol_words(tensors.front().dims(), p.resolved(), static_cast<int>(tensors.size()), opts);
  // The global tensor is assembled here only to score the result.
  Tensor3 total = tensors.front();
  for (std::size_t i = 1; i < tensors.size(); ++i) total = total + tensors[i];
  if (skip_upload) {
    meta.cost_fro2 = meta.cost_l1 = std::nan("");
    meta.elapsed_ms = ms_since(t0);
    if (!o.out.empty()) {
      fs::create_directories(o.out);
      write_meta(fs::path(o.out) / "meta.json", meta);
    }
    std::cout << meta.to_json().dump(2) << '\n';
    return kOk;
  }
  finish(meta, total, r.factors, o.out, t0);
  return kOk;
}

// ---------------------------------------------------------------- bench

struct GenOptions {
  std::string kind;
  std::vector<Index> dims{60};
  Index k = 5;
  double noise = 0.1;
  double fraction = 0.01;
  double magnitude = 100.0;
  std::string out;
  std::string factors_out;
};

int cmd_gen(const GenOptions& g, const Common& c) {
  std::uint64_t seed = effective_seed(c.seed);
  if (g.out.empty()) throw InvalidParams("--out is required with --gen");
  nlohmann::json report{{"gen", g.kind}, {"k", g.k}, {"seed", seed}, {"out", g.out}};
  if (g.kind == "matrix") {
    if (g.dims.size() != 2) throw InvalidParams("--gen matrix takes --dims ROWS COLS");
    PlantedMatrix pm = planted_matrix(g.dims[0], g.dims[1], g.k, g.noise, seed);
    write_matrix(g.out, pm.matrix);
    report["noise_ratio"] = pm.low_rank.norm() > 0.0 ? pm.noise.norm() / pm.low_rank.norm() : 0.0;
  } else {
    Dims d = parse_dims(g.dims);
    PlantedTensor pt;
    if (g.kind == "planted")
      pt = planted_gaussian(d, g.k, g.noise, seed);
    else if (g.kind == "outliers")
      pt = planted_outliers(d, g.k, g.fraction, g.magnitude, seed);
    else
      throw InvalidParams("unknown generator '" + g.kind + "'");
    write_tns(g.out, pt.tensor);
    Tensor3 low = eval_factors(pt.factors);
    report["low_rank_fro"] = low.fro_norm();
    report["perturbation_fro"] = pt.perturbation.fro_norm();
    report["perturbation_l1"] = pt.perturbation.l1_norm();
    report["noise_ratio"] = low.fro_norm() > 0.0 ? pt.perturbation.fro_norm() / low.fro_norm() : 0.0;
    if (!g.factors_out.empty()) write_factors(g.factors_out, pt.factors);
  }
  std::cout << report.dump(2) << '\n';
  return kOk;
}

int cmd_suite(const std::string& suite, const std::vector<std::string>& only, const std::string& json_out,
              const Common& c) {
  if (suite != "acceptance") throw InvalidParams("unknown suite '" + suite + "'");
  std::uint64_t seed = effective_seed(c.seed);
  auto results = acceptance::run_suite(only, seed, false);
  for (const auto& r : results) std::cerr << acceptance::format_line(r) << '\n';
  nlohmann::json j{{"suite", suite}, {"seed", seed}, {"results", acceptance::to_json(results)}};
  bool all = true;
  for (const auto& r : results) all = all && r.pass;
  j["all_passed"] = all;
  if (!json_out.empty()) std::ofstream(json_out) << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return all ? kOk : kCriteriaFailed;
}

void add_fro_flags(CLI::App* cmd, FroOptions& o) {
  cmd->add_option("--k", o.k, "Target rank")->check(CLI::NonNegativeNumber);
  cmd->add_option("--eps", o.eps, "Accuracy parameter in (0,1)");
  cmd->add_option("--trials", o.trials, "Independent repetitions; the best is kept")->check(CLI::PositiveNumber);
  cmd->add_option("--s", o.s, "Column sketch width (0: default)");
  cmd->add_option("--t", o.t, "Row reduction width (0: default)");
  cmd->add_option("--out", o.out, "Output directory for factor files and meta.json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketching-based low-rank approximation of third-order tensors"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Common common;
  app.add_option("--seed", common.seed, "Root seed (the SEED environment variable overrides it)");
  app.add_flag("--reproducible", common.reproducible, "Run every reduction sequentially in a fixed order");

  FroOptions dec;
  auto* decompose = app.add_subcommand("decompose", "Low-rank approximation of a .tns tensor");
  decompose->add_option("input", dec.input, ".tns input")->required();
  decompose->add_option("--norm", dec.norm, "fro or l1")->check(CLI::IsMember({"fro", "l1"}));
  decompose->add_option("--mode", dec.mode, "rank-k, quadratic or cubic (Frobenius only)")
      ->check(CLI::IsMember({"rank-k", "quadratic", "cubic"}));
  decompose->add_option("--l1-sketch", dec.l1_sketch, "cauchy_dense or cauchy_sparse")
      ->check(CLI::IsMember({"cauchy_dense", "cauchy_sparse"}));
  add_fro_flags(decompose, dec);

  FroOptions ct;
  std::string curt_factors;
  auto* curt = app.add_subcommand("curt", "CURT decomposition of a .tns tensor");
  curt->add_option("input", ct.input, ".tns input")->required();
  curt->add_option("--factors", curt_factors, "Directory with U.txt V.txt W.txt to start from");
  add_fro_flags(curt, ct);
  curt->get_option("--s")->description("Fibers per mode (0: default budget)");

  std::string cur_input, cur_out;
  Index cur_k = 1;
  double cur_eps = 0.5;
  auto* cur = app.add_subcommand("cur", "CUR decomposition of a matrix text file");
  cur->add_option("input", cur_input, "Matrix text input")->required();
  cur->add_option("--k", cur_k, "Target rank")->check(CLI::NonNegativeNumber);
  cur->add_option("--eps", cur_eps, "Accuracy parameter in (0,1)");
  cur->add_option("--out", cur_out, "Output directory");

  FroOptions so;
  so.mode = "bicriteria";
  std::vector<Index> stream_dims;
  bool no_eval = false;
  auto* stream = app.add_subcommand("stream", "One pass over a turnstile update file");
  stream->add_option("input", so.input, "Update file: lines \"i j l delta\", 1-based")->required();
  stream->add_option("--dims", stream_dims, "n, or n1 n2 n3")->required()->expected(1, 3);
  stream->add_option("--mode", so.mode, "bicriteria or rank-k")->check(CLI::IsMember({"bicriteria", "rank-k"}));
  stream->add_flag("--no-eval", no_eval, "Do not keep a copy of the updates for reporting the residual");
  add_fro_flags(stream, so);
  stream->remove_option(stream->get_option("--trials"));

  FroOptions dso;
  dso.mode = "rank-k";
  std::vector<std::string> parts;
  bool skip_upload = false;
  std::string ledger_path;
  auto* dist = app.add_subcommand("distsim", "Simulated distributed protocol over partition files");
  dist->add_option("partitions", parts, ".tns partitions, one per machine")->required();
  dist->add_option("--mode", dso.mode, "rank-k or bicriteria")->check(CLI::IsMember({"rank-k", "bicriteria"}));
  dist->add_flag("--skip-upload", skip_upload, "Leave factor shares on the machines");
  dist->add_option("--ledger", ledger_path, "Write the communication ledger JSON here");
  add_fro_flags(dist, dso);
  dist->remove_option(dist->get_option("--trials"));

  GenOptions gen;
  std::string suite, suite_json;
  std::vector<std::string> only;
  auto* bench = app.add_subcommand("bench", "Generate planted instances or run the acceptance suite");
  auto* gen_opt = bench->add_option("--gen", gen.kind, "planted, outliers or matrix")
                      ->check(CLI::IsMember({"planted", "outliers", "matrix"}));
  auto* suite_opt = bench->add_option("--suite", suite, "acceptance")->check(CLI::IsMember({"acceptance"}));
  gen_opt->excludes(suite_opt);
  bench->add_option("--dims,--n", gen.dims, "n, n1 n2 n3, or rows cols for a matrix")->expected(1, 3);
  bench->add_option("--k", gen.k, "Planted rank")->check(CLI::NonNegativeNumber);
  bench->add_option("--noise", gen.noise, "||noise||_F / ||low-rank part||_F");
  bench->add_option("--fraction", gen.fraction, "Fraction of entries hit by outliers");
  bench->add_option("--magnitude", gen.magnitude, "Outlier magnitude");
  bench->add_option("--out", gen.out, "Output file for the generated instance");
  bench->add_option("--factors-out", gen.factors_out, "Directory for the planted factors");
  bench->add_option("--only", only, "Criterion ids to run (default: all)")->delimiter(',');
  bench->add_option("--json", suite_json, "Also write the suite report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }
  set_reproducible(common.reproducible);

  try {
    if (*decompose) return cmd_decompose(dec, common);
    if (*curt) return cmd_curt(ct, curt_factors, common);
    if (*cur) return cmd_cur(cur_input, cur_k, cur_eps, cur_out, common);
    if (*stream) return cmd_stream(so, stream_dims, !no_eval, common);
    if (*dist) return cmd_distsim(dso, parts, skip_upload, ledger_path, common);
    if (*bench) {
      if (!gen.kind.empty()) return cmd_gen(gen, common);
      if (!suite.empty()) return cmd_suite(suite, only, suite_json, common);
      throw InvalidParams("bench needs --gen or --suite");
    }
  } catch (const ParseError& e) {
    std::cerr << "tlra: parse error: " << e.what() << '\n';
    return kParse;
  } catch (const InvalidParams& e) {
    std::cerr << "tlra: invalid parameters: " << e.what() << '\n';
    return kInvalid;
  } catch (const ShapeError& e) {
    std::cerr << "tlra: invalid parameters: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "tlra: numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
