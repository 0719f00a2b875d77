#include "lowrank/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "lowrank/errors.hpp"
#include "lowrank/harness.hpp"
#include "lowrank/io.hpp"
#include "lowrank/kernels.hpp"
#include "lowrank/random.hpp"
#include "lowrank/rip.hpp"

namespace lowrank::cli {

namespace {

const CLI::Range kAtLeastOne(1, std::numeric_limits<int>::max());

using json = nlohmann::json;

// --config reader: one JSON object, top-level keys for options of the main
// app and one nested object per subcommand, e.g.
//   {"solve": {"m": 6, "n": 6, "rank": 1, "p": 40, "seed": 7}}
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string prefix) const override {
    json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames()[0];
      if (opt->count() > 0) {
        const auto values = opt->results();
        j[name] = values.size() == 1 ? json(values[0]) : json(values);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      j[sub->get_name()] = json::parse(to_config(sub, default_also, false, prefix));
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("--config: not valid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) throw CLI::ConversionError("--config: top level must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static void collect(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_object()) {
        auto sub = parents;
        sub.push_back(it.key());
        collect(*it, sub, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it->is_array()) {
        for (const auto& v : *it) item.inputs.push_back(scalar(v, it.key()));
      } else {
        item.inputs.push_back(scalar(*it, it.key()));
      }
      items.push_back(std::move(item));
    }
  }

  static std::string scalar(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("--config: unsupported value for '" + key + "'");
  }
};

struct Common {
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  int jobs = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Base seed; every random draw derives from it")->capture_default_str();
  sub->add_option("--out", c.out, "Output file (default: standard output)");
  sub->add_option("--jobs", c.jobs, "Worker threads, 0 = all cores")
      ->envname("LOWRANK_JOBS")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

struct SolverFlags {
  std::string solver = "alm";
  SolverOptions options;
  std::string step_schedule = "harmonic";
};

void add_solver(CLI::App* sub, SolverFlags& s) {
  AlmConfig& a = s.options.alm;
  SubgradientConfig& g = s.options.subgradient;
  sub->add_option("--solver", s.solver, "Solver")
      ->check(CLI::IsMember({"alm", "subgradient"}))
      ->capture_default_str();
  sub->add_option("--factor-rank", a.factor_rank, "ALM factor rank r_d, 0 = automatic")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--sigma0", a.sigma0, "ALM initial penalty")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--sigma-growth", a.sigma_growth, "ALM penalty growth factor")
      ->check(CLI::Range(1.0, 1e12))
      ->capture_default_str();
  sub->add_option("--sigma-max", a.sigma_max, "ALM penalty cap")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--max-outer", a.max_outer, "ALM multiplier updates")->check(kAtLeastOne)->capture_default_str();
  sub->add_option("--inner-grad-tol", a.inner_grad_tol, "ALM inner gradient tolerance (relative)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--inner-max-iters", a.inner_max_iters, "ALM inner iteration cap")
      ->check(kAtLeastOne)
      ->capture_default_str();
  sub->add_option("--max-iters", g.max_iters, "Subgradient iteration cap")->check(kAtLeastOne)->capture_default_str();
  sub->add_option("--step0", g.step0, "Subgradient initial step")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--step-schedule", s.step_schedule, "Subgradient step rule, step0/k or step0/sqrt(k)")
      ->check(CLI::IsMember({"harmonic", "inverse_sqrt"}))
      ->capture_default_str();
  sub->add_flag("--polar", g.use_polar_iteration, "Subgradient via the Halley polar iteration");
  sub->add_option("--feas-tol", a.feas_tol, "Feasibility tolerance relative to max(1, ||b||)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

SolverOptions finish_solver(const SolverFlags& s) {
  SolverOptions o = s.options;
  o.kind = parse_solver(s.solver);
  o.subgradient.feas_tol = o.alm.feas_tol;
  o.subgradient.step_schedule = s.step_schedule == "inverse_sqrt" ? StepSchedule::inverse_sqrt : StepSchedule::harmonic;
  return o;
}

const std::vector<std::string>& ensemble_names() {
  static const std::vector<std::string> names = {"gaussian",   "bernoulli",         "sparse_ternary",
                                                 "projection", "factored_gaussian", "completion"};
  return names;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ArgumentError(message);
}

void check_ensemble_size(EnsembleKind kind, Index m, Index n, Index p) {
  if (kind == EnsembleKind::projection || kind == EnsembleKind::completion) {
    require(p <= m * n, std::string(to_string(kind)) + " needs p <= m*n (p = " + std::to_string(p) +
                            ", m*n = " + std::to_string(m * n) + ")");
  }
}

// Writes to --out or the given stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path), fallback_(fallback) {}

  void write(const std::string& text) {
    if (path_.empty()) {
      fallback_ << text;
      return;
    }
    std::ofstream f(path_, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path_ + ": cannot open for writing");
    f << text;
    if (!f) throw IoError(path_ + ": write failed");
  }

 private:
  std::string path_;
  std::ostream& fallback_;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

void apply_jobs(int jobs) {
  if (jobs > 0) kernels::set_threads(jobs);
}

// ---- solve

struct SolveCmd {
  Common common;
  SolverFlags solver;
  Index m = 6;
  Index n = 6;
  int rank = 1;
  Index p = 40;
  std::string ensemble = "gaussian";
  std::string target;
  std::string x_out;
};

int run_solve(const SolveCmd& c, std::ostream& out) {
  const EnsembleKind kind = parse_ensemble(c.ensemble);
  const SolverOptions solver = finish_solver(c.solver);

  Matrix truth;
  if (!c.target.empty()) {
    truth = io::read_image(c.target);
  } else {
    require(c.rank >= 1 && c.rank <= std::min(c.m, c.n), "--rank must lie in [1, min(m, n)]");
    Rng rng(derive_seed(c.common.seed, {0}));
    truth = rng.gaussian(c.m, c.rank) * rng.gaussian(c.n, c.rank).transpose();
  }
  const Index m = truth.rows();
  const Index n = truth.cols();
  check_ensemble_size(kind, m, n, c.p);

  const MeasurementOp op = sample({kind, m, n, c.p, derive_seed(c.common.seed, {1})});
  const Vector b = op.apply(truth);
  const SolveResult res = run_solver(op, b, solver, derive_seed(c.common.seed, {2}));

  json j;
  j["command"] = "solve";
  j["m"] = m;
  j["n"] = n;
  j["p"] = c.p;
  j["rank"] = numeric_rank(truth, 1e-9);
  j["ensemble"] = c.ensemble;
  j["solver"] = c.solver.solver;
  j["seed"] = c.common.seed;
  j["rel_error"] = (res.x - truth).norm() / std::max(truth.norm(), 1e-300);
  j["objective"] = res.objective;
  j["truth_nuclear_norm"] = nuclear_norm(truth);
  j["feas_residual"] = res.feas_residual;
  j["iterations"] = res.iterations;
  j["status"] = std::string(to_string(res.status));
  if (res.certificate) {
    j["dual_opnorm"] = res.certificate->dual_opnorm;
    j["duality_gap"] = duality_gap(op, res.x, b, res.certificate->z);
    if (res.certificate->multiplier_map_rank >= 0) j["multiplier_map_rank"] = res.certificate->multiplier_map_rank;
  }
  Sink(c.common.out, out).write(dump(j));
  if (!c.x_out.empty()) {
    std::ostringstream text;
    io::write_matrix_text(text, res.x);
    Sink(c.x_out, out).write(text.str());
  }
  return res.status == SolveStatus::converged ? kExitOk : kExitRuntime;
}

// ---- rip

struct RipCmd {
  Common common;
  Index m = 10;
  Index n = 10;
  Index p = 400;
  int r = 1;
  int trials = 500;
  std::string ensemble = "gaussian";
  bool refine = false;
  int r_max = 0;
};

int run_rip(const RipCmd& c, std::ostream& out) {
  const EnsembleKind kind = parse_ensemble(c.ensemble);
  require(c.r >= 1 && c.r <= std::min(c.m, c.n), "--r must lie in [1, min(m, n)]");
  require(c.r_max >= 0 && c.r_max <= std::min(c.m, c.n), "--r-max must lie in [0, min(m, n)]");
  check_ensemble_size(kind, c.m, c.n, c.p);

  const MeasurementOp op = sample({kind, c.m, c.n, c.p, derive_seed(c.common.seed, {0})});
  const RipEstimate est = estimate_delta_lower(op, c.r, c.trials, derive_seed(c.common.seed, {1}), c.refine);

  double sum = 0.0;
  double lo = est.sample_gains.empty() ? 0.0 : est.sample_gains.front();
  double hi = lo;
  for (const double g : est.sample_gains) {
    sum += g * g;
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }

  json j;
  j["command"] = "rip";
  j["m"] = c.m;
  j["n"] = c.n;
  j["p"] = c.p;
  j["r"] = c.r;
  j["ensemble"] = c.ensemble;
  j["seed"] = c.common.seed;
  j["trials"] = est.trials;
  j["refined"] = est.refined;
  j["delta_lower"] = est.delta_lower;
  j["mean_squared_gain"] = est.sample_gains.empty() ? 0.0 : sum / static_cast<double>(est.sample_gains.size());
  j["min_gain"] = lo;
  j["max_gain"] = hi;
  if (c.r_max > 0) {
    j["delta_lower_by_rank"] = monotonicity_check(op, c.r_max, c.trials, derive_seed(c.common.seed, {2}));
  }
  Sink(c.common.out, out).write(dump(j));
  return kExitOk;
}

// ---- phase-grid

struct GridCmd {
  Common common;
  SolverFlags solver;
  Index n = 20;
  int trials = 10;
  std::vector<Index> p_values;
  int p_steps = 20;
  std::string ensemble = "gaussian";
  double success_tol = kDefaultSuccessTol;
  bool timing = false;
};

int run_grid(const GridCmd& c, std::ostream& out) {
  PhaseGridSpec spec;
  spec.n = c.n;
  spec.trials_per_cell = c.trials;
  spec.p_values = c.p_values.empty() ? default_p_values(c.n, c.p_steps) : c.p_values;
  spec.ensemble = parse_ensemble(c.ensemble);
  spec.solver = finish_solver(c.solver);
  spec.base_seed = c.common.seed;
  spec.success_tol = c.success_tol;
  spec.record_time = c.timing;
  for (const Index p : spec.p_values) {
    require(p >= 1 && p <= c.n * c.n, "--p-values entries must lie in [1, n^2]");
  }

  if (c.common.out.empty()) {
    const PhaseGridResult result = run_phase_grid(spec);
    io::write_grid_csv(out, result.records);
    return kExitOk;
  }
  const PhaseGridResult result = run_phase_grid(spec, std::filesystem::path(c.common.out));
  json rates = json::array();
  for (const auto& [cell, rate] : result.rates) rates.push_back({{"p", cell.first}, {"r", cell.second}, {"rate", rate}});
  out << dump({{"command", "phase-grid"}, {"csv", c.common.out}, {"records", result.records.size()}, {"rates", rates}});
  return kExitOk;
}

// ---- image-recover

struct ImageCmd {
  Common common;
  SolverFlags solver;
  std::string image;
  std::vector<Index> p_values = {700, 1000, 1200, 1350};
  std::string ensemble = "gaussian";
};

int run_image(const ImageCmd& c, std::ostream& out) {
  const Matrix image = c.image.empty() ? synthetic_logo() : io::read_image(c.image);
  const EnsembleKind kind = parse_ensemble(c.ensemble);
  for (const Index p : c.p_values) {
    require(p >= 1, "--p-values entries must be positive");
    check_ensemble_size(kind, image.rows(), image.cols(), p);
  }
  const auto points = run_image_recovery(image, c.p_values, kind, finish_solver(c.solver), c.common.seed);

  json j;
  j["command"] = "image-recover";
  j["image"] = c.image.empty() ? "synthetic_logo" : c.image;
  j["rows"] = image.rows();
  j["cols"] = image.cols();
  j["rank"] = numeric_rank(image, 1e-9);
  j["ensemble"] = c.ensemble;
  j["solver"] = c.solver.solver;
  j["seed"] = c.common.seed;
  j["points"] = json::array();
  for (const auto& pt : points) {
    j["points"].push_back({{"p", pt.p}, {"rel_error", pt.rel_error}, {"status", std::string(to_string(pt.status))}});
  }
  Sink(c.common.out, out).write(dump(j));
  return kExitOk;
}

// ---- hankel

struct HankelCmd {
  Common common;
  SolverFlags solver;
  int order = 1;
  Index horizon = 8;
  Index p = 6;
};

int run_hankel(const HankelCmd& c, std::ostream& out) {
  const HankelReport rep = run_hankel_demo(c.order, c.horizon, c.p, c.common.seed, finish_solver(c.solver));
  json j;
  j["command"] = "hankel";
  j["order"] = rep.order;
  j["horizon"] = rep.horizon;
  j["p"] = rep.p;
  j["seed"] = c.common.seed;
  j["true_rank"] = rep.true_rank;
  j["recovered_rank"] = rep.recovered_rank;
  j["impulse_rel_error"] = rep.impulse_rel_error;
  j["observed_rel_error"] =
      (rep.recovered.head(c.horizon + 1) - rep.impulse.head(c.horizon + 1)).norm() / rep.impulse.head(c.horizon + 1).norm();
  j["status"] = std::string(to_string(rep.status));
  j["impulse"] = vector_json(rep.impulse);
  j["recovered"] = vector_json(rep.recovered);
  Sink(c.common.out, out).write(dump(j));
  return kExitOk;
}

// ---- ensemble-dump

struct DumpCmd {
  Common common;
  Index m = 4;
  Index n = 4;
  Index p = 8;
  std::string ensemble = "gaussian";
};

int run_dump(const DumpCmd& c, std::ostream& out) {
  const EnsembleKind kind = parse_ensemble(c.ensemble);
  check_ensemble_size(kind, c.m, c.n, c.p);
  const MeasurementOp op = sample({kind, c.m, c.n, c.p, c.common.seed});
  const kernels::RowMatrix a = op.to_dense();
  json rows = json::array();
  for (Index i = 0; i < a.rows(); ++i) rows.push_back(std::vector<double>(a.row(i).data(), a.row(i).data() + a.cols()));
  json j;
  j["command"] = "ensemble-dump";
  j["m"] = c.m;
  j["n"] = c.n;
  j["p"] = c.p;
  j["ensemble"] = c.ensemble;
  j["seed"] = c.common.seed;
  j["layout"] = "row i acts on vec(X), column-stacked: entry (r, c) of X sits at index c*m + r";
  j["a"] = std::move(rows);
  Sink(c.common.out, out).write(dump(j));
  return kExitOk;
}

void add_size(CLI::App* sub, Index& m, Index& n, Index& p) {
  sub->add_option("--m", m, "Rows of X")->check(kAtLeastOne)->capture_default_str();
  sub->add_option("--n", n, "Columns of X")->check(kAtLeastOne)->capture_default_str();
  sub->add_option("--p", p, "Number of measurements")->check(kAtLeastOne)->capture_default_str();
}

void add_ensemble(CLI::App* sub, std::string& e) {
  sub->add_option("--ensemble", e, "Measurement ensemble")
      ->check(CLI::IsMember(ensemble_names()))
      ->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank recovery by nuclear norm minimization", "lowrank"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values; flags on the command line win");
  app.require_subcommand(1);
  app.fallthrough();

  SolveCmd solve;
  CLI::App* s = app.add_subcommand("solve", "Recover a planted low-rank matrix (or --target) from random measurements");
  add_size(s, solve.m, solve.n, solve.p);
  s->add_option("--rank", solve.rank, "Rank of the planted matrix")->check(kAtLeastOne)->capture_default_str();
  add_ensemble(s, solve.ensemble);
  s->add_option("--target", solve.target, "Matrix text or PGM file to recover instead of a planted one")
      ->check(CLI::ExistingFile);
  s->add_option("--x-out", solve.x_out, "Write the recovered matrix as text");
  add_solver(s, solve.solver);
  add_common(s, solve.common);

  RipCmd rip;
  CLI::App* r = app.add_subcommand("rip", "Empirical lower bound on the restricted isometry constant");
  add_size(r, rip.m, rip.n, rip.p);
  r->add_option("--r", rip.r, "Rank of the test matrices")->check(kAtLeastOne)->capture_default_str();
  r->add_option("--trials", rip.trials, "Random rank-r samples")->check(kAtLeastOne)->capture_default_str();
  add_ensemble(r, rip.ensemble);
  r->add_flag("--refine", rip.refine, "Alternating ascent from the worst sample");
  r->add_option("--r-max", rip.r_max, "Also report nested lower bounds for ranks 1..r-max")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  add_common(r, rip.common);

  GridCmd grid;
  CLI::App* g = app.add_subcommand("phase-grid", "Recovery rates over (p, r) for n x n matrices (CSV)");
  g->add_option("--n", grid.n, "Matrix size")->check(kAtLeastOne)->capture_default_str();
  g->add_option("--trials", grid.trials, "Trials per (p, r) cell")->check(kAtLeastOne)->capture_default_str();
  g->add_option("--p-values", grid.p_values, "Measurement counts (default: n^2/steps, ..., n^2)")->delimiter(',');
  g->add_option("--p-steps", grid.p_steps, "Steps for the default p grid")->check(kAtLeastOne)->capture_default_str();
  add_ensemble(g, grid.ensemble);
  g->add_option("--success-tol", grid.success_tol, "Relative Frobenius error counted as recovery")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  g->add_flag("--timing", grid.timing, "Record wall times (otherwise 0, so output is byte-stable)");
  add_solver(g, grid.solver);
  add_common(g, grid.common);
  g->get_option("--out")->description("CSV file; existing records are kept and not rerun (default: standard output)");

  ImageCmd image;
  CLI::App* im = app.add_subcommand("image-recover", "Relative error against p for a fixed image (JSON)");
  im->add_option("--image", image.image, "Matrix text or PGM file (default: the built-in rank-5 46x81 logo)")
      ->check(CLI::ExistingFile);
  im->add_option("--p-values", image.p_values, "Measurement counts")->delimiter(',')->capture_default_str();
  add_ensemble(im, image.ensemble);
  add_solver(im, image.solver);
  add_common(im, image.common);

  HankelCmd hankel;
  CLI::App* h = app.add_subcommand("hankel", "Minimum-order realization from random input/output data");
  h->add_option("--order", hankel.order, "System order")->check(kAtLeastOne)->capture_default_str();
  h->add_option("--horizon", hankel.horizon, "N; the Hankel matrix is (N+1) x (N+1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  h->add_option("--p", hankel.p, "Number of input/output experiments")->check(kAtLeastOne)->capture_default_str();
  add_solver(h, hankel.solver);
  add_common(h, hankel.common);

  DumpCmd dumpc;
  CLI::App* d = app.add_subcommand("ensemble-dump", "Write the p x mn matrix of a sampled operator (JSON)");
  add_size(d, dumpc.m, dumpc.n, dumpc.p);
  add_ensemble(d, dumpc.ensemble);
  add_common(d, dumpc.common);
  d->get_option("--jobs")->description("Unused here");

  for (CLI::App* sub : app.get_subcommands({})) sub->configurable();

  // CLI11 drops environment values that fail validation; reject them instead.
  if (const char* env = std::getenv("LOWRANK_JOBS"); env && *env) {
    int jobs = -1;
    const char* end = env + std::strlen(env);
    const auto [ptr, ec] = std::from_chars(env, end, jobs);
    if (ec != std::errc() || ptr != end || jobs < 0) {
      err << "error: LOWRANK_JOBS must be a non-negative integer, got '" << env << "'\n";
      return kExitUsage;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << " (run with --help for usage)\n";
    return kExitUsage;
  }

  try {
    if (s->parsed()) return apply_jobs(solve.common.jobs), run_solve(solve, out);
    if (r->parsed()) return apply_jobs(rip.common.jobs), run_rip(rip, out);
    if (g->parsed()) return apply_jobs(grid.common.jobs), run_grid(grid, out);
    if (im->parsed()) return apply_jobs(image.common.jobs), run_image(image, out);
    if (h->parsed()) return apply_jobs(hankel.common.jobs), run_hankel(hankel, out);
    if (d->parsed()) return run_dump(dumpc, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace lowrank::cli
