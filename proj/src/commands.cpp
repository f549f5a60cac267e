#include "jumpstop/commands.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "jumpstop/error.hpp"
#include "jumpstop/parallel.hpp"
#include "jumpstop/philox.hpp"
#include "jumpstop/problem_spec.hpp"
#include "jumpstop/validate.hpp"

namespace jumpstop {

namespace {

std::string compiler_id() {
#if defined(__clang__)
  return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  return std::string("gcc ") + __VERSION__;
#else
  return "unknown";
#endif
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  return f;
}

struct Run {
  const CommandOptions& opts;
  std::string started = utc_now();
  std::vector<std::string> outputs;
  ProblemSpec spec;

  explicit Run(const CommandOptions& o) : opts(o), spec(load(o.spec, o.seed)) {
    std::filesystem::create_directories(o.out);
  }

  static ProblemSpec load(const std::filesystem::path& p, std::optional<std::uint64_t> seed) {
    ProblemSpec s = load_problem_spec(p);
    if (seed) s.mc.seed = *seed;
    return s;
  }

  std::ofstream file(const std::string& name) {
    outputs.push_back(name);
    return open_out(opts.out / name);
  }

  void write_manifest() {
    auto f = open_out(opts.out / "manifest.txt");
    f << "spec_digest = " << hex(spec.digest) << '\n'
      << "command = " << opts.command_line << '\n'
      << "started = " << started << '\n'
      << "finished = " << utc_now() << '\n'
      << "outputs = ";
    for (std::size_t i = 0; i < outputs.size(); ++i) f << (i ? ", " : "") << outputs[i];
    f << '\n'
      << "jumpstop_version = " << JUMPSTOP_VERSION << '\n'
      << "eigen_version = " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
      << EIGEN_MINOR_VERSION << '\n'
      << "compiler = " << compiler_id() << '\n';
  }
};

void record(std::ostream& os, const std::string& check, std::uint64_t digest,
            double measured, double tolerance, bool pass) {
  os << "check=" << check << " inputs=" << hex(digest) << " measured=" << num(measured)
     << " tolerance=" << num(tolerance) << " pass=" << (pass ? "true" : "false") << '\n';
}

void write_surface(std::ostream& os, const ValueSurface& s, const ObstacleSpec& ob,
                   double band_tol) {
  os << "t,x,u,h,in_region\n";
  const std::size_t n = s.tgrid.n_steps();
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = s.tgrid.time(k);
    for (std::size_t j = 0; j < s.sgrid.n_nodes(); ++j) {
      const double x = s.sgrid.node(j);
      const double u = s.values(k, j);
      const double h = k < n ? ob.h(t, x) : ob.g(x);
      os << num(t) << ',' << num(x) << ',' << num(u) << ',' << num(h) << ','
         << (u - h <= band_tol ? 1 : 0) << '\n';
    }
  }
}

void write_boundary(std::ostream& os, const std::vector<StoppingSlice>& slices) {
  os << "t,interval,x_lo,x_hi\n";
  for (const auto& sl : slices)
    for (std::size_t i = 0; i < sl.intervals.size(); ++i)
      os << num(sl.t) << ',' << i << ',' << num(sl.intervals[i].x_lo) << ','
         << num(sl.intervals[i].x_hi) << '\n';
}

CrossValidationReport run_crossval(const Run& run, const ValueSurface& surface) {
  const ProblemSpec& s = run.spec;
  Problem mc_problem = s.problem;
  if (run.opts.mc_spec) mc_problem = Run::load(*run.opts.mc_spec, run.opts.seed).problem;
  const auto probes = crossval_probes(s.problem, surface.sgrid, s.crossval_probes, s.mc.seed);
  return cross_validate(surface, mc_problem, s.mc, probes, s.crossval_tol);
}

void report_crossval(std::ostream& os, const CrossValidationReport& cv, std::uint64_t digest) {
  for (std::size_t i = 0; i < cv.probe_points.size(); ++i) {
    os << "crossval_probe=" << i << " t=" << num(cv.probe_points[i].first)
       << " x=" << num(cv.probe_points[i].second) << " pide=" << num(cv.pide_values[i])
       << " mc=" << num(cv.mc_values[i]) << " stderr=" << num(cv.mc_stderrs[i]) << '\n';
  }
  record(os, "crossval", digest, cv.max_abs_gap, cv.tolerance_used, cv.pass);
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidMeasureError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CflError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvariantViolation& e) {
    err << "invariant violated: " << e.what() << '\n';
    return kExitFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_solve(const CommandOptions& opts, Engine engine, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    Run run(opts);
    const ProblemSpec& s = run.spec;
    bool pass = true;
    std::ostringstream report;
    std::optional<ValueSurface> surface;

    if (engine != Engine::mc) {
      surface = solve_problem(s.problem, s.grid);
      auto f = run.file("surface.csv");
      write_surface(f, *surface, s.problem.obstacle, s.band_tol);
      auto b = run.file("boundary.csv");
      write_boundary(b, extract_stopping_region(*surface, s.problem.obstacle, s.band_tol));
      report << "pide_value=" << num(surface->interpolate(s.problem.t0, s.problem.x0)) << '\n';
    }
    if (engine != Engine::pide) {
      const TimeGrid grid(s.problem.t0, s.problem.obstacle.horizon, s.mc.n_steps);
      const PathBundle bundle =
          simulate(s.problem.model, s.problem.t0, s.problem.x0, grid, s.mc.n_paths, s.mc.seed);
      const auto sol = solve_rbsde(s.problem.driver, s.problem.model, bundle,
                                   s.problem.obstacle, s.mc.basis, s.mc.n_picard);
      const RbsdeSummary sum = summarize(sol);
      report << "mc_value=" << num(sum.value) << '\n'
             << "mc_stderr=" << num(sum.std_error) << '\n'
             << "mc_mean_stopping_time=" << num(sum.mean_stopping_time) << '\n'
             << "mc_fraction_stopped_early=" << num(sum.fraction_stopped_early) << '\n';
      for (const auto& w : sol.warnings) report << "warning=" << w << '\n';
    }
    if (engine == Engine::both) {
      const auto cv = run_crossval(run, *surface);
      report_crossval(report, cv, s.digest);
      pass = cv.pass;
    }
    auto f = run.file("report.txt");
    f << report.str();
    log << report.str();
    run.write_manifest();
    return pass ? kExitPass : kExitFailure;
  });
}

int cmd_validate(const CommandOptions& opts, const std::vector<std::string>& suite,
                 std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    for (const auto& name : suite) {
      if (name != "crossval" && name != "apriori" && name != "strict" && name != "growth" &&
          name != "monotone")
        throw ConfigError("unknown validation suite '" + name + "'");
    }
    Run run(opts);
    const ProblemSpec& s = run.spec;
    const Problem& p = s.problem;
    const double T = p.obstacle.horizon;
    std::ostringstream report;
    bool pass = true;

    for (const auto& name : suite) {
      if (name == "crossval") {
        const auto surface = solve_problem(p, s.grid);
        const auto cv = run_crossval(run, surface);
        report_crossval(report, cv, s.digest);
        pass = pass && cv.pass;
      } else if (name == "apriori") {
        const double C = p.driver.base.lipschitz_C;
        const double eta = s.eta > 0.0 ? s.eta : 1.0 / (C * C);
        const EstimateConstants k(eta, s.beta > 0.0 ? s.beta : 3.0 / eta + 2.0 * C, C);
        std::size_t failures = 0;
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < s.n_cases; ++i) {
          const auto [d2, o2] = perturbed_problem(p, s.mc.seed, i);
          McParams mc = s.mc;
          mc.seed = s.mc.seed + i;
          const auto r = apriori_gap_check(p.driver, d2, p.obstacle, o2, p.model, p.t0,
                                           p.x0, k, mc);
          report << "apriori_case=" << i << " lhs=" << num(r.lhs) << " rhs=" << num(r.rhs)
                 << " stderr=" << num(r.std_error) << " pass=" << (r.pass ? "true" : "false")
                 << '\n';
          if (!r.pass) ++failures;
          worst = std::max(worst, r.lhs - r.rhs - 3.0 * r.std_error);
        }
        record(report, "apriori", s.digest, worst, 0.0, failures == 0);
        pass = pass && failures == 0;
      } else if (name == "strict") {
        const auto r = strict_comparison_check(p.driver, s.epsilon, p.obstacle.g, p.model,
                                               p.t0, p.x0, T, s.mc);
        report << "strict_gap=" << num(r.gap.value) << " stderr=" << num(r.gap.std_error)
               << " half_gap=" << num(r.half_gap.value)
               << " half_stderr=" << num(r.half_gap.std_error) << '\n';
        record(report, "strict", s.digest, r.ratio, 0.4, r.pass);
        pass = pass && r.pass;
      } else if (name == "growth") {
        const double w = 0.2 * (s.grid.x_max - s.grid.x_min);
        std::vector<std::pair<double, double>> probes;
        for (double t : {p.t0, p.t0 + 0.5 * (T - p.t0)})
          for (double x : {p.x0 - w, p.x0, p.x0 + w})
            probes.emplace_back(t, std::clamp(x, s.grid.x_min + w / 4, s.grid.x_max - w / 4));
        const auto r = growth_and_continuity_check(p, probes, s.mc, s.grid);
        for (const auto& g : r.probes)
          report << "growth_probe t=" << num(g.t) << " x=" << num(g.x) << " u=" << num(g.u)
                 << " bound=" << num(g.bound) << " pass=" << (g.pass ? "true" : "false")
                 << '\n';
        for (std::size_t m = 0; m < r.moduli.size(); ++m)
          report << "continuity_level=" << m << " modulus=" << num(r.moduli[m]) << '\n';
        if (r.bounded_checked)
          record(report, "bounded", s.digest, r.sup_abs_u, r.bounded_limit, r.bounded_pass);
        record(report, "growth", s.digest, r.moduli.empty() ? 0.0 : r.moduli.back(), 0.8,
               r.pass);
        pass = pass && r.pass;
      } else if (name == "monotone") {
        const auto pairs = ordered_position_pairs(s.n_cases, s.mc.seed);
        const auto r = monotonicity_suite(p.driver, p.model, p.t0, p.x0, T, pairs, s.mc);
        record(report, "monotone", s.digest, static_cast<double>(r.violations), 0.0, r.pass);
        pass = pass && r.pass;
      }
    }
    auto f = run.file("report.txt");
    f << report.str();
    log << report.str();
    run.write_manifest();
    return pass ? kExitPass : kExitFailure;
  });
}

int cmd_converge(const CommandOptions& opts, Axis axis, std::size_t levels,
                 std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (levels < 1) throw ConfigError("levels must be positive");
    Run run(opts);
    const ProblemSpec& base = run.spec;
    std::vector<double> params, values, millis;
    for (std::size_t i = 0; i < levels; ++i) {
      ProblemSpec s = base;
      const std::size_t f = std::size_t{1} << i;
      double param = 0.0;
      switch (axis) {
        case Axis::dt:
          s.grid.n_steps = base.grid.n_steps * f;
          param = static_cast<double>(s.grid.n_steps);
          break;
        case Axis::dx:
          s.grid.n_nodes = (base.grid.n_nodes - 1) * f + 1;
          param = static_cast<double>(s.grid.n_nodes - 1);
          break;
        case Axis::paths:
          s.mc.n_paths = base.mc.n_paths * f;
          param = static_cast<double>(s.mc.n_paths);
          break;
        case Axis::quad: {
          const int nq = base.n_quad * static_cast<int>(f);
          s = parse_problem_spec(base.text, SpecOverrides{nq});
          if (opts.seed) s.mc.seed = *opts.seed;
          param = nq;
          break;
        }
      }
      const auto t0 = std::chrono::steady_clock::now();
      double v;
      if (axis == Axis::paths) {
        v = -minimal_risk(s.problem.driver, s.problem.model, s.problem.t0, s.problem.x0,
                          s.problem.obstacle, s.mc)
                 .value;
      } else {
        v = solve_problem(s.problem, s.grid).interpolate(s.problem.t0, s.problem.x0);
      }
      const auto t1 = std::chrono::steady_clock::now();
      params.push_back(param);
      values.push_back(v);
      millis.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    auto f = run.file("convergence.csv");
    f << "level,parameter,value_at_probe,diff_from_finest,runtime_ms\n";
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < levels; ++i) {
      const double diff = std::abs(values[i] - values.back());
      f << i << ',' << num(params[i]) << ',' << num(values[i]) << ',' << num(diff) << ','
        << num(millis[i]) << '\n';
      if (i + 1 < levels && diff > 0.0) {
        lx.push_back(std::log(params[i]));
        ly.push_back(std::log(diff));
      }
    }
    double slope = std::numeric_limits<double>::quiet_NaN();
    if (lx.size() >= 2) {
      const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
      const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
      }
      slope = -sxy / sxx;
    }
    std::ostringstream report;
    static constexpr const char* names[] = {"dt", "dx", "paths", "quad"};
    report << "axis=" << names[static_cast<int>(axis)] << " levels=" << levels
           << " slope=" << num(slope) << '\n';
    auto r = run.file("report.txt");
    r << report.str();
    log << report.str();
    run.write_manifest();
    return kExitPass;
  });
}

// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal stopping under BSDE-induced risk measures with jumps", "jumpstop"};
  app.require_subcommand(1);
  app.set_version_flag("--version", JUMPSTOP_VERSION);

  CommandOptions opts;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  std::string mc_spec;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--spec", opts.spec, "problem-spec file")->required();
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--threads", threads, "worker threads (0 = hardware)");
    sub->add_option("--seed", seed, "overrides the spec seed");
  };

  std::string engine = "both";
  auto* solve = app.add_subcommand("solve", "solve one problem");
  common(solve);
  solve->add_option("--engine", engine, "pide, mc or both")
      ->check(CLI::IsMember({"pide", "mc", "both"}));
  solve->add_option("--mc-spec", mc_spec, "problem used on the Monte Carlo side");

  std::vector<std::string> suite{"crossval", "apriori", "strict", "growth", "monotone"};
  auto* validate = app.add_subcommand("validate", "run validation checks");
  common(validate);
  validate->add_option("--suite", suite, "comma-separated checks")->delimiter(',');
  validate->add_option("--mc-spec", mc_spec, "problem used on the Monte Carlo side");

  std::string axis = "dx";
  std::size_t levels = 3;
  auto* converge = app.add_subcommand("converge", "refinement study");
  common(converge);
  converge->add_option("--axis", axis, "dt, dx, paths or quad")
      ->check(CLI::IsMember({"dt", "dx", "paths", "quad"}));
  converge->add_option("--levels", levels, "number of refinement levels")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitConfig;
  }

  for (int i = 0; i < argc; ++i) opts.command_line += (i ? " " : "") + std::string(argv[i]);
  if (threads > 0) set_thread_count(threads);
  if (seed != 0 || (solve->count("--seed") + validate->count("--seed") +
                    converge->count("--seed")) > 0)
    opts.seed = seed;
  if (!mc_spec.empty()) opts.mc_spec = mc_spec;

  if (solve->parsed()) {
    const Engine e = engine == "pide" ? Engine::pide
                     : engine == "mc" ? Engine::mc
                                      : Engine::both;
    return cmd_solve(opts, e, out, err);
  }
  if (validate->parsed()) return cmd_validate(opts, suite, out, err);
  const Axis a = axis == "dt"    ? Axis::dt
                 : axis == "dx"  ? Axis::dx
                 : axis == "paths" ? Axis::paths
                                 : Axis::quad;
  return cmd_converge(opts, a, levels, out, err);
}

}  // namespace jumpstop
