#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbgam/errors.hpp"
#include "sbgam/family.hpp"
#include "sbgam/grid.hpp"
#include "sbgam/kernels.hpp"
#include "sbgam/ll_fit.hpp"
#include "sbgam/nw_fit.hpp"
#include "sbgam/sim.hpp"

namespace sbgam::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, Command> kCommands{
    {"fit", Command::fit}, {"simulate", Command::simulate}, {"study", Command::study}};

std::string command_name(Command c) {
  for (const auto& [name, value] : kCommands) {
    if (value == c) return name;
  }
  return "fit";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void bind(CLI::App& app, RunConfig& cfg) {
  app.add_option("command", cfg.command, "fit, simulate or study")
      ->transform(CLI::CheckedTransformer(kCommands, CLI::ignore_case))
      ->required();
  app.add_option("--input", cfg.input, "CSV with a header row (fit)");
  app.add_option("--output", cfg.output, "output directory");
  app.add_option("--response", cfg.response, "response column name (fit)");
  app.add_option("--family", cfg.family, "gaussian_identity, bernoulli_logit or poisson_log");
  app.add_option("--estimator", cfg.estimator, "nw or ll");
  app.add_option("--kernel", cfg.kernel, "epanechnikov, quartic or triangular");
  app.add_option("--bandwidth", cfg.bandwidth, "rescaled bandwidths (one value or one per covariate)");
  app.add_option("--bandwidth_factor", cfg.bandwidth_factor, "c in h = c sd n^{-1/5}");
  app.add_option("--extra_bandwidth", cfg.extra_bandwidth, "bandwidth of extra simulated covariates");
  app.add_option("--grid", cfg.grid, "grid points per axis");
  app.add_option("--tol_outer", cfg.fit.tol_outer);
  app.add_option("--tol_inner", cfg.fit.tol_inner);
  app.add_option("--max_outer", cfg.fit.max_outer);
  app.add_option("--max_inner", cfg.fit.max_inner);
  app.add_option("--damping", cfg.fit.damping);
  app.add_option("--model", cfg.model, "simulation model i,j");
  app.add_option("--n", cfg.n, "simulated sample size");
  app.add_option("--extra_dims", cfg.extra_dims, "extra U(-1,1) covariates");
  app.add_option("--seed", cfg.seed);
  app.add_option("--rep", cfg.rep, "replication index (simulate)");
  app.add_option("--reps", cfg.reps, "replications (study)");
  app.add_option("--threads", cfg.threads, "worker threads, 0 for all cores");
  app.add_option("--bad_threshold", cfg.bad_threshold);
}

RunConfig parse_argv(const std::vector<std::string>& args, bool with_program) {
  RunConfig cfg;
  CLI::App app{"Smooth backfitting for generalized additive models"};
  app.set_config("--config", "", "flat key = value file; flags override it");
  bind(app, cfg);
  std::vector<const char*> argv;
  if (!with_program) argv.push_back("sbgam");
  for (const auto& a : args) argv.push_back(a.c_str());
  app.parse(static_cast<int>(argv.size()), argv.data());
  return cfg;
}

SimModel parse_model(const RunConfig& cfg) {
  int i = 0, j = 0;
  char comma = 0;
  std::istringstream in(cfg.model);
  if (!(in >> i >> comma >> j) || comma != ',') throw ConfigError("model must look like 1,1");
  return SimModel::table(i, j, cfg.n, cfg.seed, cfg.extra_dims);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto a = s.find_first_not_of(" \t\"");
    const auto b = s.find_last_not_of(" \t\"");
    s = a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  }
  return out;
}

double parse_number(const std::string& s, std::size_t row, const std::string& col) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw InputError("non-numeric value '" + s + "' in column " + col + " at line " + std::to_string(row));
  }
  return v;
}

struct Table {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> names;
};

Table read_csv(const std::string& path, const std::string& response) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError("input file " + path + " is empty");
  const auto header = split(line);
  std::size_t ycol = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == response) ycol = c;
  }
  if (ycol == header.size()) throw InputError("response column '" + response + "' not found");
  if (header.size() < 2) throw InputError("no covariate columns");
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw InputError("line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(header.size()));
    }
    std::vector<double> r(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) r[c] = parse_number(fields[c], lineno, header[c]);
    rows.push_back(std::move(r));
  }
  if (rows.size() < 2) throw InputError("input needs at least two data rows");
  Table t;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(header.size() - 1);
  t.x.resize(n, d);
  t.y.resize(n);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != ycol) t.names.push_back(header[c]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index col = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const double v = rows[static_cast<std::size_t>(i)][c];
      if (c == ycol) {
        t.y(i) = v;
      } else {
        t.x(i, col++) = v;
      }
    }
  }
  return t;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

json diagnostics_json(const FitDiagnostics& d) {
  return json{{"outer_iterations", d.outer_iterations},
              {"inner_sweeps", d.inner_sweeps},
              {"inner_contraction", d.inner_contraction},
              {"outer_change_norms", d.outer_change_norms},
              {"step_sup_norms", d.step_sup_norms},
              {"constraint_residuals", d.constraint_residuals},
              {"sq_history", d.sq_history},
              {"final_constraint_residuals", d.final_constraint_residuals},
              {"residual_norm", d.residual_norm},
              {"sq", d.sq},
              {"mass", d.mass},
              {"converged", d.converged}};
}

void check_paths(const RunConfig& cfg) {
  if (cfg.output.empty()) throw ConfigError("output directory must be set");
  if (!cfg.input.empty()) {
    const fs::path in = fs::weakly_canonical(cfg.input);
    const fs::path out = fs::weakly_canonical(cfg.output);
    if (in == out) throw ConfigError("input and output paths must differ");
  }
}

std::vector<double> fit_bandwidths(const RunConfig& cfg, const Dataset& data) {
  const std::size_t d = data.dims();
  if (!cfg.bandwidth.empty()) {
    if (cfg.bandwidth.size() == 1) return std::vector<double>(d, cfg.bandwidth.front());
    if (cfg.bandwidth.size() != d) {
      throw ConfigError("expected 1 or " + std::to_string(d) + " bandwidths, got " +
                        std::to_string(cfg.bandwidth.size()));
    }
    return cfg.bandwidth;
  }
  BandwidthRule rule;
  rule.factor = cfg.bandwidth_factor > 0.0 ? cfg.bandwidth_factor : 1.0;
  return rule.bandwidths(data, d);
}

void write_components(const fs::path& dir, const Dataset& data, const Grid& grid, const std::vector<Curve>& level,
                      const std::vector<Curve>* derivative) {
  for (std::size_t j = 0; j < level.size(); ++j) {
    std::ostringstream s;
    s << "x_original,x_rescaled,component_value";
    if (derivative) s << ",derivative_value";
    s << '\n';
    const AffineMap& map = data.transform[j];
    for (std::size_t k = 0; k < grid.size(); ++k) {
      s << num(map.to_original(grid.point(k))) << ',' << num(grid.point(k)) << ',' << num(level[j][k]);
      if (derivative) s << ',' << num((*derivative)[j][k] / map.scale());
      s << '\n';
    }
    write_text(dir / ("component_" + std::to_string(j + 1) + ".csv"), s.str());
  }
}

void run_fit(const RunConfig& cfg, const fs::path& dir) {
  if (cfg.input.empty()) throw ConfigError("fit needs --input");
  const Family fam = Family::from_name(cfg.family);
  const Estimator est = parse_estimator(cfg.estimator);
  Table t = read_csv(cfg.input, cfg.response);
  Dataset data = rescale_covariates(t.x, std::move(t.y), std::move(t.names));
  KernelSpec kernel{parse_kernel(cfg.kernel), fit_bandwidths(cfg, data)};
  kernel.validate();
  cfg.fit.validate();
  const SmoothingContext ctx(data, kernel, Grid(cfg.grid));

  json diag{{"command", "fit"},
            {"family", std::string(fam.name())},
            {"estimator", std::string(to_string(est))},
            {"kernel", cfg.kernel},
            {"bandwidths", kernel.bandwidths},
            {"samples", data.samples()},
            {"covariates", data.names}};
  try {
    if (est == Estimator::nw) {
      const NwFit fit = fit_nw(ctx, fam, cfg.fit);
      write_components(dir, data, ctx.grid(), fit.components, nullptr);
      diag["intercept"] = fit.eta0;
      diag["diagnostics"] = diagnostics_json(fit.diagnostics);
    } else {
      const LlFit fit = fit_ll(ctx, fam, cfg.fit);
      std::vector<Curve> deriv;
      for (std::size_t j = 0; j < fit.components0.size(); ++j) deriv.push_back(fit.derivative(j));
      write_components(dir, data, ctx.grid(), fit.components0, &deriv);
      diag["intercept"] = fit.eta00;
      diag["diagnostics"] = diagnostics_json(fit.diagnostics);
    }
  } catch (const ConvergenceError& e) {
    diag["diagnostics"] = diagnostics_json(e.diagnostics());
    write_text(dir / "diagnostics.json", diag.dump(2) + "\n");
    throw;
  }
  write_text(dir / "diagnostics.json", diag.dump(2) + "\n");
}

void run_simulate(const RunConfig& cfg, const fs::path& dir) {
  const SimModel model = parse_model(cfg);
  model.validate();
  const SimulatedData sim = simulate(model, cfg.rep);
  std::ostringstream s;
  s << "y";
  for (Eigen::Index j = 0; j < sim.x.cols(); ++j) s << ",x" << (j + 1);
  s << '\n';
  for (Eigen::Index i = 0; i < sim.x.rows(); ++i) {
    s << num(sim.y(i));
    for (Eigen::Index j = 0; j < sim.x.cols(); ++j) s << ',' << num(sim.x(i, j));
    s << '\n';
  }
  write_text(dir / "data.csv", s.str());
}

void run_study_command(const RunConfig& cfg, const fs::path& dir) {
  const SimModel model = parse_model(cfg);
  StudyConfig sc;
  sc.estimator = parse_estimator(cfg.estimator);
  sc.reps = cfg.reps;
  sc.kernel = parse_kernel(cfg.kernel);
  sc.grid_points = cfg.grid;
  sc.fit = cfg.fit;
  sc.bad_threshold = cfg.bad_threshold;
  sc.threads = cfg.threads;
  if (!cfg.bandwidth.empty()) {
    sc.bandwidth.fixed = cfg.bandwidth.size() == 1 ? std::vector<double>(2, cfg.bandwidth.front()) : cfg.bandwidth;
  } else if (cfg.bandwidth_factor > 0.0) {
    sc.bandwidth.factor = cfg.bandwidth_factor;
  } else {
    sc.bandwidth = fixture_rule(model.n);
  }
  sc.bandwidth.extra = cfg.extra_bandwidth;
  const StudyResult r = run_study(model, sc);

  std::ostringstream s;
  s << "model,n,estimator,component,isb,iv,mise,bad,failed,reps\n";
  auto row = [&](const std::string& comp, double isb, double iv, double mise) {
    s << '"' << model.label() << "\"," << model.n << ',' << to_string(sc.estimator) << ',' << comp << ','
      << num(isb) << ',' << num(iv) << ',' << num(mise) << ',' << r.bad_count << ',' << r.failed_count << ','
      << r.reps << '\n';
  };
  for (std::size_t j = 0; j < r.components.size(); ++j) {
    row(std::to_string(j + 1), r.components[j].isb, r.components[j].iv, r.components[j].mise);
  }
  row("avg", r.isb, r.iv, r.mise);
  write_text(dir / "study.csv", s.str());

  json comps = json::array();
  for (std::size_t j = 0; j < r.components.size(); ++j) {
    comps.push_back({{"component", j + 1},
                     {"isb", r.components[j].isb},
                     {"iv", r.components[j].iv},
                     {"mise", r.components[j].mise},
                     {"mean_curve", r.mean_curves[j]},
                     {"truth_curve", r.truth_curves[j]}});
  }
  json out{{"model", model.label()},
           {"n", model.n},
           {"seed", model.seed},
           {"estimator", std::string(to_string(sc.estimator))},
           {"reps", r.reps},
           {"reps_used", r.reps_used},
           {"bad_count", r.bad_count},
           {"failed_count", r.failed_count},
           {"isb", r.isb},
           {"iv", r.iv},
           {"mise", r.mise},
           {"mean_bandwidth", r.mean_bandwidth},
           {"truth_eta0", r.truth.eta0},
           {"centering", r.truth.centering},
           {"report_grid", r.report_grid},
           {"components", comps}};
  write_text(dir / "study.json", out.dump(2) + "\n");
}

void write_error(const std::string& output, const std::string& category, const std::string& message, int code) {
  std::cerr << "sbgam: " << message << '\n';
  if (output.empty()) return;
  std::error_code ec;
  fs::create_directories(output, ec);
  if (ec) return;
  std::ofstream out(fs::path(output) / "error.json", std::ios::binary);
  out << json{{"category", category}, {"message", message}, {"exit_code", code}}.dump(2) << '\n';
}

int dispatch(const RunConfig& cfg) {
  check_paths(cfg);
  const fs::path dir(cfg.output);
  fs::create_directories(dir);
  fs::remove(dir / "error.json");
  switch (cfg.command) {
    case Command::fit:
      run_fit(cfg, dir);
      break;
    case Command::simulate:
      run_simulate(cfg, dir);
      break;
    case Command::study:
      run_study_command(cfg, dir);
      break;
  }
  return kExitOk;
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) { return parse_argv(args, false); }

std::string format_config(const RunConfig& c) {
  std::ostringstream s;
  auto str = [&](const char* key, const std::string& v) { s << key << " = \"" << v << "\"\n"; };
  auto val = [&](const char* key, auto v) { s << key << " = " << v << '\n'; };
  str("command", command_name(c.command));
  str("input", c.input);
  str("output", c.output);
  str("response", c.response);
  str("family", c.family);
  str("estimator", c.estimator);
  str("kernel", c.kernel);
  if (!c.bandwidth.empty()) {
    s << "bandwidth = [";
    for (std::size_t j = 0; j < c.bandwidth.size(); ++j) s << (j ? "," : "") << num(c.bandwidth[j]);
    s << "]\n";
  }
  val("bandwidth_factor", num(c.bandwidth_factor));
  val("extra_bandwidth", num(c.extra_bandwidth));
  val("grid", c.grid);
  val("tol_outer", num(c.fit.tol_outer));
  val("tol_inner", num(c.fit.tol_inner));
  val("max_outer", c.fit.max_outer);
  val("max_inner", c.fit.max_inner);
  val("damping", num(c.fit.damping));
  str("model", c.model);
  val("n", c.n);
  val("extra_dims", c.extra_dims);
  val("seed", c.seed);
  val("rep", c.rep);
  val("reps", c.reps);
  val("threads", c.threads);
  val("bad_threshold", num(c.bad_threshold));
  return s.str();
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  CLI::App app;
  bind(app, cfg);
  std::istringstream in(text);
  app.parse_from_stream(in);
  return cfg;
}

int run_cli(const std::vector<std::string>& args) {
  std::string output = RunConfig{}.output;
  for (std::size_t a = 0; a + 1 < args.size(); ++a) {
    if (args[a] == "--output") output = args[a + 1];
  }
  RunConfig cfg;
  try {
    cfg = parse_argv(args, true);
  } catch (const CLI::CallForHelp&) {
    CLI::App app{"Smooth backfitting for generalized additive models"};
    app.set_config("--config", "", "flat key = value file; flags override it");
    bind(app, cfg);
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::Error& e) {
    write_error(output, "input", e.what(), kExitInput);
    return kExitInput;
  }
  try {
    return dispatch(cfg);
  } catch (const ConvergenceError& e) {
    write_error(cfg.output, e.category(), e.what(), kExitConvergence);
    return kExitConvergence;
  } catch (const DegenerateWeightError& e) {
    write_error(cfg.output, e.category(), e.what(), kExitConvergence);
    return kExitConvergence;
  } catch (const InputError& e) {
    write_error(cfg.output, e.category(), e.what(), kExitInput);
    return kExitInput;
  } catch (const ConfigError& e) {
    write_error(cfg.output, e.category(), e.what(), kExitInput);
    return kExitInput;
  } catch (const std::exception& e) {
    write_error(cfg.output, "internal", e.what(), kExitInternal);
    return kExitInternal;
  }
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace sbgam::cli
