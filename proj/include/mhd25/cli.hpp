#pragma once

// Experiment configuration and the subcommand runner behind the mhd25 tool.
//
// Exit codes: 0 success, 1 failed checks, 2 unknown subcommand, 3 configuration
// error, 4 run aborted by a guard.

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mhd25/consistency.hpp"
#include "mhd25/decay_fit.hpp"
#include "mhd25/diagnostics.hpp"
#include "mhd25/initial_data.hpp"
#include "mhd25/linear_symbol.hpp"
#include "mhd25/lp_properties.hpp"
#include "mhd25/solver.hpp"

namespace mhd25 {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int {
  kExitOk = 0,
  kExitChecksFailed = 1,
  kExitUnknownSubcommand = 2,
  kExitConfigError = 3,
  kExitGuardAbort = 4,
};

struct ExperimentConfig {
  int n = 64;
  double box_length = 2.0 * std::numbers::pi;
  Params params;
  SolverConfig solver;
  bool write_snapshots = false;
  InitialDataSpec initial;
  double sigma = 1.0;
  std::vector<double> gammas = {0.0};
  FitWindow fit_window{10.0, std::numeric_limits<double>::infinity(), 0.0};
  std::string out_dir = "out";

  nlohmann::json to_json() const {
    nlohmann::json fw = {{"t_min", fit_window.t_min}, {"trim_tail", fit_window.trim_tail}};
    if (std::isfinite(fit_window.t_max)) fw["t_max"] = fit_window.t_max;
    return {
        {"schema_version", kSchemaVersion},
        {"grid", {{"n", n}, {"L", box_length}}},
        {"params", params.to_json()},
        {"solver",
         {{"dt", solver.dt},
          {"t_end", solver.t_end},
          {"formulation", to_string(solver.formulation)},
          {"dealias", solver.dealias},
          {"snapshot_stride", solver.snapshot_stride},
          {"diagnostic_stride", solver.diagnostic_stride},
          {"linear_only", solver.linear_only},
          {"write_snapshots", write_snapshots},
          {"enforce_smallness", solver.enforce_smallness},
          {"smallness_bound", solver.smallness_bound},
          {"seed", solver.seed}}},
        {"initial", initial.to_json()},
        {"diagnostics", {{"sigma", sigma}, {"gammas", gammas}, {"fit_window", fw}}},
        {"output", {{"dir", out_dir}}},
    };
  }
};

namespace detail {

template <class F>
void for_each_key(const nlohmann::json& j, const std::string& where, F&& f) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) f(it.key(), it.value());
}

[[noreturn]] inline void unknown_key(const std::string& where, const std::string& k) {
  throw FormatError(where + ": unknown key '" + k + "'");
}

}  // namespace detail

/// Parses and validates a configuration document. Nothing is allocated on a
/// grid until every field has been checked.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (!j.contains("schema_version")) throw FormatError("config: missing schema_version");
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw FormatError("config: unsupported schema_version");
    }
    detail::for_each_key(j, "config", [&](const std::string& k, const nlohmann::json& v) {
      if (k == "schema_version") return;
      if (k == "grid") {
        detail::for_each_key(v, "grid", [&](const std::string& gk, const nlohmann::json& gv) {
          if (gk == "n") c.n = gv.get<int>();
          else if (gk == "L") c.box_length = gv.get<double>();
          else if (gk == "L_over_pi") c.box_length = gv.get<double>() * std::numbers::pi;
          else detail::unknown_key("grid", gk);
        });
      } else if (k == "params") {
        c.params = Params::from_json(v);
      } else if (k == "solver") {
        detail::for_each_key(v, "solver", [&](const std::string& sk, const nlohmann::json& sv) {
          auto& s = c.solver;
          if (sk == "dt") s.dt = sv.get<double>();
          else if (sk == "t_end") s.t_end = sv.get<double>();
          else if (sk == "formulation") s.formulation = formulation_from_string(sv.get<std::string>());
          else if (sk == "dealias") s.dealias = sv.get<bool>();
          else if (sk == "snapshot_stride") s.snapshot_stride = sv.get<int>();
          else if (sk == "diagnostic_stride") s.diagnostic_stride = sv.get<int>();
          else if (sk == "linear_only") s.linear_only = sv.get<bool>();
          else if (sk == "write_snapshots") c.write_snapshots = sv.get<bool>();
          else if (sk == "enforce_smallness") s.enforce_smallness = sv.get<bool>();
          else if (sk == "smallness_bound") s.smallness_bound = sv.get<double>();
          else if (sk == "seed") s.seed = sv.get<std::uint64_t>();
          else detail::unknown_key("solver", sk);
        });
      } else if (k == "initial") {
        c.initial = InitialDataSpec::from_json(v);
      } else if (k == "diagnostics") {
        detail::for_each_key(v, "diagnostics", [&](const std::string& dk, const nlohmann::json& dv) {
          if (dk == "sigma") c.sigma = dv.get<double>();
          else if (dk == "gammas") c.gammas = dv.get<std::vector<double>>();
          else if (dk == "fit_window") {
            detail::for_each_key(dv, "fit_window", [&](const std::string& fk, const nlohmann::json& fv) {
              if (fk == "t_min") c.fit_window.t_min = fv.get<double>();
              else if (fk == "t_max") c.fit_window.t_max = fv.get<double>();
              else if (fk == "trim_tail") c.fit_window.trim_tail = fv.get<double>();
              else detail::unknown_key("fit_window", fk);
            });
          } else detail::unknown_key("diagnostics", dk);
        });
      } else if (k == "output") {
        detail::for_each_key(v, "output", [&](const std::string& ok, const nlohmann::json& ov) {
          if (ok == "dir") c.out_dir = ov.get<std::string>();
          else detail::unknown_key("output", ok);
        });
      } else {
        detail::unknown_key("config", k);
      }
    });
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }

  if (c.n < 16 || (c.n & (c.n - 1)) != 0) throw DomainError("grid.n must be a power of two >= 16");
  if (!(c.box_length > 0.0) || !std::isfinite(c.box_length)) throw DomainError("grid.L must be positive");
  if (!(c.sigma > 0.0 && c.sigma <= 1.0)) throw DomainError("diagnostics.sigma must lie in (0, 1]");
  for (double g : c.gammas) {
    if (!(g > -1.0 && g <= 1.0)) throw DomainError("diagnostics.gammas must lie in (-1, 1]");
  }
  c.solver.params = c.params;
  c.solver.sigma = c.sigma;
  c.solver.gammas = c.gammas;
  c.solver.keep_snapshots = c.write_snapshots;
  c.initial.sigma = c.sigma;
  c.initial.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return parse_experiment_config(j);
}

struct SymbolConfig {
  double r_min = 1e-3, r_max = 1e3;
  int points = 200;
  std::string out_dir = "out";
};

inline SymbolConfig load_symbol_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config " + path);
  SymbolConfig c;
  try {
    nlohmann::json j;
    is >> j;
    if (j.value("schema_version", 0) != kSchemaVersion) throw FormatError("config: unsupported schema_version");
    detail::for_each_key(j, "config", [&](const std::string& k, const nlohmann::json& v) {
      if (k == "schema_version") return;
      if (k == "symbol") {
        detail::for_each_key(v, "symbol", [&](const std::string& sk, const nlohmann::json& sv) {
          if (sk == "r_min") c.r_min = sv.get<double>();
          else if (sk == "r_max") c.r_max = sv.get<double>();
          else if (sk == "points") c.points = sv.get<int>();
          else detail::unknown_key("symbol", sk);
        });
      } else if (k == "output") {
        detail::for_each_key(v, "output", [&](const std::string& ok, const nlohmann::json& ov) {
          if (ok == "dir") c.out_dir = ov.get<std::string>();
          else detail::unknown_key("output", ok);
        });
      } else {
        detail::unknown_key("config", k);
      }
    });
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the content.
inline std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) &&
                  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

inline std::string state_hash(const MhdState& s) {
  std::ostringstream os(std::ios::binary);
  const std::array<const SpectralField*, 5> f = {&s.a, &s.u[0], &s.u[1], &s.theta, &s.b};
  write_snapshot(os, f);
  return git_blob_hash(os.str());
}

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream os(p);
  if (!os) throw FormatError("cannot write " + p.string());
  os << j.dump(2) << '\n';
}

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw FormatError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

/// The gamma encoded in a "lam_gamma_norm[g]" column name, if any.
inline std::optional<double> gamma_of_column(const std::string& name) {
  const std::string pre = "lam_gamma_norm[";
  if (name.rfind(pre, 0) != 0 || name.back() != ']') return std::nullopt;
  return std::stod(name.substr(pre.size(), name.size() - pre.size() - 1));
}

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline int cmd_symbol(double r_min, double r_max, int points, const std::string& out_dir, Streams io) {
  const auto rows = symbol_sweep(r_min, r_max, points);
  const auto dir = prepare_dir(out_dir);
  {
    std::ofstream os(dir / "symbol_sweep.csv");
    write_sweep_csv(os, rows);
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) worst = std::max(worst, r.abscissa);
  write_json(dir / "manifest.json",
             {{"schema_version", kSchemaVersion},
              {"subcommand", "symbol"},
              {"config", {{"r_min", r_min}, {"r_max", r_max}, {"points", points}}},
              {"outputs", {"symbol_sweep.csv"}},
              {"max_abscissa", worst},
              {"timestamp", utc_timestamp()}});
  char buf[160];
  std::snprintf(buf, sizeof buf, "symbol: %d rows, max abscissa %.6g (%s)\n", points, worst,
                worst < 0.0 ? "negative everywhere" : "NOT negative everywhere");
  io.out << buf;
  return kExitOk;
}

inline nlohmann::json manifest_base(const std::string& sub, const ExperimentConfig& c,
                                    const MhdState& init) {
  return {{"schema_version", kSchemaVersion},
          {"subcommand", sub},
          {"config", c.to_json()},
          {"grid", {{"n", c.n}, {"L", c.box_length}}},
          {"params", c.params.to_json()},
          {"initial_data_hash", state_hash(init)},
          {"timestamp", utc_timestamp()}};
}

inline int cmd_simulate(ExperimentConfig c, Streams io) {
  c.solver.validate(*make_grid(c.n, c.box_length));
  const GridPtr grid = make_grid(c.n, c.box_length);
  const MhdState init = generate_initial(c.initial, grid);
  const auto dir = prepare_dir(c.out_dir);
  const Trajectory tr = simulate(init, c.solver);

  std::vector<std::string> outputs = {"diagnostics.csv"};
  tr.diagnostics.write_csv((dir / "diagnostics.csv").string());
  if (c.write_snapshots) {
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
      char base[32];
      std::snprintf(base, sizeof base, "snap_%06zu", k);
      write_state((dir / (std::string(base) + ".fld")).string(),
                  (dir / (std::string(base) + ".json")).string(), tr.snapshots[k], c.params);
      outputs.push_back(std::string(base) + ".fld");
      outputs.push_back(std::string(base) + ".json");
    }
  }
  auto m = manifest_base("simulate", c, init);
  m["termination"] = to_string(tr.termination);
  m["termination_message"] = tr.message;
  m["steps_taken"] = tr.steps_taken;
  m["final_time"] = tr.final_time;
  m["max_abs_a"] = tr.max_abs_a;
  m["X0"] = tr.diagnostics.X0_ref;
  m["outputs"] = outputs;
  write_json(dir / "manifest.json", m);

  char buf[200];
  std::snprintf(buf, sizeof buf, "simulate: %s after %lld steps (t = %g), X0 = %.6g, sup|a| = %.6g\n",
                to_string(tr.termination).c_str(), tr.steps_taken, tr.final_time,
                tr.diagnostics.X0_ref, tr.max_abs_a);
  io.out << buf;
  return tr.termination == Termination::Completed ? kExitOk : kExitGuardAbort;
}

inline int cmd_lp_check(int seeds, int n, const std::string& out_dir, Streams io) {
  LpSuiteConfig cfg;
  cfg.seeds = seeds;
  cfg.n = n;
  const auto results = run_lp_suite(cfg);
  bool ok = true;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    arr.push_back(r.to_json());
    io.out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
  }
  const auto dir = prepare_dir(out_dir);
  write_json(dir / "lp_check.json", {{"seeds", seeds}, {"n", n}, {"results", arr}});
  write_json(dir / "manifest.json", {{"schema_version", kSchemaVersion},
                                     {"subcommand", "lp-check"},
                                     {"config", {{"seeds", seeds}, {"n", n}}},
                                     {"outputs", {"lp_check.json"}},
                                     {"timestamp", utc_timestamp()}});
  return ok ? kExitOk : kExitChecksFailed;
}

inline int cmd_decay_fit(const std::string& input, const std::string& column, double sigma,
                         const FitWindow& w, const std::string& out_dir, Streams io) {
  const auto d = DiagnosticSeries::read_csv(input);
  const auto values = d.column(column);
  const DecayFit fit = fit_decay(d.t, values, w);
  const double gamma = gamma_of_column(column).value_or(0.0);
  const double expected = -(sigma + gamma) / 2.0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "decay-fit: %s exponent %.6f +- %.6f (expected %.4f), %zu samples in [%g, %g]\n",
                column.c_str(), fit.exponent, fit.standard_error, expected, fit.samples, fit.t_first,
                fit.t_last);
  io.out << buf;
  if (!out_dir.empty()) {
    const auto dir = prepare_dir(out_dir);
    write_json(dir / "decay_fit.json", {{"input", input},
                                        {"column", column},
                                        {"sigma", sigma},
                                        {"exponent", fit.exponent},
                                        {"stderr", fit.standard_error},
                                        {"expected", expected},
                                        {"samples", fit.samples},
                                        {"t_first", fit.t_first},
                                        {"t_last", fit.t_last}});
  }
  return kExitOk;
}

inline int cmd_consistency(ExperimentConfig c, int states, Streams io) {
  c.solver.formulation = Formulation::Both;
  c.solver.validate(*make_grid(c.n, c.box_length));
  const GridPtr grid = make_grid(c.n, c.box_length);
  const MhdState init = generate_initial(c.initial, grid);
  const auto dir = prepare_dir(c.out_dir);
  const Trajectory tr = simulate(init, c.solver);
  {
    std::ofstream os(dir / "consistency.csv");
    os << "t,phi_l2_error\n";
    char buf[64];
    for (std::size_t i = 0; i < tr.consistency_t.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", tr.consistency_t[i], tr.consistency_err[i]);
      os << buf;
    }
  }
  double worst = 0.0;
  {
    const GridPtr g64 = make_grid(64, 2.0 * std::numbers::pi);
    std::ofstream os(dir / "chain_rule.csv");
    os << "seed,residual\n";
    char buf[64];
    for (int s = 0; s < states; ++s) {
      const double r = chain_rule_residual(random_low_mode_state(g64, c.initial.seed + s));
      worst = std::max(worst, r);
      std::snprintf(buf, sizeof buf, "%d,%.17g\n", s, r);
      os << buf;
    }
  }
  auto m = manifest_base("consistency", c, init);
  m["termination"] = to_string(tr.termination);
  m["max_phi_l2_error"] = tr.max_consistency_error();
  m["max_chain_rule_residual"] = worst;
  m["outputs"] = {"consistency.csv", "chain_rule.csv"};
  write_json(dir / "manifest.json", m);
  char buf[200];
  std::snprintf(buf, sizeof buf, "consistency: %s, sup_t phi error %.3e, chain-rule residual %.3e over %d states\n",
                to_string(tr.termination).c_str(), tr.max_consistency_error(), worst, states);
  io.out << buf;
  return tr.termination == Termination::Completed ? kExitOk : kExitGuardAbort;
}

}  // namespace detail

/// Runs one subcommand; args excludes the program name.
inline int run_subcommand(const std::vector<std::string>& args, std::ostream& out = std::cout,
                          std::ostream& err = std::cerr) {
  static const std::vector<std::string> known = {"symbol", "simulate", "lp-check", "decay-fit",
                                                 "consistency"};
  if (args.empty() || std::find(known.begin(), known.end(), args[0]) == known.end()) {
    err << "unknown subcommand" << (args.empty() ? "" : " '" + args[0] + "'")
        << "; expected one of: symbol simulate lp-check decay-fit consistency\n";
    return kExitUnknownSubcommand;
  }
  const std::string sub = args[0];
  CLI::App app{"mhd25 " + sub};
  std::string config_path, out_dir, input, column = "lam_gamma_norm[0]";
  std::optional<std::uint64_t> seed;
  int threads = 1, points = 200, seeds = 100, n = 64, states = 100;
  double r_min = 1e-3, r_max = 1e3, sigma = 1.0;
  FitWindow window{10.0, std::numeric_limits<double>::infinity(), 0.0};

  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "override the random seed");
  app.add_option("--threads", threads, "worker threads (affects wall time only)");
  const bool needs_config = sub == "simulate" || sub == "consistency";
  if (needs_config) app.add_option("--config", config_path, "experiment configuration")->required();
  if (sub == "consistency") app.add_option("--states", states, "random states for the chain-rule check");
  if (sub == "symbol") {
    app.add_option("--config", config_path, "symbol sweep configuration");
    app.add_option("--r-min", r_min);
    app.add_option("--r-max", r_max);
    app.add_option("--points", points);
  }
  if (sub == "lp-check") {
    app.add_option("--seeds", seeds);
    app.add_option("--n", n);
  }
  if (sub == "decay-fit") {
    app.add_option("--input", input)->required();
    app.add_option("--column", column);
    app.add_option("--sigma", sigma);
    app.add_option("--t-min", window.t_min);
    app.add_option("--t-max", window.t_max);
    app.add_option("--trim-tail", window.trim_tail);
  }

  std::vector<std::string> rest(args.begin() + 1, args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mhd25 " << sub << ": " << e.what() << '\n';
    return kExitConfigError;
  }
  if (threads < 1) {
    err << "mhd25 " << sub << ": --threads must be >= 1\n";
    return kExitConfigError;
  }

  const detail::Streams io{out, err};
  ExperimentConfig cfg;
  try {
    if (needs_config) {
      cfg = load_experiment_config(config_path);
      if (seed) {
        cfg.initial.seed = *seed;
        cfg.solver.seed = *seed;
      }
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      cfg.solver.validate(*make_grid(cfg.n, cfg.box_length));
    } else if (sub == "symbol" && !config_path.empty()) {
      const auto sc = load_symbol_config(config_path);
      r_min = sc.r_min;
      r_max = sc.r_max;
      points = sc.points;
      if (out_dir.empty()) out_dir = sc.out_dir;
    }
    if (sub == "symbol" && (!(r_min > 0.0) || !(r_max > r_min) || points < 2)) {
      throw DomainError("symbol sweep needs 0 < r_min < r_max and points >= 2");
    }
  } catch (const Error& e) {
    err << "mhd25 " << sub << ": configuration error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (sub == "symbol") return detail::cmd_symbol(r_min, r_max, points, out_dir.empty() ? "out" : out_dir, io);
    if (sub == "simulate") return detail::cmd_simulate(cfg, io);
    if (sub == "lp-check") return detail::cmd_lp_check(seeds, n, out_dir.empty() ? "out" : out_dir, io);
    if (sub == "decay-fit") return detail::cmd_decay_fit(input, column, sigma, window, out_dir, io);
    return detail::cmd_consistency(cfg, states, io);
  } catch (const VacuumError& e) {
    err << "mhd25 " << sub << ": aborted: " << e.what() << '\n';
    return kExitGuardAbort;
  } catch (const NonFiniteError& e) {
    err << "mhd25 " << sub << ": aborted: " << e.what() << '\n';
    return kExitGuardAbort;
  } catch (const Error& e) {
    err << "mhd25 " << sub << ": " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace mhd25
