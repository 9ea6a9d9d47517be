#include <bismut/config.hpp>
#include <bismut/verify.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

using namespace bismut;
using config::json;

namespace {

enum Exit { ok = 0, failure = 1, validation = 2, numerical = 3, verify_failed = 4 };

void emit(const std::string& path, const std::string& body) {
  if (path.empty()) std::cout << body;
  else config::write_atomic(path, body);
}

int cmd_simulate(const std::string& cfg_path, const std::string& out_path, std::optional<std::uint64_t> seed,
                 std::optional<unsigned> workers) {
  json cfg = config::load_file(cfg_path);
  if (!cfg.is_object()) throw ValidationError("config must be an object", "config");
  if (seed) cfg["execution"]["seed"] = *seed;
  if (workers) cfg["execution"]["workers"] = *workers;
  const auto spec = config::parse_simulation(cfg);
  auto res = config::run_simulation(spec);
  res.result["timestamp"] = config::utc_timestamp();
  const std::string json_path = out_path.empty() ? spec.output.json_path : out_path;
  emit(json_path, res.result.dump(2) + "\n");
  if (!spec.output.csv_path.empty() && !res.csv.empty()) config::write_atomic(spec.output.csv_path, res.csv);
  const auto& d = res.result["estimate"]["diagnostics"];
  std::cout << "simulate " << res.result["estimator"].get<std::string>() << " estimate "
            << config::format_number(res.estimate) << " stderr " << config::format_number(res.stderr_) << " n_paths "
            << res.result["estimate"]["n_paths"].get<std::uint64_t>() << " discarded "
            << d["discarded_paths"].get<std::uint64_t>() << " hash " << spec.hash.substr(0, 12)
            << (json_path.empty() ? "" : " -> " + json_path) << "\n";
  return ok;
}

int cmd_bound(const std::string& cfg_path, const std::string& out_path, bool sweep) {
  const json cfg = config::load_file(cfg_path);
  if (!cfg.is_object()) throw ValidationError("config must be an object", "config");
  if (sweep) {
    const std::string csv = config::run_sweep(cfg);
    std::string path = out_path;
    if (path.empty() && cfg.contains("output") && cfg["output"].contains("csv")) path = cfg["output"]["csv"];
    emit(path, csv);
    std::cout << "sweep " << (path.empty() ? "" : "-> " + path) << "\n";
    return ok;
  }
  const auto spec = config::parse_bound(cfg);
  const json res = config::run_bound(spec);
  const std::string json_path = out_path.empty() ? spec.output.json_path : out_path;
  if (!json_path.empty()) config::write_atomic(json_path, res.dump(2) + "\n");
  char value[32];
  std::snprintf(value, sizeof value, "%.6g", res["value"].get<double>());
  std::cout << "bound " << res["formula_id"].get<std::string>() << " value " << value;
  for (const auto& [k, v] : res["minimizer"].items()) std::cout << " " << k << "=" << config::format_number(v);
  if (res["attained_in_limit"].get<bool>()) std::cout << " (limit)";
  std::cout << (json_path.empty() ? "" : " -> " + json_path) << "\n";
  return ok;
}

int cmd_sweep(const std::string& cfg_path, const std::string& out_path) {
  const json cfg = config::load_file(cfg_path);
  if (!cfg.is_object()) throw ValidationError("config must be an object", "config");
  const std::string csv = config::run_sweep(cfg);
  emit(out_path, csv);
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  std::cout << "sweep " << (rows ? rows - 1 : 0) << " rows" << (out_path.empty() ? "" : " -> " + out_path) << "\n";
  return ok;
}

int cmd_verify(const std::string& suite_name, const std::string& out_path) {
  const auto suite = verify::suite_from_string(suite_name);
  std::vector<verify::CheckResult> results;
  const auto checks = verify::all_checks();
  for (std::size_t i = 0; i < checks.size(); ++i) {
    results.push_back(verify::run_check(checks[i], suite, static_cast<int>(i + 1)));
    std::cerr << verify::status_line(results.back()) << std::endl;
  }
  const json rep = verify::report(results, suite);
  emit(out_path, rep.dump(2) + "\n");
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed;
  std::cout << "verify " << suite_name << " " << passed << "/" << results.size() << " passed"
            << (out_path.empty() ? "" : " -> " + out_path) << "\n";
  return rep["passed"].get<bool>() ? ok : verify_failed;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo Bismut-type derivative estimators on Riemannian model spaces"};
  app.require_subcommand(1);

  std::string cfg, out, suite = "quick";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool bound_sweep = false;

  auto* sim = app.add_subcommand("simulate", "run an estimator from a JSON config");
  sim->add_option("-c,--config", cfg, "config file")->required();
  sim->add_option("-o,--output", out, "result JSON path");
  sim->add_option("--seed", seed, "override execution.seed");
  sim->add_option("--workers", workers, "override execution.workers");

  auto* bnd = app.add_subcommand("bound", "evaluate an explicit bound");
  bnd->add_option("-c,--config", cfg, "config file")->required();
  bnd->add_option("-o,--output", out, "result JSON path (CSV with --sweep)");
  bnd->add_flag("--sweep", bound_sweep, "evaluate over the config's sweep grid and write CSV");

  auto* ver = app.add_subcommand("verify", "run the oracle-vs-estimator suites");
  ver->add_option("--suite", suite, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  ver->add_option("-o,--output", out, "report JSON path");

  auto* swp = app.add_subcommand("sweep", "evaluate a config over a parameter grid");
  swp->add_option("-c,--config", cfg, "config file")->required();
  swp->add_option("-o,--output", out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : validation;
  }

  try {
    if (*sim) return cmd_simulate(cfg, out, seed, workers);
    if (*bnd) return cmd_bound(cfg, out, bound_sweep);
    if (*ver) return cmd_verify(suite, out);
    if (*swp) return cmd_sweep(cfg, out);
  } catch (const ValidationError& e) {
    std::cerr << "validation error";
    if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
    std::cerr << ": " << e.what() << "\n";
    return validation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return failure;
}
