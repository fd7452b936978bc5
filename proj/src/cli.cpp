#include "mrgd/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mrgd/errors.hpp"
#include "mrgd/landscape.hpp"
#include "mrgd/optim.hpp"
#include "mrgd/probes.hpp"
#include "mrgd/problems.hpp"
#include "mrgd/rng.hpp"
#include "mrgd/schedule.hpp"
#include "mrgd/spectrum.hpp"
#include "mrgd/version.hpp"

namespace mrgd::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunContext {
  std::string command;
  json config;
  std::string config_hash;
  fs::path out_dir;
  std::uint64_t seed = 0;
  bool deterministic = false;
  int jobs = 1;
};

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
}

void require_keys(const json& j, const std::vector<std::string>& keys, const std::string& where) {
  std::vector<std::string> missing;
  for (const std::string& k : keys)
    if (!j.contains(k)) missing.push_back(k);
  if (!missing.empty()) {
    std::string msg = "config validation failed, missing keys in " + where + ":";
    for (const std::string& k : missing) msg += " " + k;
    throw ValidationError(msg);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_manifest(const RunContext& ctx) {
  write_json(ctx.out_dir / "manifest.json",
             json{{"command", ctx.command},
                  {"config_hash", ctx.config_hash},
                  {"seed", ctx.seed},
                  {"deterministic", ctx.deterministic},
                  {"version", mrgd::kVersion}});
}

MultiscaleDataSpec data_spec_from_config(const RunContext& ctx) {
  require_keys(ctx.config, {"data"}, "root");
  const json& dj = ctx.config.at("data");
  require_keys(dj, {"group_dims", "scales", "sample_count"}, "data");
  json with_seed = dj;
  if (!with_seed.contains("seed")) with_seed["seed"] = ctx.seed;
  return MultiscaleDataSpec::from_json(with_seed);
}

TargetKind target_from_config(const json& config) {
  const std::string name =
      config.contains("data") ? config.at("data").value("target", std::string("linear_regression"))
                              : std::string("linear_regression");
  return target_from_name(name);
}

// A dataset either loads from referenced files or is generated from "data".
Dataset dataset_from_config(const RunContext& ctx) {
  if (ctx.config.contains("dataset")) {
    const json& dj = ctx.config.at("dataset");
    require_keys(dj, {"csv", "sidecar"}, "dataset");
    const std::string csv = dj.at("csv").get<std::string>();
    const std::string sidecar = dj.at("sidecar").get<std::string>();
    if (!fs::exists(csv)) throw ValidationError("referenced file does not exist: " + csv);
    if (!fs::exists(sidecar)) throw ValidationError("referenced file does not exist: " + sidecar);
    return Dataset::read_csv(csv, sidecar);
  }
  return generate_multiscale_dataset(data_spec_from_config(ctx), target_from_config(ctx.config));
}

// Spectrum source: explicit eigenvalues, or the sample-covariance spectrum of
// the configured dataset. Grouping: explicit group_sizes, or ratio-gap
// detection (the threshold is the surfaced tunable).
SpectrumGroups spectrum_from_config(const RunContext& ctx, const Dataset* dataset) {
  std::vector<double> eigenvalues;
  if (ctx.config.contains("spectrum") && ctx.config.at("spectrum").contains("eigenvalues")) {
    eigenvalues = ctx.config.at("spectrum").at("eigenvalues").get<std::vector<double>>();
  } else if (dataset != nullptr) {
    eigenvalues = covariance_spectrum(dataset->features);
  } else {
    throw ValidationError("auto schedule requires a grouped spectrum source "
                          "(spectrum.eigenvalues or a dataset)");
  }

  if (ctx.config.contains("group_sizes"))
    return groups_from_sizes(eigenvalues,
                             ctx.config.at("group_sizes").get<std::vector<std::size_t>>());
  double threshold = 0.1;
  if (ctx.config.contains("spectrum"))
    threshold = ctx.config.at("spectrum").value("gap_threshold", 0.1);
  return detect_groups(eigenvalues, threshold);
}

Schedule schedule_from_config(const RunContext& ctx, const SpectrumGroups& spectrum) {
  const double eta = ctx.config.value("eta", 2.0);
  const long outer = ctx.config.value("outer", 1L);
  Schedule schedule;
  schedule.outer = outer;
  schedule.eta_scalar = eta;
  json sj = ctx.config.value("schedule", json::object());
  if (sj.is_string()) {
    // A path to a schedule JSON, e.g. one written by the schedule subcommand.
    const std::string path = sj.get<std::string>();
    if (!fs::exists(path)) throw ValidationError("referenced file does not exist: " + path);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schedule file: " + path);
    sj = json::parse(in);
  }
  schedule.etas = sj.contains("etas") ? sj.at("etas").get<std::vector<double>>()
                                      : learning_rates(spectrum, eta);
  if (schedule.etas.size() != spectrum.group_count())
    throw ValidationError("schedule etas must match the spectrum group count");
  schedule.counts = sj.contains("counts") ? sj.at("counts").get<std::vector<long>>()
                                          : iteration_counts(spectrum, schedule.etas);
  if (schedule.counts.size() != spectrum.group_count())
    throw ValidationError("schedule counts must match the spectrum group count");
  return schedule;
}

int cmd_generate(const RunContext& ctx) {
  const MultiscaleDataSpec spec = data_spec_from_config(ctx);
  const Dataset dataset = generate_multiscale_dataset(spec, target_from_config(ctx.config));
  dataset.write_csv((ctx.out_dir / "dataset.csv").string(),
                    (ctx.out_dir / "dataset.json").string());
  write_manifest(ctx);
  std::cout << "wrote " << (ctx.out_dir / "dataset.csv").string() << " (" << dataset.sample_count()
            << " x " << dataset.dimension() << ")\n";
  return kExitOk;
}

int cmd_spectrum(const RunContext& ctx) {
  std::optional<Dataset> dataset;
  if (ctx.config.contains("data") || ctx.config.contains("dataset"))
    dataset = dataset_from_config(ctx);
  const SpectrumGroups groups = spectrum_from_config(ctx, dataset ? &*dataset : nullptr);
  write_json(ctx.out_dir / "spectrum.json", groups.to_json());
  write_manifest(ctx);
  std::cout << "spectrum: " << groups.group_count() << " groups, condition number "
            << groups.global_condition_number() << "\n";
  return kExitOk;
}

int cmd_schedule(const RunContext& ctx) {
  std::optional<Dataset> dataset;
  if (ctx.config.contains("data") || ctx.config.contains("dataset"))
    dataset = dataset_from_config(ctx);
  const SpectrumGroups spectrum = spectrum_from_config(ctx, dataset ? &*dataset : nullptr);
  const Schedule schedule = schedule_from_config(ctx, spectrum);
  json out = schedule.to_json();
  out["contraction_bound"] = contraction_bound(spectrum, schedule);
  write_json(ctx.out_dir / "schedule.json", out);
  write_manifest(ctx);
  std::cout << "schedule: counts";
  for (long n : schedule.counts) std::cout << ' ' << n;
  std::cout << ", bound " << out["contraction_bound"].get<double>() << "\n";
  return kExitOk;
}

struct MethodRun {
  std::string name;
  SolveResult result;
};

MethodRun run_method(const std::string& name, const QuadraticProblem& problem,
                     const SpectrumGroups& spectrum, const Schedule& schedule,
                     const RunContext& ctx, long max_steps, double tol) {
  if (name == "mrgd") {
    Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(problem.dimension());
    if (ctx.config.value("theta0", std::string("zeros")) == "random") {
      Rng rng(ctx.seed + 17);
      theta0 = rng.normal_vector(problem.dimension());
    }
    const long cycles = std::max(1L, max_steps / std::max(1L, schedule.total_inner()));
    return {name, mrgd(problem.gradient(), schedule, theta0, cycles, tol, &problem.optimum)};
  }
  BaselineParams params;
  params.sigma_min = spectrum.sigma_bot.back();
  params.sigma_max = spectrum.sigma_top.front();
  if (ctx.config.contains(name)) {
    const json& mj = ctx.config.at(name);
    if (mj.contains("eta")) params.eta = mj.at("eta").get<double>();
    params.allow_unstable_eta = mj.value("allow_unstable_eta", false);
  }
  return {name, baseline_solve(baseline_method_from_name(name), problem, params, max_steps, tol)};
}

json summarize_method(const MethodRun& run, double tol) {
  const TrajectoryRecord& tr = run.result.trajectory;
  json out{{"steps", tr.points.empty() ? 0 : tr.points.back().step},
           {"grad_evals", run.result.grad_evals},
           {"converged", run.result.converged},
           {"final_residual", tr.points.empty() ? -1.0 : tr.points.back().residual}};
  out["grad_evals_to_tol"] = tr.grad_evals_to(tol);
  if (tr.has_error && !tr.points.empty()) out["final_error"] = tr.points.back().error;
  return out;
}

int solve_common(const RunContext& ctx, std::vector<std::string> methods) {
  const Dataset dataset = dataset_from_config(ctx);
  const QuadraticProblem problem = least_squares_quadratic(dataset);
  const SpectrumGroups spectrum = spectrum_from_config(ctx, &dataset);
  const Schedule schedule = schedule_from_config(ctx, spectrum);
  const double tol = ctx.config.value("tol", 1e-8);
  const long max_steps = ctx.config.value("max_steps", 200000L);

  std::vector<MethodRun> runs(methods.size());
  std::vector<std::exception_ptr> failures(methods.size());
  const int jobs = ctx.deterministic ? 1 : std::max(1, ctx.jobs);
  if (jobs == 1 || methods.size() <= 1) {
    for (std::size_t i = 0; i < methods.size(); ++i)
      runs[i] = run_method(methods[i], problem, spectrum, schedule, ctx, max_steps, tol);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= methods.size()) return;
        try {
          runs[i] = run_method(methods[i], problem, spectrum, schedule, ctx, max_steps, tol);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(jobs, static_cast<int>(methods.size())); ++t)
      pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : failures)
      if (e) std::rethrow_exception(e);
  }

  json summary{{"tolerance", tol},
               {"dimension", problem.dimension()},
               {"schedule", schedule.to_json()},
               {"contraction_bound", contraction_bound(spectrum, schedule)},
               {"methods", json::object()}};
  const ComplexityEstimates est =
      complexity_estimates(spectrum, tol, ctx.config.value("eta", 2.0));
  summary["estimates"] = {{"gd", est.gd}, {"gd_plus", est.gd_plus}, {"mrgd", est.mrgd}};
  for (const MethodRun& run : runs) {
    std::ofstream csv(ctx.out_dir / (run.name + ".csv"));
    if (!csv) throw IoError("cannot open trajectory CSV for " + run.name);
    run.result.trajectory.write_csv(csv);
    summary["methods"][run.name] = summarize_method(run, tol);
  }
  write_json(ctx.out_dir / (ctx.command == "solve" ? "solve_summary.json" : "benchmark_summary.json"),
             summary);
  write_manifest(ctx);
  for (const MethodRun& run : runs) {
    std::cout << run.name << ": grad_evals_to_tol="
              << run.result.trajectory.grad_evals_to(tol) << " final_residual="
              << (run.result.trajectory.points.empty()
                      ? -1.0
                      : run.result.trajectory.points.back().residual)
              << "\n";
  }
  return kExitOk;
}

int cmd_solve(const RunContext& ctx) {
  const std::string method = ctx.config.value("method", std::string("mrgd"));
  return solve_common(ctx, {method});
}

int cmd_benchmark(const RunContext& ctx) {
  require_keys(ctx.config, {"methods"}, "root");
  return solve_common(ctx, ctx.config.at("methods").get<std::vector<std::string>>());
}

int cmd_probe(const RunContext& ctx) {
  const json pj = ctx.config.value("probe", json::object());
  const std::string kind = pj.value("kind", std::string("all"));
  if (kind != "all" && kind != "scaling" && kind != "hessian" && kind != "lemma" &&
      kind != "expansion")
    throw ValidationError("probe.kind must be one of all|scaling|expansion|hessian|lemma");

  json summary;
  std::ostringstream norms_csv;
  norms_csv << "section,eps,group,norm\n";

  if (kind == "all" || kind == "scaling") {
    ScalingProbeConfig cfg;
    cfg.seed = ctx.seed;
    if (pj.contains("scaling")) {
      const json& sj = pj.at("scaling");
      if (sj.contains("group_dims")) cfg.group_dims = sj.at("group_dims").get<std::vector<std::size_t>>();
      if (sj.contains("eps_values")) cfg.eps_values = sj.at("eps_values").get<std::vector<double>>();
      if (sj.contains("sample_count")) cfg.sample_count = sj.at("sample_count").get<std::size_t>();
    }
    const ScalingProbeResult res = run_scaling_probe(cfg);
    summary["prop1_slope"] = res.logistic_small_group.slope;
    summary["prop2_slope"] = res.mlp_small_group.slope;
    summary["second_layer_max_abs_slope"] = res.second_layer_max_abs_slope;
    char buf[64];
    for (std::size_t k = 0; k < res.logistic_small_group.eps.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", res.logistic_small_group.norms[k]);
      norms_csv << "logistic," << res.logistic_small_group.eps[k] << ",1," << buf << "\n";
    }
    for (std::size_t k = 0; k < res.mlp_small_group.eps.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", res.mlp_small_group.norms[k]);
      norms_csv << "mlp_layer1," << res.mlp_small_group.eps[k] << ",1," << buf << "\n";
    }
    for (std::size_t h = 0; h < res.second_layer.size(); ++h)
      for (std::size_t k = 0; k < res.second_layer[h].eps.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", res.second_layer[h].norms[k]);
        norms_csv << "mlp_layer2," << res.second_layer[h].eps[k] << ',' << h << ',' << buf << "\n";
      }
  }
  if (kind == "all" || kind == "expansion") {
    ExpansionProbeConfig cfg;
    cfg.seed = ctx.seed;
    const ExpansionProbeResult res = run_expansion_probe(cfg);
    summary["thm1"] = {{"layer1", res.layer1.slope},
                       {"layer2", res.layer2.slope},
                       {"conclusive", res.layer1.conclusive && res.layer2.conclusive}};
  }
  if (kind == "all" || kind == "hessian") {
    HessianProbeConfig cfg;
    cfg.seed = ctx.seed;
    const HessianProbeResult res = run_hessian_probe(cfg);
    summary["hessian"] = {{"rel_frobenius_error", res.rel_frobenius_error},
                          {"pearson_log", res.pearson_log},
                          {"spearman", res.spearman},
                          {"pass", res.rel_frobenius_error <= 1e-4}};
  }
  if (kind == "all" || kind == "lemma") {
    const int trials = pj.value("trials", 100);
    const LemmaProbeResult res = run_lemma_probe(trials, ctx.seed);
    summary["lemma"] = {{"trials", res.trials},
                        {"violations", res.violations},
                        {"max_ratio", res.max_ratio},
                        {"pass", res.violations == 0}};
  }

  write_text(ctx.out_dir / "probe_norms.csv", norms_csv.str());
  write_json(ctx.out_dir / "probe_summary.json", summary);
  write_manifest(ctx);
  std::cout << "probe summary written to " << (ctx.out_dir / "probe_summary.json").string()
            << "\n";
  return kExitOk;
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"multirate gradient descent toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::string out_flag;
  bool deterministic = false;
  int jobs = 1;

  const std::vector<std::string> names = {"generate", "spectrum", "schedule",
                                          "solve",    "benchmark", "probe"};
  for (const std::string& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--seed", seed_flag, "override config seed");
    sub->add_option("--out", out_flag, "override output directory");
    sub->add_flag("--deterministic", deterministic,
                  "force serial execution and fixed reduction order");
    sub->add_option("--jobs", jobs, "parallel worker slots for benchmark");
  }

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }

  try {
    RunContext ctx;
    ctx.command = app.get_subcommands().front()->get_name();

    std::ifstream raw(config_path);
    if (!raw) throw IoError("cannot open config: " + config_path);
    std::stringstream bytes;
    bytes << raw.rdbuf();
    ctx.config_hash = fnv1a_hex(bytes.str());
    ctx.config = load_config(config_path);

    if (ctx.config.contains("experiment") &&
        ctx.config.at("experiment").get<std::string>() != ctx.command)
      throw ValidationError("config experiment kind does not match the subcommand");

    ctx.seed = seed_flag.value_or(ctx.config.value("seed", std::uint64_t{0}));
    ctx.deterministic = deterministic || ctx.config.value("deterministic", false);
    ctx.jobs = jobs > 1 ? jobs : ctx.config.value("jobs", 1);
    const std::string out = !out_flag.empty()
                                ? out_flag
                                : ctx.config.value("out", std::string("out"));
    ctx.out_dir = fs::path(out);
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out);

    if (ctx.command == "generate") return cmd_generate(ctx);
    if (ctx.command == "spectrum") return cmd_spectrum(ctx);
    if (ctx.command == "schedule") return cmd_schedule(ctx);
    if (ctx.command == "solve") return cmd_solve(ctx);
    if (ctx.command == "benchmark") return cmd_benchmark(ctx);
    if (ctx.command == "probe") return cmd_probe(ctx);
    throw ValidationError("unknown subcommand: " + ctx.command);
  } catch (const ScheduleInfeasibleError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DivergenceError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const BoundInvalidError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegenerateSpectrumError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalBreakdownError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "error (io): " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error (validation): " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace mrgd::cli
