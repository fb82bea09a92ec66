#include "mvsens/cli.hpp"

#include "mvsens/csv.hpp"
#include "mvsens/error.hpp"
#include "mvsens/estimands.hpp"
#include "mvsens/log.hpp"
#include "mvsens/parallel.hpp"
#include "mvsens/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mvsens::cli {

using nlohmann::json;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

bool parse_number(const std::string& s, double& v) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  return ec == std::errc() && ptr == last && std::isfinite(v);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  f << text;
  if (!f) fail(ErrorCode::IoError, "write to '" + path + "' failed");
}

std::vector<double> sorted_lambdas(std::vector<double> lambdas) {
  if (lambdas.empty()) fail(ErrorCode::InvalidArgument, "at least one lambda is required");
  for (double lam : lambdas) {
    if (!(lam >= 0.0) || !std::isfinite(lam)) {
      fail(ErrorCode::InvalidArgument, "lambda must be finite and >= 0, got " + format_double(lam));
    }
  }
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  return lambdas;
}

// Returns kValidationError or kNumericalError for an error code.
int exit_code_for(ErrorCode code) { return is_validation_error(code) ? kValidationError : kNumericalError; }

json diagnostics_json(const FitDiagnostics& d) {
  return {{"loglik", d.loglik},
          {"iterations", d.iterations},
          {"grad_norm", d.grad_norm},
          {"step_halvings", d.step_halvings},
          {"ridge_fallback", d.ridge_fallback}};
}

}  // namespace

ContrastVector parse_contrast(const std::string& text, int num_levels) {
  std::string body = trim(text);
  bool bracketed = false;
  if (body.size() >= 2 && ((body.front() == '[' && body.back() == ']') || (body.front() == '(' && body.back() == ')'))) {
    body = body.substr(1, body.size() - 2);
    bracketed = true;
  }
  const auto tokens = split(body, ',');
  std::vector<double> values;
  for (const auto& t : tokens) {
    double v = 0.0;
    if (!parse_number(t, v)) fail(ErrorCode::ParseError, "contrast '" + text + "': '" + t + "' is not a number");
    values.push_back(v);
  }
  if (!bracketed && values.size() == 2) {
    const double k = values[0];
    const double l = values[1];
    if (k != std::floor(k) || l != std::floor(l)) {
      fail(ErrorCode::InvalidLevelPair, "contrast '" + text + "': a pair needs integer levels");
    }
    return pairwise_contrast(static_cast<int>(k), static_cast<int>(l), num_levels);
  }
  if (static_cast<int>(values.size()) != num_levels) {
    fail(ErrorCode::LengthMismatch, "contrast '" + text + "' has " + std::to_string(values.size()) +
                                        " entries; the data has " + std::to_string(num_levels) + " levels");
  }
  return ContrastVector(Eigen::Map<const Eigen::VectorXd>(values.data(), num_levels));
}

int cmd_analyze(const AnalyzeRequest& req, std::ostream& out, std::ostream& err) {
  if (req.data.empty()) fail(ErrorCode::InvalidArgument, "--data is required");
  if (req.treatment.empty() || req.outcome.empty()) {
    fail(ErrorCode::InvalidArgument, "--treatment and --outcome are required");
  }
  if (!(req.alpha > 0.0 && req.alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  if (req.B != 0 && req.B < 2) fail(ErrorCode::InvalidArgument, "B must be 0 (no bootstrap) or >= 2");
  const std::vector<double> lambdas = sorted_lambdas(req.lambdas);

  CsvColumns cols{req.treatment, req.outcome, req.covariates, req.levels, 0};
  const ObservationalDataset data = load_csv(req.data, cols);
  const int J = data.num_levels();

  std::vector<ContrastVector> contrasts;
  if (req.contrasts.empty()) {
    contrasts = all_pairwise_contrasts(J);
  } else {
    for (const auto& c : req.contrasts) contrasts.push_back(parse_contrast(c, J));
  }

  GpsModelSpec spec;
  spec.type = req.gps_model;
  spec.fit.ridge = req.ridge;
  spec.fit.max_iter = req.max_iter;
  const GpsModel model = fit_gps(spec.type, data, spec.fit);
  const GpsMatrix gps = predict_gps(model, data);
  if (!req.model_out.empty()) write_text(req.model_out, model_to_json(model));

  const auto table = contrast_table(data, gps, contrasts, lambdas);

  std::optional<BootstrapReplicates> boot;
  if (req.B > 0) {
    BootstrapConfig bc;
    bc.B = req.B;
    bc.alpha = req.alpha;
    bc.seed = req.seed;
    bc.refit_gps = req.refit_gps;
    bc.threads = req.threads;
    boot = BootstrapReplicates::run(data, spec, lambdas, bc, &model);
    if (!req.refit_gps) {
      warn("bootstrap reuses the full-data GPS (--no-refit): intervals ignore GPS estimation error "
           "and are exploratory only");
    }
  }

  json config = {{"data_fingerprint", hex(data.fingerprint())},
                 {"treatment", req.treatment},
                 {"outcome", req.outcome},
                 {"covariates", req.covariates},
                 {"levels", data.level_labels()},
                 {"gps_model", std::string(to_string(req.gps_model))},
                 {"lambdas", lambdas},
                 {"B", req.B},
                 {"alpha", req.alpha},
                 {"seed", req.seed},
                 {"refit_gps", req.refit_gps},
                 {"ridge", req.ridge},
                 {"max_iter", req.max_iter}};
  json cjson = json::array();
  for (const auto& c : contrasts) {
    cjson.push_back({{"label", c.label()},
                     {"coefficients", std::vector<double>(c.coefficients().begin(), c.coefficients().end())}});
  }
  config["contrasts"] = cjson;
  const std::string config_hash = hex(fnv1a(config.dump()));
  const std::string meta_line = "# mvsens " + std::string(kVersion) + " seed=" + std::to_string(req.seed) +
                                " config_hash=" + config_hash + "\n";

  std::string results = meta_line;
  results += "contrast,lambda,Lambda,point_estimate,lo,hi,ci_lo,ci_hi,alpha,B\n";
  std::string plot = meta_line;
  plot += "contrast,lambda,series,lo,hi,center\n";
  json replicates = json::array();
  for (const auto& r : table) {
    const double Lambda = std::exp(r.lambda);
    std::string ci_lo = "NA";
    std::string ci_hi = "NA";
    if (boot) {
      const auto ci = boot->ci(r.contrast, r.lambda, req.alpha);
      ci_lo = format_double(ci.lo);
      ci_hi = format_double(ci.hi);
      if (req.dump_replicates) {
        const auto reps = boot->replicate_bounds(r.contrast, r.lambda);
        std::vector<double> L;
        std::vector<double> U;
        for (const auto& [l, u] : reps) {
          L.push_back(l);
          U.push_back(u);
        }
        replicates.push_back({{"contrast", r.contrast.label()}, {"lambda", r.lambda}, {"L", L}, {"U", U}});
      }
    }
    const std::string label = csv_field(r.contrast.label());
    results += label + "," + format_double(r.lambda) + "," + format_double(Lambda) + "," +
               format_double(r.point_estimate) + "," + format_double(r.lo) + "," + format_double(r.hi) + "," + ci_lo +
               "," + ci_hi + "," + format_double(req.alpha) + "," + std::to_string(req.B) + "\n";
    plot += label + "," + format_double(r.lambda) + ",point_interval," + format_double(r.lo) + "," +
            format_double(r.hi) + "," + format_double(r.point_estimate) + "\n";
    if (boot) {
      plot += label + "," + format_double(r.lambda) + ",ci," + ci_lo + "," + ci_hi + "," +
              format_double(r.point_estimate) + "\n";
    }
  }

  if (req.out.empty()) {
    out << results;
  } else {
    write_text(req.out, results);
  }
  if (!req.plot_data.empty()) write_text(req.plot_data, plot);

  if (!req.out.empty()) {
    json meta = {{"version", std::string(kVersion)},
                 {"seed", req.seed},
                 {"config_hash", config_hash},
                 {"config", config},
                 {"threads", resolve_threads(req.threads)},
                 {"data", {{"path", req.data}, {"n", data.size()}, {"level_counts", data.level_counts()}}},
                 {"gps", {{"model_type", std::string(to_string(model_type(model)))},
                          {"diagnostics", diagnostics_json(diagnostics(model))}}}};
    if (boot) {
      const auto& d = boot->diagnostics();
      meta["bootstrap"] = {{"B", d.B},
                           {"B_effective", d.B_effective},
                           {"redraws", d.redraws},
                           {"fit_failures", d.fit_failures},
                           {"seed", d.seed},
                           {"rng_family", d.rng_family},
                           {"refit_gps", d.refit_gps},
                           {"inferential", d.refit_gps}};
      if (req.dump_replicates) meta["bootstrap"]["replicates"] = replicates;
    }
    write_text(req.out + ".meta.json", meta.dump(2) + "\n");
  }
  err << "analyze: " << table.size() << " rows (" << contrasts.size() << " contrasts x " << lambdas.size()
      << " lambdas)\n";
  return kOk;
}

int cmd_simulate(const SimulateRequest& req, std::ostream& out, std::ostream& err) {
  const auto scenario = sim::parse_scenario(req.scenario);
  sim::ScenarioConfig sc;
  if (scenario == sim::Scenario::custom) {
    if (!req.k2 || !req.k3) fail(ErrorCode::InvalidArgument, "scenario custom needs --k2 and --k3");
    sc = sim::ScenarioConfig::custom(*req.k2, *req.k3, req.n, req.seed);
  } else {
    if (req.k2 || req.k3) fail(ErrorCode::InvalidArgument, "--k2/--k3 apply only to --scenario custom");
    sc = sim::ScenarioConfig::make(scenario, req.n, req.seed);
  }
  sc.x3_sd = req.x3_sd;
  sc.validate();

  sim::StudyConfig cfg;
  cfg.scenario = sc;
  cfg.lambdas = sorted_lambdas(req.lambdas);
  cfg.R = req.R;
  cfg.B = req.B;
  cfg.alpha = req.alpha;
  cfg.oracle_N = req.oracle_N;
  cfg.threads = req.threads;
  const int step = std::max(1, req.R / 10);
  cfg.progress = [&err, step](int done, int total) {
    if (done % step == 0 || done == total) err << "simulate: replication " << done << "/" << total << "\n";
  };

  const json config = {{"scenario", std::string(sim::to_string(scenario))},
                       {"k2", sc.k2},
                       {"k3", sc.k3},
                       {"x3_sd", sc.x3_sd},
                       {"n", sc.n},
                       {"R", cfg.R},
                       {"B", cfg.B},
                       {"lambdas", cfg.lambdas},
                       {"alpha", cfg.alpha},
                       {"seed", req.seed},
                       {"oracle_N", cfg.oracle_N}};
  const std::string config_hash = hex(fnv1a(config.dump()));

  const auto t0 = std::chrono::steady_clock::now();
  const sim::StudyMetrics metrics = sim::run_study(cfg);
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string text = "# mvsens " + std::string(kVersion) + " seed=" + std::to_string(req.seed) +
                           " config_hash=" + config_hash + "\n" + sim::study_csv(metrics);
  if (req.out.empty()) {
    out << text;
  } else {
    write_text(req.out, text);
    const json meta = {{"version", std::string(kVersion)},
                       {"seed", req.seed},
                       {"config_hash", config_hash},
                       {"config", config},
                       {"rng_family", std::string(kRngFamily)},
                       {"data_streams", "(seed, simulation_data, r)"},
                       {"bootstrap_streams", "derive_seed(seed, simulation_bootstrap, r)"},
                       {"oracle_stream", "(seed, oracle, 0)"},
                       {"threads", resolve_threads(req.threads)},
                       {"runtime_seconds", runtime},
                       {"failed_replications", metrics.failed_replications},
                       {"failures", metrics.failures},
                       {"bootstrap_redraws", metrics.bootstrap_redraws},
                       {"oracle_max_shift_on_doubling", metrics.oracle_max_shift}};
    write_text(req.out + ".meta.json", meta.dump(2) + "\n");
  }
  if (metrics.failed_replications > 0) {
    err << "simulate: " << metrics.failed_replications << " replication(s) failed and were excluded\n";
  }
  if (metrics.oracle_max_shift >= 0.005) {
    warn("oracle endpoints moved by " + format_double(metrics.oracle_max_shift) +
         " when N doubled; increase --oracle-N");
  }
  return kOk;
}

int cmd_verify(const VerifyRequest& req, std::ostream& out, std::ostream&) {
  verify::ArmSolver solver = verify::threshold_solver();
  if (req.inject_fault) {
    // Shrinks lambda before solving, so every lambda > 0 bound is too narrow.
    solver = [](const Eigen::VectorXd& y, const Eigen::VectorXd& g, const SensitivityParams& p) {
      return arm_extrema_threshold(y, g, SensitivityParams::from_lambda(0.9 * p.lambda));
    };
  }
  const auto report = verify::run_verification(req.options, solver);
  verify::print_report(report, out);
  return report.ok() ? kOk : kPropertyFailure;
}

namespace {

// Copies `key` from the config file into `field`. The file wins over an
// explicit flag, with a warning when the two disagree.
template <typename T>
void take(const json& j, const char* key, T& field, const CLI::App& app, const std::string& flag,
          std::vector<std::string>& used) {
  if (!j.contains(key)) return;
  used.emplace_back(key);
  T value = j.at(key).get<T>();
  if (app.count(flag) > 0 && !(value == field)) {
    warn(std::string("config file value for '") + key + "' overrides " + flag);
  }
  field = std::move(value);
}

json read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::IoError, "cannot read config '" + path + "'");
  try {
    json j = json::parse(f);
    if (!j.is_object()) fail(ErrorCode::ParseError, "config '" + path + "' must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, "config '" + path + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::vector<std::string>& used) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(used.begin(), used.end(), key) == used.end()) {
      fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
  }
}

void apply_analyze_config(const json& j, AnalyzeRequest& r, const CLI::App& app) {
  std::vector<std::string> used;
  take(j, "data", r.data, app, "--data", used);
  take(j, "treatment", r.treatment, app, "--treatment", used);
  take(j, "outcome", r.outcome, app, "--outcome", used);
  take(j, "covariates", r.covariates, app, "--covariates", used);
  take(j, "levels", r.levels, app, "--levels", used);
  if (j.contains("gps_model")) {
    std::string name = std::string(to_string(r.gps_model));
    take(j, "gps_model", name, app, "--gps-model", used);
    r.gps_model = parse_gps_model_type(name);
  }
  if (j.contains("contrasts")) {
    used.emplace_back("contrasts");
    std::vector<std::string> cs;
    for (const auto& c : j.at("contrasts")) {
      if (c.is_string()) {
        cs.push_back(c.get<std::string>());
      } else {
        std::string s = "[";
        for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + format_double(c[i].get<double>());
        cs.push_back(s + "]");
      }
    }
    if (app.count("--contrast") > 0 && cs != r.contrasts) warn("config file value for 'contrasts' overrides --contrast");
    r.contrasts = cs;
  }
  take(j, "lambdas", r.lambdas, app, "--lambda", used);
  take(j, "B", r.B, app, "--B", used);
  take(j, "alpha", r.alpha, app, "--alpha", used);
  take(j, "seed", r.seed, app, "--seed", used);
  take(j, "threads", r.threads, app, "--threads", used);
  take(j, "refit_gps", r.refit_gps, app, "--no-refit", used);
  take(j, "ridge", r.ridge, app, "--ridge", used);
  take(j, "max_iter", r.max_iter, app, "--max-iter", used);
  take(j, "out", r.out, app, "--out", used);
  take(j, "plot_data", r.plot_data, app, "--plot-data", used);
  take(j, "model_out", r.model_out, app, "--model-out", used);
  take(j, "dump_replicates", r.dump_replicates, app, "--dump-replicates", used);
  reject_unknown(j, used);
}

void apply_simulate_config(const json& j, SimulateRequest& r, const CLI::App& app) {
  std::vector<std::string> used;
  take(j, "scenario", r.scenario, app, "--scenario", used);
  if (j.contains("k2")) {
    double v = r.k2.value_or(0.0);
    take(j, "k2", v, app, "--k2", used);
    r.k2 = v;
  }
  if (j.contains("k3")) {
    double v = r.k3.value_or(0.0);
    take(j, "k3", v, app, "--k3", used);
    r.k3 = v;
  }
  take(j, "x3_sd", r.x3_sd, app, "--x3-sd", used);
  take(j, "n", r.n, app, "--n", used);
  take(j, "R", r.R, app, "--R", used);
  take(j, "B", r.B, app, "--B", used);
  take(j, "lambdas", r.lambdas, app, "--lambda", used);
  take(j, "alpha", r.alpha, app, "--alpha", used);
  take(j, "seed", r.seed, app, "--seed", used);
  take(j, "oracle_N", r.oracle_N, app, "--oracle-N", used);
  take(j, "threads", r.threads, app, "--threads", used);
  take(j, "out", r.out, app, "--out", used);
  reject_unknown(j, used);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const WarningSink previous = set_warning_sink([&err](std::string_view msg) { err << "warning: " << msg << '\n'; });
  struct Restore {
    WarningSink sink;
    ~Restore() { set_warning_sink(std::move(sink)); }
  } restore{previous};

  CLI::App app{"Sensitivity analysis for causal effects of multivalued treatments", "mvsens"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  AnalyzeRequest areq;
  std::string a_config;
  std::string gps_model = "multinomial";
  bool no_refit = false;
  auto* analyze = app.add_subcommand("analyze", "Point intervals and bootstrap CIs for contrasts over a lambda grid");
  analyze->add_option("--config", a_config, "JSON config file (its values win over flags)");
  analyze->add_option("--data", areq.data, "Input CSV with a header row");
  analyze->add_option("--treatment", areq.treatment, "Treatment column");
  analyze->add_option("--outcome", areq.outcome, "Outcome column");
  analyze->add_option("--covariates", areq.covariates, "Covariate columns (comma separated or repeated)")
      ->delimiter(',');
  analyze->add_option("--levels", areq.levels, "Treatment labels in level order 1..J")->delimiter(',');
  analyze->add_option("--gps-model", gps_model, "multinomial | continuation_ratio")->capture_default_str();
  analyze->add_option("--contrast", areq.contrasts, "\"k,l\" for m(k)-m(l) or \"[c1,...,cJ]\"; repeatable");
  analyze->add_option("--lambda", areq.lambdas, "Sensitivity levels lambda = log(Lambda); repeatable")
      ->delimiter(',')
      ->capture_default_str();
  analyze->add_option("--B", areq.B, "Bootstrap replicates (0 = none)")->capture_default_str();
  analyze->add_option("--alpha", areq.alpha, "CI level is 1 - alpha")->capture_default_str();
  analyze->add_option("--seed", areq.seed, "Master seed")->capture_default_str();
  analyze->add_option("--threads", areq.threads, "Worker threads (0 = all cores); results do not depend on it")
      ->capture_default_str();
  analyze->add_flag("--no-refit", no_refit, "Reuse the full-data GPS in resamples (exploratory, non-inferential)");
  analyze->add_option("--ridge", areq.ridge, "Ridge penalty on standardized slopes")->capture_default_str();
  analyze->add_option("--max-iter", areq.max_iter, "Newton iteration cap")->capture_default_str();
  analyze->add_option("--out", areq.out, "Results CSV (default stdout); metadata goes to <out>.meta.json");
  analyze->add_option("--plot-data", areq.plot_data, "Long-format CSV for error-bar plots");
  analyze->add_option("--model-out", areq.model_out, "Fitted GPS model as JSON");
  analyze->add_flag("--dump-replicates", areq.dump_replicates, "Store per-replicate (L*, U*) in the metadata JSON");

  SimulateRequest sreq;
  std::string s_config;
  double k2 = 0.0;
  double k3 = 0.0;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on the three-level design");
  simulate->add_option("--config", s_config, "JSON config file (its values win over flags)");
  simulate->add_option("--scenario", sreq.scenario, "I | II | custom")->capture_default_str();
  simulate->add_option("--k2", k2, "Overlap knob k2 (custom scenario)");
  simulate->add_option("--k3", k3, "Overlap knob k3 (custom scenario)");
  simulate->add_option("--x3-sd", sreq.x3_sd, "Standard deviation of X3")->capture_default_str();
  simulate->add_option("--n", sreq.n, "Sample size per replication")->capture_default_str();
  simulate->add_option("--R", sreq.R, "Replications")->capture_default_str();
  simulate->add_option("--B", sreq.B, "Bootstrap replicates per replication")->capture_default_str();
  simulate->add_option("--lambda", sreq.lambdas, "Sensitivity levels; repeatable")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--alpha", sreq.alpha, "CI level is 1 - alpha")->capture_default_str();
  simulate->add_option("--seed", sreq.seed, "Master seed")->capture_default_str();
  simulate->add_option("--oracle-N", sreq.oracle_N, "Population draw size for the true intervals")
      ->capture_default_str();
  simulate->add_option("--threads", sreq.threads, "Worker threads (0 = all cores)")->capture_default_str();
  simulate->add_option("--out", sreq.out, "Study CSV (default stdout); metadata goes to <out>.meta.json");

  VerifyRequest vreq;
  auto* verify_cmd = app.add_subcommand("verify", "Threshold vs LP vs brute-force equivalence and invariant checks");
  verify_cmd->add_option("--seed", vreq.options.seed, "Seed for random instances")->capture_default_str();
  verify_cmd->add_option("--brute-instances", vreq.options.brute_instances)->capture_default_str();
  verify_cmd->add_option("--max-brute-n", vreq.options.max_brute_n)->capture_default_str();
  verify_cmd->add_option("--lp-instances", vreq.options.lp_instances)->capture_default_str();
  verify_cmd->add_option("--max-lp-n", vreq.options.max_lp_n)->capture_default_str();
  verify_cmd->add_option("--collapse-datasets", vreq.options.collapse_datasets)->capture_default_str();
  verify_cmd->add_option("--nesting-datasets", vreq.options.nesting_datasets)->capture_default_str();
  verify_cmd->add_flag("--inject-fault", vreq.inject_fault, "Use a deliberately wrong solver (harness self-test)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  }

  try {
    if (*analyze) {
      areq.gps_model = parse_gps_model_type(gps_model);
      areq.refit_gps = !no_refit;
      if (!a_config.empty()) apply_analyze_config(read_config(a_config), areq, *analyze);
      return cmd_analyze(areq, out, err);
    }
    if (*simulate) {
      if (simulate->count("--k2")) sreq.k2 = k2;
      if (simulate->count("--k3")) sreq.k3 = k3;
      if (!s_config.empty()) apply_simulate_config(read_config(s_config), sreq, *simulate);
      return cmd_simulate(sreq, out, err);
    }
    return cmd_verify(vreq, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::SeparationDetected) err << "hint: pass --ridge with a small positive penalty\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    err << "error: ParseError: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  }
}

}  // namespace mvsens::cli
