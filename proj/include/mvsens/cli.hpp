#pragma once

#include "mvsens/bootstrap.hpp"
#include "mvsens/dataset.hpp"
#include "mvsens/gps.hpp"
#include "mvsens/simulation.hpp"
#include "mvsens/verify.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mvsens::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kPropertyFailure = 1, kValidationError = 2, kNumericalError = 3 };

inline constexpr std::string_view kVersion = "0.1.0";

struct AnalyzeRequest {
  std::string data;
  std::string treatment;
  std::string outcome;
  std::vector<std::string> covariates;
  std::vector<std::string> levels;
  GpsModelType gps_model = GpsModelType::multinomial_logit;
  std::vector<std::string> contrasts;  ///< "k,l", "[c1,...,cJ]"; empty = all pairwise
  std::vector<double> lambdas{0.0, 0.5, 0.75, 1.0, 1.5, 2.0};
  int B = 1000;  ///< 0 skips the bootstrap
  double alpha = 0.10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool refit_gps = true;
  double ridge = 0.0;
  int max_iter = 100;
  std::string out;  ///< results CSV; empty = stdout
  std::string plot_data;
  std::string model_out;
  bool dump_replicates = false;
};

struct SimulateRequest {
  std::string scenario = "I";
  std::optional<double> k2;
  std::optional<double> k3;
  double x3_sd = 0.5;
  Index n = 750;
  int R = 300;
  int B = 500;
  std::vector<double> lambdas{0.0, 0.1, 0.2, 0.5, 1.0, 2.0};
  double alpha = 0.10;
  std::uint64_t seed = 0;
  Index oracle_N = 1'000'000;
  unsigned threads = 1;
  std::string out;  ///< study CSV; empty = stdout
};

struct VerifyRequest {
  verify::VerifyOptions options;
  bool inject_fault = false;  ///< deliberately broken solver, to exercise the failure path
};

/**
 * Parses a contrast over J levels. "k,l" (two integers with 1 <= k < l <= J)
 * is the pairwise ATE m(k) - m(l); "[c1,...,cJ]" or "(c1,...,cJ)" is an
 * explicit vector, as is a bare list of J > 2 numbers.
 */
ContrastVector parse_contrast(const std::string& text, int num_levels);

int cmd_analyze(const AnalyzeRequest& request, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateRequest& request, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyRequest& request, std::ostream& out, std::ostream& err);

/// Full command line: `mvsens analyze|simulate|verify [flags]`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mvsens::cli
