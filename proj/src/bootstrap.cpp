#include "mvsens/bootstrap.hpp"

#include "mvsens/error.hpp"
#include "mvsens/parallel.hpp"
#include "mvsens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace mvsens {

double quantile(std::span<const double> values, double q) {
  if (values.empty()) fail(ErrorCode::EmptyInput, "quantile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::InvalidArgument, "quantile level must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * q;
  const auto k = static_cast<std::size_t>(std::floor(h));
  if (k + 1 >= v.size()) return v.back();
  return v[k] + (h - static_cast<double>(k)) * (v[k + 1] - v[k]);
}

BootstrapReplicates BootstrapReplicates::run(const ObservationalDataset& data, const GpsModelSpec& spec,
                                             std::vector<double> lambdas, const BootstrapConfig& config,
                                             const GpsModel* full_model) {
  if (config.B < 2) fail(ErrorCode::InvalidArgument, "bootstrap needs B >= 2");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  if (config.max_redraws < 1) fail(ErrorCode::InvalidArgument, "max_redraws must be >= 1");
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  std::vector<SensitivityParams> params;
  for (double lam : lambdas) params.push_back(SensitivityParams::from_lambda(lam));

  std::optional<GpsModel> owned;
  if (!full_model) {
    owned.emplace(fit_gps(spec.type, data, spec.fit));
    full_model = &*owned;
  }
  const GpsMatrix full_gps = predict_gps(*full_model, data);
  FitConfig warm = spec.fit;
  warm.initial_coef = coefficients(*full_model);

  const int J = data.num_levels();
  const Index n = data.size();
  const std::size_t K = params.size();
  const std::size_t stride = K * static_cast<std::size_t>(J) * 2;

  BootstrapReplicates out;
  out.lambdas_ = lambdas;
  out.num_levels_ = J;
  out.bounds_.assign(static_cast<std::size_t>(config.B) * stride, 0.0);
  std::vector<long> redraws(config.B, 0);
  std::vector<long> fit_failures(config.B, 0);

  auto store = [&](std::size_t b, const std::vector<std::vector<ArmExtrema>>& ext) {
    double* slot = out.bounds_.data() + b * stride;
    for (std::size_t k = 0; k < K; ++k) {
      for (int a = 0; a < J; ++a) {
        *slot++ = ext[k][a].m_min;
        *slot++ = ext[k][a].m_max;
      }
    }
  };

  parallel_for(static_cast<std::size_t>(config.B), config.threads, [&](std::size_t b) {
    Rng rng = make_stream(config.seed, StreamDomain::bootstrap, b);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::vector<Index> counts(J);
    int failures = 0;
    for (;;) {
      std::fill(counts.begin(), counts.end(), 0);
      for (auto& r : rows) {
        r = pick(rng);
        ++counts[data.treatment()[r] - 1];
      }
      const bool degenerate = std::any_of(counts.begin(), counts.end(), [](Index c) { return c == 0; });
      std::optional<GpsMatrix> gps;
      if (degenerate) {
        ++redraws[b];
      } else if (config.refit_gps) {
        const ObservationalDataset sample = data.select_rows(rows);
        try {
          gps = predict_gps(fit_gps(spec.type, sample, warm), sample);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DidNotConverge && e.code() != ErrorCode::SeparationDetected) throw;
          ++fit_failures[b];
        }
        if (gps) {
          store(b, all_arm_extrema(sample, *gps, params, false));
          return;
        }
      } else {
        GpsMatrix g{Eigen::MatrixXd(n, J), Eigen::MatrixXd(n, J)};
        for (Index i = 0; i < n; ++i) {
          g.probs.row(i) = full_gps.probs.row(rows[i]);
          g.logits.row(i) = full_gps.logits.row(rows[i]);
        }
        const ObservationalDataset sample = data.select_rows(rows);
        store(b, all_arm_extrema(sample, g, params, false));
        return;
      }
      if (++failures >= config.max_redraws) {
        fail(ErrorCode::ResampleDegenerate,
             "bootstrap replicate " + std::to_string(b) + ": " + std::to_string(failures) +
                 " consecutive resamples were missing a treatment level or failed the GPS refit; "
                 "an arm is too small or overlap fails");
      }
    }
  });

  auto& dg = out.diagnostics_;
  dg.B = config.B;
  dg.B_effective = config.B;
  for (int b = 0; b < config.B; ++b) {
    dg.redraws += redraws[b];
    dg.fit_failures += fit_failures[b];
  }
  dg.seed = config.seed;
  dg.rng_family = std::string(kRngFamily);
  dg.refit_gps = config.refit_gps;
  return out;
}

std::size_t BootstrapReplicates::lambda_index(double lambda) const {
  for (std::size_t k = 0; k < lambdas_.size(); ++k) {
    if (lambdas_[k] == lambda) return k;
  }
  fail(ErrorCode::InvalidArgument, "lambda " + std::to_string(lambda) + " was not part of the bootstrap grid");
}

std::vector<std::pair<double, double>> BootstrapReplicates::replicate_bounds(const ContrastVector& c,
                                                                             double lambda) const {
  if (c.size() != num_levels_) fail(ErrorCode::LengthMismatch, "contrast length differs from number of levels");
  const std::size_t k = lambda_index(lambda);
  const std::size_t stride = lambdas_.size() * static_cast<std::size_t>(num_levels_) * 2;
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(replicates()));
  for (int b = 0; b < replicates(); ++b) {
    const double* arm = bounds_.data() + b * stride + k * num_levels_ * 2;
    double lo = 0.0;
    double hi = 0.0;
    for (int a = 0; a < num_levels_; ++a) {
      const double ca = c[a];
      const double mn = arm[2 * a];
      const double mx = arm[2 * a + 1];
      if (ca > 0.0) {
        lo += ca * mn;
        hi += ca * mx;
      } else if (ca < 0.0) {
        lo += ca * mx;
        hi += ca * mn;
      }
    }
    out.emplace_back(lo, hi);
  }
  return out;
}

ConfidenceInterval BootstrapReplicates::ci(const ContrastVector& c, double lambda, double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  const auto bounds = replicate_bounds(c, lambda);
  std::vector<double> lo;
  std::vector<double> hi;
  for (const auto& [l, u] : bounds) {
    lo.push_back(l);
    hi.push_back(u);
  }
  return ConfidenceInterval{quantile(lo, alpha / 2.0), quantile(hi, 1.0 - alpha / 2.0), alpha, replicates()};
}

ConfidenceInterval percentile_bootstrap_ci(const ObservationalDataset& data, const GpsModelSpec& spec,
                                           const ContrastVector& c, const SensitivityParams& params,
                                           const BootstrapConfig& config) {
  const auto reps = BootstrapReplicates::run(data, spec, {params.lambda}, config);
  return reps.ci(c, params.lambda, config.alpha);
}

}  // namespace mvsens
