#include "mvsens/estimands.hpp"

#include "mvsens/error.hpp"

#include <algorithm>
#include <cstring>

namespace mvsens {

ContrastResult contrast_interval(std::span<const ArmExtrema> extrema, const ContrastVector& c) {
  if (static_cast<Index>(extrema.size()) != c.size()) {
    fail(ErrorCode::LengthMismatch, "contrast has " + std::to_string(c.size()) + " entries but " +
                                        std::to_string(extrema.size()) + " arms were given");
  }
  ContrastResult r{c, extrema.empty() ? 0.0 : extrema.front().lambda, 0.0, 0.0, 0.0};
  for (std::size_t a = 0; a < extrema.size(); ++a) {
    const double ca = c[static_cast<Index>(a)];
    if (ca > 0.0) {
      r.lo += ca * extrema[a].m_min;
      r.hi += ca * extrema[a].m_max;
    } else if (ca < 0.0) {
      r.lo += ca * extrema[a].m_max;
      r.hi += ca * extrema[a].m_min;
    }
    r.point_estimate += ca * extrema[a].point;
  }
  return r;
}

std::uint64_t fingerprint(const GpsMatrix& gps) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t k = 0; k < len; ++k) {
      h ^= b[k];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t dims[2] = {gps.logits.rows(), gps.logits.cols()};
  mix(dims, sizeof dims);
  mix(gps.logits.data(), sizeof(double) * gps.logits.size());
  return h;
}

std::shared_ptr<const std::vector<ArmExtrema>> ExtremaCache::get(const ObservationalDataset& data,
                                                                 const GpsMatrix& gps,
                                                                 const SensitivityParams& params) {
  const Key key{data.fingerprint(), fingerprint(gps), params.lambda};
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  auto value = std::make_shared<const std::vector<ArmExtrema>>(all_arm_extrema(data, gps, params, false));
  std::lock_guard lock(mutex_);
  ++computations_;
  return entries_.emplace(key, std::move(value)).first->second;
}

std::size_t ExtremaCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::size_t ExtremaCache::computations() const {
  std::lock_guard lock(mutex_);
  return computations_;
}

std::vector<ContrastResult> contrast_table(const ObservationalDataset& data, const GpsMatrix& gps,
                                           std::span<const ContrastVector> contrasts, std::vector<double> lambdas,
                                           ExtremaCache* cache) {
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  for (const auto& c : contrasts) {
    if (c.size() != data.num_levels()) {
      fail(ErrorCode::LengthMismatch, "contrast " + c.label() + " has " + std::to_string(c.size()) +
                                          " entries for J=" + std::to_string(data.num_levels()));
    }
  }

  ExtremaCache local;
  ExtremaCache& store = cache ? *cache : local;
  std::vector<std::shared_ptr<const std::vector<ArmExtrema>>> per_lambda;
  for (double lam : lambdas) per_lambda.push_back(store.get(data, gps, SensitivityParams::from_lambda(lam)));

  std::vector<ContrastResult> out;
  for (const auto& c : contrasts) {
    for (std::size_t k = 0; k < lambdas.size(); ++k) out.push_back(contrast_interval(*per_lambda[k], c));
  }
  return out;
}

std::vector<ContrastResult> pairwise_ate_table(const ObservationalDataset& data, const GpsMatrix& gps,
                                               std::vector<double> lambdas, ExtremaCache* cache) {
  const auto contrasts = all_pairwise_contrasts(data.num_levels());
  return contrast_table(data, gps, contrasts, std::move(lambdas), cache);
}

}  // namespace mvsens
