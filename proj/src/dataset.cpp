#include "mvsens/dataset.hpp"

#include "mvsens/error.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace mvsens {

ObservationalDataset::ObservationalDataset(Eigen::VectorXi treatment, Eigen::MatrixXd covariates,
                                           Eigen::VectorXd outcome, int num_levels,
                                           std::vector<std::string> covariate_names,
                                           std::vector<std::string> level_labels)
    : treatment_(std::move(treatment)),
      covariates_(std::move(covariates)),
      outcome_(std::move(outcome)),
      num_levels_(num_levels),
      covariate_names_(std::move(covariate_names)),
      level_labels_(std::move(level_labels)) {
  if (num_levels_ < 2) {
    fail(ErrorCode::InvalidArgument, "need at least 2 treatment levels, got " + std::to_string(num_levels_));
  }
  const Index n = treatment_.size();
  if (covariates_.rows() != n || outcome_.size() != n) {
    fail(ErrorCode::DimensionMismatch, "treatment, covariate and outcome row counts differ");
  }
  if (covariate_names_.empty()) {
    for (Index j = 0; j < covariates_.cols(); ++j) covariate_names_.push_back("x" + std::to_string(j + 1));
  } else if (static_cast<Index>(covariate_names_.size()) != covariates_.cols()) {
    fail(ErrorCode::DimensionMismatch, "covariate name count does not match covariate columns");
  }
  if (level_labels_.empty()) {
    for (int a = 1; a <= num_levels_; ++a) level_labels_.push_back(std::to_string(a));
  } else if (static_cast<int>(level_labels_.size()) != num_levels_) {
    fail(ErrorCode::DimensionMismatch, "level label count does not match number of levels");
  }

  std::vector<Index> counts(num_levels_, 0);
  for (Index i = 0; i < n; ++i) {
    const int a = treatment_[i];
    if (a < 1 || a > num_levels_) {
      fail(ErrorCode::InvalidArgument, "treatment label " + std::to_string(a) + " at row " +
                                           std::to_string(i + 1) + " outside 1.." +
                                           std::to_string(num_levels_));
    }
    ++counts[a - 1];
    if (!std::isfinite(outcome_[i])) {
      fail(ErrorCode::NonFiniteValue, "row " + std::to_string(i + 1) + ", column outcome");
    }
    for (Index j = 0; j < covariates_.cols(); ++j) {
      if (!std::isfinite(covariates_(i, j))) {
        fail(ErrorCode::NonFiniteValue,
             "row " + std::to_string(i + 1) + ", column " + covariate_names_[j]);
      }
    }
  }
  for (int a = 1; a <= num_levels_; ++a) {
    if (counts[a - 1] == 0) {
      fail(ErrorCode::EmptyTreatmentLevel,
           "level " + std::to_string(a) + " (" + level_labels_[a - 1] + ") has no units");
    }
  }
}

Unit ObservationalDataset::unit(Index i) const {
  return Unit{treatment_[i], covariates_.row(i).transpose(), outcome_[i]};
}

std::vector<Index> ObservationalDataset::level_counts() const {
  std::vector<Index> counts(num_levels_, 0);
  for (Index i = 0; i < size(); ++i) ++counts[treatment_[i] - 1];
  return counts;
}

std::vector<Index> ObservationalDataset::arm_indices(int level) const {
  std::vector<Index> rows;
  for (Index i = 0; i < size(); ++i) {
    if (treatment_[i] == level) rows.push_back(i);
  }
  return rows;
}

ObservationalDataset ObservationalDataset::select_rows(std::span<const Index> rows) const {
  const Index m = static_cast<Index>(rows.size());
  Eigen::VectorXi t(m);
  Eigen::MatrixXd x(m, covariates_.cols());
  Eigen::VectorXd y(m);
  for (Index r = 0; r < m; ++r) {
    const Index i = rows[r];
    t[r] = treatment_[i];
    x.row(r) = covariates_.row(i);
    y[r] = outcome_[i];
  }
  return ObservationalDataset(std::move(t), std::move(x), std::move(y), num_levels_,
                              covariate_names_, level_labels_);
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t k = 0; k < len; ++k) {
      h ^= b[k];
      h *= 0x100000001b3ULL;
    }
  }
  void str(const std::string& s) {
    const std::uint64_t len = s.size();
    bytes(&len, sizeof len);
    bytes(s.data(), s.size());
  }
};

}  // namespace

std::uint64_t ObservationalDataset::fingerprint() const {
  Fnv1a f;
  const std::int64_t dims[3] = {size(), num_covariates(), num_levels_};
  f.bytes(dims, sizeof dims);
  f.bytes(treatment_.data(), sizeof(int) * treatment_.size());
  f.bytes(covariates_.data(), sizeof(double) * covariates_.size());
  f.bytes(outcome_.data(), sizeof(double) * outcome_.size());
  for (const auto& s : covariate_names_) f.str(s);
  for (const auto& s : level_labels_) f.str(s);
  return f.h;
}

ContrastVector::ContrastVector(Eigen::VectorXd coefficients, std::string label)
    : c_(std::move(coefficients)), label_(std::move(label)) {
  if (c_.size() == 0 || (c_.array() == 0.0).all()) {
    fail(ErrorCode::InvalidArgument, "contrast vector needs at least one nonzero entry");
  }
  if (!c_.allFinite()) fail(ErrorCode::NonFiniteValue, "contrast vector has non-finite entries");
  if (label_.empty()) {
    std::ostringstream os;
    os << "c=(";
    for (Index a = 0; a < c_.size(); ++a) os << (a ? "," : "") << c_[a];
    os << ")";
    label_ = os.str();
  }
}

ContrastVector ContrastVector::scaled(double alpha) const {
  return ContrastVector(alpha * c_);
}

ContrastVector pairwise_contrast(int k, int l, int num_levels) {
  if (k == l || k < 1 || l < 1 || k > num_levels || l > num_levels || k > l) {
    fail(ErrorCode::InvalidLevelPair, "(" + std::to_string(k) + ", " + std::to_string(l) +
                                          ") with J=" + std::to_string(num_levels));
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(num_levels);
  c[k - 1] = 1.0;
  c[l - 1] = -1.0;
  return ContrastVector(std::move(c), "tau_{" + std::to_string(k) + "," + std::to_string(l) + "}");
}

std::vector<ContrastVector> all_pairwise_contrasts(int num_levels) {
  std::vector<ContrastVector> out;
  for (int k = 1; k <= num_levels; ++k) {
    for (int l = k + 1; l <= num_levels; ++l) out.push_back(pairwise_contrast(k, l, num_levels));
  }
  return out;
}

}  // namespace mvsens
