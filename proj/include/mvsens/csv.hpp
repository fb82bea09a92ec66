#pragma once

#include "mvsens/dataset.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mvsens {

/**
 * Column mapping for load_csv.
 *
 * `levels` fixes the ordering of treatment labels: levels[a-1] is the label
 * of level a. When empty, the treatment column must hold integers 1..J where
 * J is `num_levels` if positive, else the largest label seen.
 */
struct CsvColumns {
  std::string treatment;
  std::string outcome;
  std::vector<std::string> covariates;
  std::vector<std::string> levels;
  int num_levels = 0;
};

ObservationalDataset load_csv(const std::filesystem::path& path, const CsvColumns& columns);

/// Same as load_csv, reading CSV text from memory.
ObservationalDataset parse_csv(const std::string& text, const CsvColumns& columns);

/// Writes treatment (level label), covariates and outcome with 17 significant
/// digits so that load_csv reproduces the dataset exactly.
void write_csv(const ObservationalDataset& data, const std::filesystem::path& path,
               const std::string& treatment_col = "treatment",
               const std::string& outcome_col = "outcome");

std::string format_csv(const ObservationalDataset& data,
                       const std::string& treatment_col = "treatment",
                       const std::string& outcome_col = "outcome");

/// Quotes a field when it holds a comma, quote or line break.
std::string csv_field(std::string_view s);

/// "%.17g" formatting; parses back to the identical double.
std::string format_double(double v);

}  // namespace mvsens
