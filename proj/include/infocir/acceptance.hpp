#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "infocir/projection.hpp"
#include "json.hpp"

namespace infocir {

struct AcceptanceOptions {
  std::uint64_t seed = 1;
  // Replaces the Fisher scoring routine everywhere the suite uses it.
  std::function<FisherAnalysis(const Matrix&, const std::vector<std::string>&)> fisher;
  bool check_determinism = true;          // run every other criterion twice
  std::filesystem::path work_dir;         // scratch space; a temp dir when empty
};

struct CriterionResult {
  std::string name;
  bool passed = false;
  nlohmann::json detail;  // deterministic values only, no timings
};

struct AcceptanceReport {
  std::uint64_t seed = 0;
  std::vector<CriterionResult> criteria;

  bool passed() const;
  nlohmann::json to_json() const;
};

AcceptanceReport run_acceptance(const AcceptanceOptions& options);

/// Deliberately broken Fisher routine (scores = component variance) used to
/// check that the suite notices a wrong implementation.
FisherAnalysis perturbed_fisher(const Matrix& x, const std::vector<std::string>& labels);

}  // namespace infocir
