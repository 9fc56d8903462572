#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace t2i {

// Machine-readable failure classes. The CLI prints the name and maps each to
// a distinct exit code.
enum class ErrorCategory {
  invalid_argument = 2,
  assumption_violation = 3,  // contact footprint leaves the sensing area
  contact_loss = 4,          // nothing survives height filtering
  degenerate = 5,            // rank-deficient rigid solve
  solver = 6,                // Poisson solve did not converge
  no_clusters = 7,           // background removal found only noise
  registration = 8,          // every ICP candidate failed
  io = 9,
  config = 10,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::invalid_argument: return "invalid_argument";
    case ErrorCategory::assumption_violation: return "assumption_violation";
    case ErrorCategory::contact_loss: return "contact_loss";
    case ErrorCategory::degenerate: return "degenerate";
    case ErrorCategory::solver: return "solver";
    case ErrorCategory::no_clusters: return "no_clusters";
    case ErrorCategory::registration: return "registration";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what, std::string stage = {})
      : std::runtime_error(what), category_(category), stage_(std::move(stage)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& stage() const noexcept { return stage_; }

  // Returns a copy tagged with the pipeline stage that raised it, keeping the
  // innermost label if one is already set.
  Error with_stage(std::string stage) const {
    return Error(category_, what(), stage_.empty() ? std::move(stage) : stage_);
  }

 private:
  ErrorCategory category_;
  std::string stage_;
};

}  // namespace t2i
