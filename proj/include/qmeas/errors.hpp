#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qmeas {

/// Base class for every error the toolkit throws deliberately.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An input failed a precondition: malformed grid size, incompatible
/// dimensions, an out-of-range parameter, a bad config field, ...
struct ValidationError : Error {
  using Error::Error;
};

/// A quantity that should hold by construction drifted past its tolerance
/// at runtime (lost normalization, effects not summing to identity, ...).
struct NumericalError : Error {
  using Error::Error;
};

/// A conditioning step was asked to normalize by (almost) vanishing
/// probability mass.
struct PostselectionError : Error {
  using Error::Error;
};

/// Collector for non-fatal observations (mass truncation, window coverage,
/// ill-conditioned inversions).  Callers that do not care pass nullptr.
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
  bool empty() const { return warnings.empty(); }
};

/// Convenience: record a warning when a collector is present.
inline void warn_if(Diagnostics* diag, std::string message) {
  if (diag != nullptr) diag->warn(std::move(message));
}

}  // namespace qmeas
