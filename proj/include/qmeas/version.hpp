#pragma once

namespace qmeas {

/// Toolkit version reported in run records.
inline constexpr const char* kVersion = "0.1.0";

}  // namespace qmeas
