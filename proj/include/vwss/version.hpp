#pragma once

namespace vwss {

/// Library/tool version embedded in every emitted report.
inline constexpr char kVersion[] = "0.1.0";

} // namespace vwss
