#pragma once

// Shared between the 64-bit and 32-bit halves of the acceptance binary, so
// only standard types cross the boundary.

#include <string>

namespace acceptance {

struct Verdict {
  bool pass = false;
  std::string detail;
};

// Implemented against the single-precision library (the CLI's training build).
Verdict sweep_isolation();
Verdict end_to_end();
Verdict noise_trend();
Verdict determinism();

}  // namespace acceptance
