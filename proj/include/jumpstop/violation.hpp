#pragma once

#include <string>

namespace jumpstop {

/// Which standing assumption a probed bound belongs to.
enum class AssumptionLevel {
  existence,   // required by both engines
  comparison,  // tightened bounds needed only for the comparison/uniqueness tests
};

/// A probe at which a coefficient bound failed.
struct Violation {
  std::string check;
  std::string detail;
  double measured = 0.0;
  double bound = 0.0;
  AssumptionLevel level = AssumptionLevel::existence;
};

}  // namespace jumpstop
