#pragma once

#include <cstddef>

#include "gpds/common.hpp"

namespace gpds {

struct MoveCounter {
  std::size_t proposed = 0;
  std::size_t accepted = 0;

  void record(bool was_accepted) {
    ++proposed;
    if (was_accepted) ++accepted;
  }
  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed); }
};

struct StepResult {
  bool accepted = false;
  /// The fantasy generator ran out of proposals; the state was left untouched.
  bool budget_exceeded = false;
  double log_ratio = -kInf;
};

}  // namespace gpds
