#pragma once

#include <ostream>

namespace lmpn {

// Gradient checks and protocol invariants; prints one PASS/FAIL line per
// check and returns the number of failures.
int run_selftest(std::ostream& out);

}  // namespace lmpn
