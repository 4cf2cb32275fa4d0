#pragma once

#include <string>
#include <vector>

namespace vqa {

/// One row of the gradient verification table.
struct GradCheckRow {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Central finite-difference checks (h = 1e-3, forward recomputed in 64-bit
/// by an independent naive implementation) against the tape gradients, for
/// every layer type and for a tiny end-to-end model (D=4, 16x16).
///
/// `corrupt_backward` injects a deliberate error into one tape gradient
/// before comparison; it exists as a negative control for the harness itself.
std::vector<GradCheckRow> run_gradcheck(bool corrupt_backward = false);

}  // namespace vqa
