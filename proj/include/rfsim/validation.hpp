// SPDX-License-Identifier: Apache-2.0
//
// Analytic oracle suite behind `rfsim validate`.

#pragma once

#include <string>
#include <vector>

namespace rfsim {

struct OracleResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct ValidationOptions {
  // Negative control: flips the sign of the transmitted term in the r_par numerator.
  bool inject_fresnel_fault = false;
};

std::vector<OracleResult> run_validation(const ValidationOptions& options = {});

}  // namespace rfsim
