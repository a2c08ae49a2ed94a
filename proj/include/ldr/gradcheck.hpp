#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ldr {

struct GradcheckSuite {
  std::string name;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Compares every registered loss's analytic score gradient with central finite differences on
/// `instances` random (f, y) per suite, K drawn from [2, 30]. LDR-KL runs at lambda 0.1, 1, 10,
/// inf and 0; ALDR-KL checks both the training step at its fixed lambda_next and the exact loss.
std::vector<GradcheckSuite> run_gradcheck_suites(std::size_t instances, std::uint64_t seed, double tolerance = 1e-5);

}  // namespace ldr
