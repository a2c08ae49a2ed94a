#include "ldr/gradcheck.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "ldr/loss_registry.hpp"
#include "ldr/numerics.hpp"

namespace ldr {

namespace {

struct Instance {
  RealVec f;
  std::size_t y;
};

Instance draw(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick_K(2, 30);
  std::normal_distribution<double> normal(0.0, 1.0);
  Instance inst{RealVec(pick_K(rng)), 0};
  for (double& v : inst.f) v = normal(rng);
  inst.y = std::uniform_int_distribution<std::size_t>(0, inst.f.size() - 1)(rng);
  return inst;
}

std::string label(const LossSpec& spec) {
  std::ostringstream os;
  os << spec.name;
  for (const auto& [k, v] : spec.params) os << ' ' << k << '=' << v;
  return os.str();
}

}  // namespace

std::vector<GradcheckSuite> run_gradcheck_suites(std::size_t instances, std::uint64_t seed, double tolerance) {
  std::vector<LossSpec> specs;
  for (double lambda : {0.1, 1.0, 10.0, kInfinity, 0.0}) specs.push_back({"ldr_kl", {{"lambda", lambda}}});
  specs.push_back({"aldr_kl", {{"lambda0", 1.0}}});
  specs.push_back({"ldr_k_kl", {{"lambda", 1.0}, {"k", 2.0}}});
  for (const auto& name : registered_loss_names())
    if (name != "ldr_kl" && name != "aldr_kl" && name != "ldr_k_kl") specs.push_back({name, {}});

  std::vector<GradcheckSuite> out;
  std::mt19937_64 rng(seed);
  for (const LossSpec& spec : specs) {
    const Loss loss(spec);
    GradcheckSuite suite{label(spec), instances, 0.0, tolerance, true};
    GradcheckSuite step_suite{label(spec) + " step", instances, 0.0, tolerance, true};
    for (std::size_t t = 0; t < instances; ++t) {
      Instance inst = draw(rng);
      const LossGrad lg = loss.evaluate(inst.f, inst.y);
      const RealVec fd =
          finite_diff_grad([&](std::span<const double> x) { return loss.evaluate(x, inst.y).value; }, inst.f);
      suite.max_rel_error = std::max(suite.max_rel_error, relative_error(lg.grad, fd));

      if (loss.is_adaptive()) {
        // The training step differentiates at its own lambda_next, held fixed.
        double lambda = loss.aldr_params(inst.f.size()).lambda0;
        const LossGrad step = loss.adaptive_step(inst.f, inst.y, lambda);
        const AldrKlParams params = loss.aldr_params(inst.f.size());
        const RealVec fd_step = finite_diff_grad(
            [&](std::span<const double> x) {
              return ldr_kl(x, inst.y, LdrKlParams{lambda, params.margin}).value;
            },
            inst.f);
        step_suite.max_rel_error = std::max(step_suite.max_rel_error, relative_error(step.grad, fd_step));
      }
    }
    suite.passed = suite.max_rel_error <= tolerance;
    out.push_back(suite);
    if (loss.is_adaptive()) {
      step_suite.passed = step_suite.max_rel_error <= tolerance;
      out.push_back(step_suite);
    }
  }
  return out;
}

}  // namespace ldr
