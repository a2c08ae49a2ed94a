#include "ldr/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "ldr/numerics.hpp"

namespace ldr {

namespace {

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

void center(std::span<double> f) {
  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
  for (double& v : f) v -= mean;
}

void project_ball(std::span<double> f, const std::optional<double>& radius) {
  if (!radius) return;
  const double n = norm2(f);
  if (n > *radius) {
    for (double& v : f) v *= *radius / n;
  }
}

struct Descent {
  RealVec f;
  double risk;
  bool converged;
  std::size_t iterations;
  double grad_norm;
};

Descent descend(const LossEvaluator& loss, std::span<const double> q, RealVec f, const RiskMinOptions& opt) {
  const std::size_t K = q.size();
  center(f);
  project_ball(f, opt.ball_radius);
  RealVec g(K), z(K), gz(K), step_to(K);
  double risk = conditional_risk(loss, f, q, g);
  center(g);
  double step = 1.0;
  Descent out{f, risk, false, 0, 0.0};

  // Gradient mapping at unit step; equals the centered gradient without a constraint.
  auto mapping_norm = [&](std::span<const double> x, std::span<const double> grad) {
    for (std::size_t i = 0; i < K; ++i) step_to[i] = x[i] - grad[i];
    project_ball(step_to, opt.ball_radius);
    double s = 0.0;
    for (std::size_t i = 0; i < K; ++i) s += (x[i] - step_to[i]) * (x[i] - step_to[i]);
    return std::sqrt(s);
  };

  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    out.iterations = it;
    out.grad_norm = mapping_norm(f, g);
    if (out.grad_norm <= opt.tol) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    double z_risk = 0.0;
    for (int bt = 0; bt < 80; ++bt) {
      for (std::size_t i = 0; i < K; ++i) z[i] = f[i] - step * g[i];
      center(z);
      project_ball(z, opt.ball_radius);
      double lin = 0.0, dist = 0.0;
      for (std::size_t i = 0; i < K; ++i) {
        lin += g[i] * (z[i] - f[i]);
        dist += (z[i] - f[i]) * (z[i] - f[i]);
      }
      z_risk = conditional_risk(loss, z, q, gz);
      const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(risk);
      if (z_risk <= risk + lin + dist / (2.0 * step) + slack) {
        accepted = step > 1e-9;  // a collapsed step means a kink, not progress
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Nonsmooth kink: continue with diminishing subgradient steps and keep the best point.
      RealVec best = f;
      double best_risk = risk;
      RealVec x = f, gx = g;
      const double s0 = 0.5 / std::max(norm2(g), 1e-12);
      for (std::size_t t = it; t < opt.max_iters; ++t) {
        const double eta = s0 / std::sqrt(static_cast<double>(t - it + 1));
        for (std::size_t i = 0; i < K; ++i) x[i] -= eta * gx[i];
        center(x);
        project_ball(x, opt.ball_radius);
        const double rx = conditional_risk(loss, x, q, gx);
        center(gx);
        if (rx < best_risk) {
          best_risk = rx;
          best = x;
        }
        out.iterations = t + 1;
      }
      f = std::move(best);
      risk = conditional_risk(loss, f, q, g);
      center(g);
      break;
    }
    center(gz);
    // Barzilai-Borwein trial step for the next iteration.
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      const double s = z[i] - f[i], y = gz[i] - g[i];
      ss += s * s;
      sy += s * y;
    }
    step = (sy > 0.0 && ss > 0.0) ? std::clamp(ss / sy, 1e-10, 1e10) : std::min(step * 2.0, 1e10);
    f.swap(z);
    g.swap(gz);
    risk = z_risk;
  }
  if (!out.converged) out.grad_norm = mapping_norm(f, g);
  out.f = std::move(f);
  out.risk = risk;
  return out;
}

// Draws q with entries at least `gap` apart from each other and from zero.
RealVec separated_distribution(std::mt19937_64& rng, std::size_t K, double gap) {
  std::exponential_distribution<double> expo(1.0);
  for (;;) {
    RealVec q(K);
    for (double& v : q) v = expo(rng);
    const double s = std::accumulate(q.begin(), q.end(), 0.0);
    for (double& v : q) v /= s;
    RealVec sorted = q;
    std::sort(sorted.begin(), sorted.end());
    bool ok = sorted[0] >= gap;
    for (std::size_t i = 1; i < K && ok; ++i) ok = sorted[i] - sorted[i - 1] >= gap;
    if (ok) return q;
  }
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Indices within `tol` of the largest score: the argmax up to solver resolution.
std::vector<std::size_t> near_max_set(std::span<const double> f, double tol) {
  const double m = *std::max_element(f.begin(), f.end());
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] >= m - tol) s.push_back(i);
  return s;
}

}  // namespace

LossEvaluator evaluator_for(const Loss& loss) {
  return [&loss](std::span<const double> f, std::size_t y) { return loss.evaluate(f, y); };
}

void require_distribution(std::span<const double> q) {
  if (q.size() < 2) throw DomainError("distribution needs at least two classes");
  require_finite(q, "distribution");
  double s = 0.0;
  for (double v : q) {
    if (v < 0.0) throw DomainError("distribution has a negative entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw DomainError("distribution does not sum to 1");
}

double conditional_risk(const LossEvaluator& loss, std::span<const double> f, std::span<const double> q,
                        std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  double risk = 0.0;
  for (std::size_t l = 0; l < q.size(); ++l) {
    if (q[l] == 0.0) continue;
    const LossGrad r = loss(f, l);
    risk += q[l] * r.value;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += q[l] * r.grad[i];
  }
  return risk;
}

RiskMinResult minimize_conditional_risk(const LossEvaluator& loss, std::span<const double> q,
                                        const RiskMinOptions& options) {
  require_distribution(q);
  if (options.ball_radius && !(*options.ball_radius > 0.0)) throw DomainError("ball radius must be positive");
  const std::size_t K = q.size();
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Descent> runs;
  const std::size_t starts = std::max<std::size_t>(1, options.restarts);
  for (std::size_t r = 0; r < starts; ++r) {
    RealVec f0(K, 0.0);
    if (r == 0 && options.initial) {
      if (options.initial->size() != K) throw DomainError("initial point has the wrong length");
      f0 = *options.initial;
    } else if (r > 0) {
      for (double& v : f0) v = normal(rng);
    }
    runs.push_back(descend(loss, q, std::move(f0), options));
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].risk < runs[best].risk) best = r;
  RiskMinResult result;
  result.f_star = runs[best].f;
  result.risk = runs[best].risk;
  result.converged = runs[best].converged;
  result.iterations = runs[best].iterations;
  result.grad_norm = runs[best].grad_norm;
  for (const Descent& d : runs)
    if (max_abs_diff(d.f, result.f_star) > options.agree_tol) result.restarts_agree = false;
  return result;
}

bool rank_preserving(std::span<const double> f, std::span<const double> q, double tol) {
  if (f.size() != q.size()) throw DomainError("rank_preserving: length mismatch");
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j)
      if (q[i] < q[j] - tol && !(f[i] < f[j])) return false;
  return true;
}

RealVec mse_optimum_oracle(std::span<const double> q) {
  require_distribution(q);
  return RealVec(q.begin(), q.end());
}

SceCheck sce_optimum_check(std::span<const double> q, double alpha, double A, std::uint64_t seed) {
  require_distribution(q);
  SceCheck check;
  if (std::any_of(q.begin(), q.end(), [](double v) { return v == 0.0; })) {
    check.applicable = false;
    return check;
  }
  const Loss sce(LossSpec{"sce", {{"alpha", alpha}, {"A", A}}});
  RiskMinOptions opt;
  opt.seed = seed;
  const RiskMinResult r = minimize_conditional_risk(evaluator_for(sce), q, opt);
  const RealVec p = tempered_softmax(r.f_star, 1.0);

  // Least-squares fit of 1/p on 1/q.
  const std::size_t K = q.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < K; ++i) {
    const double x = 1.0 / q[i], y = 1.0 / p[i];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(K);
  const double denom = n * sxx - sx * sx;
  const double a = denom > 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  const double b = (sy - a * sx) / n;
  double scale = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    scale = std::max(scale, 1.0 / p[i]);
    check.residual = std::max(check.residual, std::abs(a / q[i] + b - 1.0 / p[i]));
  }
  check.residual /= scale;
  check.holds = check.residual <= 1e-3;
  return check;
}

std::vector<ClaimResult> run_calibration_suite(std::size_t instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_K(3, 8);
  std::vector<RealVec> qs;
  for (std::size_t i = 0; i < instances; ++i) qs.push_back(separated_distribution(rng, pick_K(rng), 0.02));

  std::vector<ClaimResult> out;
  auto tally = [](ClaimResult& c, bool conclusive, bool ok, double dev) {
    if (!conclusive) {
      ++c.inconclusive;
      return;
    }
    ++c.checked;
    if (!ok) ++c.failed;
    c.worst = std::max(c.worst, dev);
  };
  auto finish = [&out](ClaimResult c) {
    c.passed = c.checked > 0 && c.failed == 0;
    out.push_back(std::move(c));
  };

  for (double lambda : {0.1, 1.0, 10.0}) {
    for (double c : {0.0, 0.1}) {
      std::ostringstream name;
      name << "ldr_kl rank preserving lambda=" << lambda << " c=" << c;
      ClaimResult claim{name.str()};
      const Loss loss(LossSpec{"ldr_kl", {{"lambda", lambda}, {"c", c}}});
      for (std::size_t i = 0; i < qs.size(); ++i) {
        RiskMinOptions opt;
        opt.seed = seed + i;
        const RiskMinResult r = minimize_conditional_risk(evaluator_for(loss), qs[i], opt);
        tally(claim, r.restarts_agree, r.converged && rank_preserving(r.f_star, qs[i]), r.grad_norm);
      }
      finish(std::move(claim));
    }
  }

  auto softmax_claim = [&](const std::string& name, const LossSpec& spec, double tol, auto target) {
    ClaimResult claim{name};
    const Loss loss(spec);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      RiskMinOptions opt;
      opt.seed = seed + i;
      const RiskMinResult r = minimize_conditional_risk(evaluator_for(loss), qs[i], opt);
      const double dev = max_abs_diff(tempered_softmax(r.f_star, 1.0), target(qs[i]));
      tally(claim, r.restarts_agree, dev <= tol, dev);
    }
    finish(std::move(claim));
  };
  softmax_claim("ldr_kl lambda=1 c=0 softmax(f*) = q", LossSpec{"ldr_kl", {{"lambda", 1.0}, {"c", 0.0}}}, 1e-4,
                [](const RealVec& q) { return q; });
  softmax_claim("gce q=0.5 softmax(f*) proportional to q^2", LossSpec{"gce", {{"q", 0.5}}}, 1e-3,
                [](const RealVec& q) {
                  RealVec t(q.size());
                  for (std::size_t i = 0; i < q.size(); ++i) t[i] = q[i] * q[i];
                  const double s = std::accumulate(t.begin(), t.end(), 0.0);
                  for (double& v : t) v /= s;
                  return t;
                });
  softmax_claim("mse softmax(f*) = q", LossSpec{"mse", {}}, 1e-4,
                [](const RealVec& q) { return mse_optimum_oracle(q); });

  {
    ClaimResult claim{"ldr_kl lambda=inf ball optimum = B(Kq-1)/||Kq-1||"};
    const double B = 1.0;
    for (double c : {0.0, 0.1}) {
      const Loss loss(LossSpec{"ldr_kl", {{"lambda", kInfinity}, {"c", c}}});
      for (std::size_t i = 0; i < qs.size(); ++i) {
        RiskMinOptions opt;
        opt.seed = seed + i;
        opt.ball_radius = B;
        const RiskMinResult r = minimize_conditional_risk(evaluator_for(loss), qs[i], opt);
        const std::size_t K = qs[i].size();
        RealVec expect(K);
        for (std::size_t k = 0; k < K; ++k) expect[k] = static_cast<double>(K) * qs[i][k] - 1.0;
        const double n = norm2(expect);
        for (double& v : expect) v *= B / n;
        const double dev = max_abs_diff(r.f_star, expect);
        tally(claim, r.restarts_agree, dev <= 1e-5, dev);
      }
    }
    finish(std::move(claim));
  }

  {
    ClaimResult claim{"sce 1/p* affine in 1/q"};
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const SceCheck s = sce_optimum_check(qs[i], 0.5, -4.0, seed + i);
      tally(claim, s.applicable, s.holds, s.residual);
    }
    finish(std::move(claim));
  }

  {
    // The MAE minimizer set is not a point, so restart agreement is not required here.
    ClaimResult claim{"mae top-1 of f* = argmax q"};
    const Loss loss(LossSpec{"mae", {}});
    for (std::size_t i = 0; i < qs.size(); ++i) {
      RiskMinOptions opt;
      opt.seed = seed + i;
      opt.max_iters = 2000;
      const RiskMinResult r = minimize_conditional_risk(evaluator_for(loss), qs[i], opt);
      tally(claim, true, argmax_lowest(r.f_star) == argmax_lowest(qs[i]), 0.0);
    }
    finish(std::move(claim));
  }

  {
    ClaimResult claim{"crammer-singer argmax invariant to doubling the start"};
    const Loss loss(LossSpec{"cs", {}});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      RealVec f0(qs[i].size());
      for (double& v : f0) v = normal(rng);
      RealVec f1 = f0;
      for (double& v : f1) v *= 2.0;
      RiskMinOptions a, b;
      a.seed = b.seed = seed + i;
      a.max_iters = b.max_iters = 2000;
      a.initial = f0;
      b.initial = f1;
      const RiskMinResult ra = minimize_conditional_risk(evaluator_for(loss), qs[i], a);
      const RiskMinResult rb = minimize_conditional_risk(evaluator_for(loss), qs[i], b);
      tally(claim, true, near_max_set(ra.f_star, 0.05) == near_max_set(rb.f_star, 0.05), 0.0);
    }
    finish(std::move(claim));
  }
  return out;
}

std::string calibration_csv(const std::vector<ClaimResult>& rows) {
  std::ostringstream os;
  os << "schema_version,claim,passed,checked,failed,inconclusive,worst\n";
  for (const ClaimResult& r : rows) {
    os << 1 << ",\"" << r.claim << "\"," << (r.passed ? "true" : "false") << ',' << r.checked << ','
       << r.failed << ',' << r.inconclusive << ',' << r.worst << '\n';
  }
  return os.str();
}

}  // namespace ldr
