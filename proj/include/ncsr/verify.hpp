#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ncsr/model.hpp"

namespace ncsr {

struct PropertyResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

/// `PASS name  measured=...  tol=...  note`
std::string format_property(const PropertyResult& r);

struct VerifyOptions {
  bool full = false;
  uint64_t seed = 0;
  /// Make one 1x1 weight singular before the log-det checks.
  bool inject_singular_1x1 = false;
};

/// Round trips, log-det against assembled Jacobians, gradient probes and
/// metric oracles. `full` adds the brute-force model likelihood check and
/// larger sweeps.
std::vector<PropertyResult> run_verify(const VerifyOptions& opt,
                                       const std::function<void(const PropertyResult&)>& on_result = {});

/// Moves every parameter away from its (often zero) initial value so
/// gradient and Jacobian checks exercise all paths: additive U(-mag, mag)
/// noise, multiplicative exp(U(-mag, mag)) for actnorm scales.
void perturb_parameters(NcsrModel& model, Rng& rng, double mag);

/// Central-difference Jacobian of f at x, row-major (outputs x inputs).
std::vector<double> numeric_jacobian(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h);
/// log|det| of a square row-major matrix by full-pivot LU.
double log_abs_det_dense(const std::vector<double>& m, int64_t n);

}  // namespace ncsr
