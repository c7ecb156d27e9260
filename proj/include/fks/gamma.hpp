#pragma once

namespace fks {

// Gamma function via the Lanczos approximation (g = 7, 9 terms) with the
// reflection formula below 1/2. Relative error stays under 1e-13 on (0, 30].
// Throws ParameterError at the poles (0, -1, -2, ...).
double gamma_fn(double x);

// log|Γ(x)| for x > 0.
double log_gamma_fn(double x);

}  // namespace fks
