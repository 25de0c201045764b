#pragma once

namespace tinbc {

/// Gaussian tail probability Q(x) = P[N(0,1) > x].
double qfunc(double x);

/// Inverse of Q on (0, 0.5]. Throws std::domain_error outside that range.
double qfunc_inv(double p);

}  // namespace tinbc
