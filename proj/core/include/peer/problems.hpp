#pragma once

#include "peer/relaxation.hpp"

namespace peer {

// Damped linear oscillator with a non-trivial equilibrium:
// f0(u) = [u2, -u1], f1(u) = [0, 1 - u2], u* = [1, 0], default u0 = [0, 1].
// Solutions spiral into u* at rate e^{-t/2}.
SplitProblem wb_boscarino_pareschi();

// Stiff nonlinear relaxation ODE: f0(U) = [-U2, U1],
// f1(U) = (1/eps) [0, sin U1 - U2]; C = [1 0], E(u) = [u, sin u];
// limit dynamics u' = -sin u.  Initial data [pi/2, 1] is well prepared.
RelaxationProblem ap_pareschi_russo(double epsilon);

// Exactness oracle with state (tau, y): tau' = 1 and y' = q(tau) split as
// alpha q into f0 and (1 - alpha) q into f1, q = d/dtau tau^degree.
// Exact solution (t, t^degree).
SplitProblem polynomial_exactness_problem(int degree, double alpha);

// Periodic first-order upwind semi-discretization of
// u_t + v_x = 0, v_t + a u_x = (1/eps)(b u - v) on [0,1];
// state [u_cells; v_cells], C selects the u-cells, E(u) = [u; b u].
// Requires a > b^2 and cells >= 8.  Initial data u = sin(2 pi x), v = b u.
RelaxationProblem jin_xin_demo(double epsilon, int cells = 32, double b = 0.5,
                               double a = 1.0);

}  // namespace peer
