"""Dev experiment: Test Case 1 optimization behavior at demo scale."""
import time
import numpy as np
from fpcontrol.grid import Grid4D
from fpcontrol.model import ControlSchedule, NonDimParams, DispersionSpec, State
from fpcontrol.fpsolver import solve_forward, mean_state
from fpcontrol.target import gaussian_on_grid, build_target
from fpcontrol.ode import integrate
from fpcontrol.pipeline import FpControlProblem
from fpcontrol.pncg import pncg, PncgConfig
from fpcontrol.adjoint import time_weights

base = dict(a=1.9, b=0.25, c=0.05, e=0.2, f=0.2, p=1e9, m=0.05, j=0.1,
            k=0.5, q=5e7, r1=0.1, r2=0.1, alpha=0.1, beta=0.1,
            alpha1=0.3, alpha2=0.01, alpha3=0.01, alpha4=0.01,
            beta_n=5.0, beta_l=5.0, ratio_tl=1e-3)
q_weak = NonDimParams(d=1.3, l=2.0, s=10.0, **base)
q_mod = NonDimParams(d=1.6, l=1.4, s=2.0, **base)
q_strong = NonDimParams(d=2.1, l=1.1, s=1.25, **base)

disp = DispersionSpec()
n, nt, tf = 13, 50, 10.0
grid = Grid4D.cube(0.0, 6.0, n)
x0 = np.array([0.2, 1.0, 1.0, 1.0])
var = 0.05

traj = integrate(State.from_array(x0), None, q_strong, tf, 1000)
print("target traj endpoints:", traj.states[0], "->", traj.states[-1])
print("traj max coords:", traj.states.max(axis=0))

t_grid = np.linspace(0, tf, nt + 1)
fstar = build_target(traj, 20, var, grid, t_grid)
f0 = gaussian_on_grid(grid, x0, var)

for label, q in (("TC1 weak", q_weak), ("TC2 moderate", q_mod)):
    u0 = ControlSchedule.zeros(tf, nt, 7.0, 0.072)
    f_untr, d_untr = solve_forward(f0, u0, q, grid, disp=disp)
    mu = np.array([mean_state(f_untr.snapshot(m), grid, 1e-5) for m in range(nt + 1)])
    mono = bool(np.all(np.diff(mu[:, 0]) > 0))
    print(f"{label}: untreated T mean {mu[0,0]:.3f} -> {mu[-1,0]:.3f} monotone={mono} "
          f"min_f={d_untr.min_over_run:+.1e}")

    prob = FpControlProblem(f0, fstar, q, grid, disp, 1.0, 0.01, 0.01)
    t0 = time.time()
    u_star, trace = pncg(u0, prob, PncgConfig(k_max=25, tol=1e-5))
    el = time.time() - t0
    f_tr, d_tr = solve_forward(f0, u_star, q, grid, disp=disp)
    mt = np.array([mean_state(f_tr.snapshot(m), grid, 1e-5) for m in range(nt + 1)])
    wt = time_weights(u_star.times)
    total_dox = float(np.sum(wt * u_star.u1))
    print(f"  opt: {el:.0f}s iters={trace.iterations} J {trace.objective[0]:.4f}->{trace.objective[-1]:.4f} "
          f"solves={prob.n_forward_solves}")
    print(f"  treated T mean {mt[0,0]:.3f} -> {mt[-1,0]:.3f}; total dox {total_dox:.1f} mg; "
          f"peak u2 {u_star.u2.max():.4f}; total u2 {float(np.sum(wt*u_star.u2)):.4f}")
    print(f"  u1 profile: {np.array2string(u_star.u1[::10], precision=2)}")
