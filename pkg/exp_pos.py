"""Dev experiment: positivity envelope of the DG step vs dt (21^4)."""
import numpy as np
from fpcontrol.grid import Grid4D
from fpcontrol.model import ControlSchedule, NonDimParams
from fpcontrol.fpsolver import build_fp_stepper, solve_forward

q = NonDimParams(
    a=1.9, b=0.25, c=0.05, d=1.3, e=0.2, f=0.2, p=1e9, m=0.05, j=0.1,
    k=0.5, q=5e7, r1=0.1, r2=0.1, s=10.0, l=2.0, alpha=0.1, beta=0.1,
    alpha1=0.3, alpha2=0.01, alpha3=0.01, alpha4=0.01,
    beta_n=5.0, beta_l=5.0, ratio_tl=1e-3,
)

grid = Grid4D.cube(0.0, 6.0, 21)
xs = grid.axes()
x0 = np.array([0.2, 1.0, 1.0, 1.0])
var = 0.05
f0 = np.ones(grid.shape)
for i in range(4):
    gi = np.exp(-((xs[i] - x0[i]) ** 2) / (2 * var))
    f0 = f0 * grid.broadcast_axis(i, gi)
f0 /= grid.integrate(f0)

nt = 50
for tf in (2.0, 1.0, 0.5, 0.25):
    worst = 0.0
    for seed in (0, 1, 2, 42):
        rng = np.random.default_rng(seed)
        t = np.linspace(0, tf, nt + 1)
        u = ControlSchedule(t, rng.uniform(0, 7.0, nt + 1),
                            rng.uniform(0, 0.072, nt + 1), 7.0, 0.072)
        field, diag = solve_forward(f0, u, q, grid)
        worst = min(worst, diag.min_over_run)
    print(f"T_f={tf:5.2f} dt={tf/nt:.4f}: worst min f = {worst:+.3e}")
