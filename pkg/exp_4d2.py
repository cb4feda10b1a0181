"""Dev experiment: locate the negative values in the 21^4 run."""
import numpy as np
from fpcontrol.grid import Grid4D
from fpcontrol.model import ControlSchedule, NonDimParams
from fpcontrol.fpsolver import build_fp_stepper

q = NonDimParams(
    a=1.9, b=0.25, c=0.05, d=1.3, e=0.2, f=0.2, p=1e9, m=0.05, j=0.1,
    k=0.5, q=5e7, r1=0.1, r2=0.1, s=10.0, l=2.0, alpha=0.1, beta=0.1,
    alpha1=0.3, alpha2=0.01, alpha3=0.01, alpha4=0.01,
    beta_n=5.0, beta_l=5.0, ratio_tl=1e-3,
)

var = 0.25
grid = Grid4D.cube(0.0, 6.0, 21)
xs = grid.axes()
x0 = np.array([0.2, 1.0, 1.0, 1.0])
f = np.ones(grid.shape)
for i in range(4):
    gi = np.exp(-((xs[i] - x0[i]) ** 2) / (2 * var))
    f = f * grid.broadcast_axis(i, gi)
f /= grid.integrate(f)

rng = np.random.default_rng(42)
nt = 50
t = np.linspace(0, 10.0, nt + 1)
u = ControlSchedule(t, rng.uniform(0, 7.0, nt + 1), rng.uniform(0, 0.072, nt + 1), 7.0, 0.072)
stepper = build_fp_stepper(grid, q)
dt = 0.2
for m in range(10):
    f = stepper.step(f, u.at_index(m), dt)
    idx = np.unravel_index(np.argmin(f), f.shape)
    print(f"step {m+1}: min={f.min():+.3e} at {idx}, f[neighborhood max]={f.max():.3e}, "
          f"nneg={(f < 0).sum()}")
