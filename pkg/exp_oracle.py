"""Dev experiment: FP marginals vs Monte Carlo at 17^4, 1e5 paths."""
import time
import numpy as np
from fpcontrol.grid import Grid4D
from fpcontrol.model import ControlSchedule, NonDimParams
from fpcontrol.fpsolver import solve_forward
from fpcontrol.sde import simulate_paths, marginal_histogram, sample_gaussian_in_box
from fpcontrol.target import gaussian_on_grid

q = NonDimParams(
    a=1.9, b=0.25, c=0.05, d=1.3, e=0.2, f=0.2, p=1e9, m=0.05, j=0.1,
    k=0.5, q=5e7, r1=0.1, r2=0.1, s=10.0, l=2.0, alpha=0.1, beta=0.1,
    alpha1=0.3, alpha2=0.01, alpha3=0.01, alpha4=0.01,
    beta_n=5.0, beta_l=5.0, ratio_tl=1e-3,
)

n = 17
grid = Grid4D.cube(0.0, 6.0, n)
x0 = np.array([0.2, 1.0, 1.0, 1.0])
var = 0.25
tf = 10.0
nt = 200

f0 = gaussian_on_grid(grid, x0, var)
u = ControlSchedule.zeros(tf, nt, 7.0, 0.072)

t0 = time.time()
field, diag = solve_forward(f0, u, q, grid)
print(f"FP: {time.time()-t0:.1f}s mass_dev={diag.max_mass_deviation:.2e} min={diag.min_over_run:+.2e}")

n_paths, n_steps = 100_000, 2000
t0 = time.time()
ens = simulate_paths(
    lambda rng: sample_gaussian_in_box(x0, var, grid.lo, grid.hi, n_paths, rng),
    None, q, n_paths, n_steps, seed=1234, t_end=tf,
    observe_at=np.array([0.0, tf / 2, tf]),
)
print(f"MC: {time.time()-t0:.1f}s")

w = grid.axis_weights(0)
for t_idx, label, m in ((1, "T/2", nt // 2), (2, "T", nt)):
    fsnap = field.snapshot(m)
    for axis in range(4):
        marg = fsnap
        for other in sorted(set(range(4)) - {axis}, reverse=True):
            marg = np.tensordot(marg, grid.axis_weights(other), axes=([other], [0]))
        mc = marginal_histogram(ens, t_idx, axis, grid.axis(axis))
        l1 = float(np.sum(w * np.abs(marg - mc)))
        print(f"t={label} axis={axis}: L1={l1:.4f}")
