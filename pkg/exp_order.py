"""Dev experiment: DG-CC order on a 2D OU transient + conservation."""
import numpy as np
from fpcontrol.fpsolver import AxisDiscretization, DgStepper


def ou_axis(n, lo, hi, theta, center, sigma):
    x = np.linspace(lo, hi, n)
    h = x[1] - x[0]
    xf = 0.5 * (x[:-1] + x[1:])
    Fface = -theta * (xf - center)
    dface = np.full(n - 1, 0.5 * sigma**2)
    return AxisDiscretization(n=n, h=h, dface=dface, f0_face=Fface,
                              g1_face=np.zeros(n - 1), g2_face=np.zeros(n - 1)), x, h


def exact_gauss(x, m, v):
    return np.exp(-(x - m) ** 2 / (2 * v)) / np.sqrt(2 * np.pi * v)


def run(n, nt, T=1.0):
    theta, sigma = 1.0, 0.5
    c1, c2 = 3.0, 3.0
    v0 = 0.16
    m0 = (2.6, 3.5)
    ax1, x1, h = ou_axis(n, 0.0, 6.0, theta, c1, sigma)
    ax2, x2, _ = ou_axis(n, 0.0, 6.0, theta, c2, sigma)
    stepper = DgStepper([ax1, ax2], (n, n))
    w = np.full(n, h); w[0] = w[-1] = h / 2

    f = exact_gauss(x1, m0[0], v0)[:, None] * exact_gauss(x2, m0[1], v0)[None, :]
    mass0 = (w[:, None] * w[None, :] * f).sum()
    f = f / mass0
    dt = T / nt
    for m in range(nt):
        f = stepper.step(f, (0.0, 0.0), dt)
    mass = (w[:, None] * w[None, :] * f).sum()
    # exact OU moments at time T
    vinf = sigma**2 / (2 * theta)
    vT = v0 * np.exp(-2 * theta * T) + vinf * (1 - np.exp(-2 * theta * T))
    mT1 = c1 + (m0[0] - c1) * np.exp(-theta * T)
    mT2 = c2 + (m0[1] - c2) * np.exp(-theta * T)
    fex = exact_gauss(x1, mT1, vT)[:, None] * exact_gauss(x2, mT2, vT)[None, :]
    err = (w[:, None] * w[None, :] * np.abs(f - fex)).sum()
    return err, mass - 1.0, f.min()


if __name__ == "__main__":
    prev = None
    for n, nt in [(17, 10), (33, 20), (65, 40), (129, 80)]:
        err, dm, fmin = run(n, nt)
        order = "" if prev is None else f"order={np.log2(prev / err):.2f}"
        print(f"n={n:4d} nt={nt:3d}  L1err={err:.4e}  dmass={dm:+.2e}  min={fmin:+.2e}  {order}")
        prev = err
