# Quadratic-inverse shrinkage transcribed from the published MATLAB reference
# (ascending sort, repmat/transpose kernel layout). Prints frozen values.
import numpy as np

def qis(lh, q, h):
    lam = np.sort(lh)
    p = len(lam)
    invl = 1 / lam
    lj = np.tile(invl[:, None], (1, p)).T
    lji = lj - lj.T
    theta = np.mean(lj * lji / (lji**2 + h**2 * lj**2), 1)
    htheta = np.mean(lj * (h * lj) / (lji**2 + h**2 * lj**2), 1)
    a2 = theta**2 + htheta**2
    delta = 1 / ((1 - q)**2 * invl + 2 * q * (1 - q) * invl * theta + q**2 * invl * a2)
    return delta[::-1]

def bw(d, t):
    q = d / t
    return min(q * q, 1 / q**2)**0.35 * d**-0.35

np.set_printoptions(precision=17)
print(repr(bw(100, 1000)), repr(bw(100, 100)))
d = 20
lh = np.array([2.5 * np.exp(-3 * i / (d - 1)) + 0.05 * np.sin(i) ** 2 for i in range(d)])
lh = np.sort(lh)[::-1]
print([repr(v) for v in lh])
print([repr(v) for v in qis(lh, 0.25, bw(d, 80))])
spiked = np.array([30.0, 10.0] + [0.16] * 98)
out = qis(spiked, 0.1, bw(100, 1000))
print(repr(out[0]), repr(out[1]), repr(out[50]))
