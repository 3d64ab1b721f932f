"""Write data/tw_gue.csv: the GUE Tracy-Widom CDF F2 on [-8, 6], step 0.02.

F2(s) = det(I - K_Ai) on L^2(s, inf), evaluated by Gauss-Legendre
quadrature of the Fredholm determinant (Bornemann's method) after the map
x = s + 10 tan(pi/4 (t + 1)).
"""
import sys

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import airy


def f2(s, m=80):
    t, w = leggauss(m)
    x = s + 10 * np.tan(np.pi / 4 * (t + 1))
    wx = w * 10 * np.pi / 4 / np.cos(np.pi / 4 * (t + 1)) ** 2
    ai, aip, _, _ = airy(x)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (np.outer(ai, aip) - np.outer(aip, ai)) / (xx - yy)
    k[np.diag_indices(m)] = aip**2 - x * ai**2
    sw = np.sqrt(wx)
    return np.linalg.det(np.eye(m) - sw[:, None] * k * sw[None, :])


def main(path):
    ss = np.round(np.arange(-8.0, 6.0001, 0.02), 2)
    vals = np.maximum.accumulate(np.clip([f2(s) for s in ss], 0, 1))
    with open(path, "w") as f:
        f.write("value,cdf\n")
        for s, v in zip(ss, vals):
            f.write(f"{s:.2f},{v:.12f}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/tw_gue.csv")
