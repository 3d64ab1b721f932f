"""Write data/lg_constants.csv: log-gamma shape data at direction 1.

For the log-gamma polymer with parameter theta the free energy per step
along the diagonal is -2 Psi(theta/2). With h the negated free energy as a
function of the slope z = horizontal / vertical steps,

    h(1) = 2 Psi(theta/2),   h'(1) = Psi(theta/2),   d(1) = (-Psi''(theta/2))^(1/3).
"""
import csv
import sys

from scipy.special import polygamma, psi

THETAS = [0.5 * i for i in range(1, 21)]


def main(path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["theta", "h", "h_prime", "d"])
        for t in THETAS:
            s = t / 2.0
            w.writerow([repr(t), repr(float(2.0 * psi(s))), repr(float(psi(s))), repr(float((-polygamma(2, s)) ** (1.0 / 3.0)))])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/lg_constants.csv")
