"""Discrete Laplacian of B_K at the origin against the exact value, over a sweep of the coupling a.

With lam = mu = kappa = 1, b = 1 and tau = 0 the deficit is 1 - a^2 and the
exact Laplacian at the origin is deficit / kappa.  The last column is the
value half that size, for comparison with references quoting deficit / (2 kappa).
"""
import argparse

import numpy as np

from fstar import formulas
from fstar.grid import Axis
from fstar.prekopa import section_volume
from fstar.verify import discrete_laplacian


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--count", type=int, default=101, help="nodes per base axis (odd, so the origin is a node)")
    p.add_argument("--half", type=float, default=0.2, help="half-width of the base grid")
    args = p.parse_args()
    ax = Axis(-args.half, args.half, args.count)
    print(f"{'a':>6} {'deficit':>9} {'discrete':>12} {'exact':>12} {'half':>12}")
    for a in np.linspace(0.0, 1.4, 8):
        prm = dict(lam=1.0, mu=1.0, tau=0.0, a=float(a), b=1.0)
        B = section_volume(formulas.quad8(**prm), 1.0, (ax, ax)).BK
        lap = float(discrete_laplacian(B)[B.index_of((0.0, 0.0))])
        exact = float(formulas.quad8_laplacian(0.0, 0.0, kappa=1.0, **prm))
        deficit = 2.0 - a**2 - 1.0
        print(f"{a:6.2f} {deficit:9.4f} {lap:12.6f} {exact:12.6f} {deficit / 2:12.6f}")


if __name__ == "__main__":
    main()
