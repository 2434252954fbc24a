"""-log vol of harmonically interpolated rotating ellipses along a ray, with its radial second differences.

Prints r, the area of A_(r, 0) and -log area, then the worst discrete Laplacian
over the full grid.  Useful for picking grid sizes for the bm scenarios.
"""
import argparse

import numpy as np

from fstar import formulas
from fstar.cones import trace_cone
from fstar.convex import support_area
from fstar.grid import Axis, GridFn
from fstar.harmonic import Domain
from fstar.interpolate import interior_points, interpolate_supports
from fstar.verify import is_F_subharmonic


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--count", type=int, default=65)
    p.add_argument("--half", type=float, default=0.6)
    p.add_argument("--wobble", type=float, default=0.3)
    p.add_argument("--n-boundary", type=int, default=256)
    args = p.parse_args()
    dom = Domain.disk(n_boundary=args.n_boundary)
    fam = formulas.indicator_family(dom, ellipse={"a": 1.5, "b": 0.5, "turn": 0.5, "wobble": args.wobble})

    r = np.linspace(0.0, 0.95, 20)
    area = support_area(interpolate_supports(fam, np.stack([r, 0 * r], axis=1)))
    for ri, ai in zip(r, area):
        print(f"r={ri:5.3f} area={ai:10.6f} -log area={-np.log(ai):10.6f}")

    xs = (Axis(-args.half, args.half, args.count),) * 2
    pts, mask = interior_points(dom, xs)
    nlv = np.full(mask.shape, np.inf)
    nlv[mask] = -np.log(support_area(interpolate_supports(fam, pts[mask])))
    print(is_F_subharmonic(GridFn(xs, nlv), trace_cone(2), 1e-5).line())


if __name__ == "__main__":
    main()
