"""Print the manufactured-solution error table for the Stokes solver."""

import argparse

import numpy as np

from navierwall.fields import BoundaryCondition, FlowState, ViscosityField, l2_norm, sample_faces
from navierwall.grid import DomainSpec, build_domain_grid
from navierwall.stokes import solve_stokes

PI = np.pi


def exact(x, y):
    return np.sin(PI * x) ** 2 * np.sin(2 * PI * y), -np.sin(2 * PI * x) * np.sin(PI * y) ** 2


def force(x, y):
    fx = -2 * PI ** 2 * np.sin(2 * PI * y) * (2 * np.cos(2 * PI * x) - 1) \
        - PI * np.sin(PI * x) * np.cos(PI * y)
    fy = 2 * PI ** 2 * np.sin(2 * PI * x) * (2 * np.cos(2 * PI * y) - 1) \
        - PI * np.cos(PI * x) * np.sin(PI * y)
    return fx, fy


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="16,32,64,128")
    ap.add_argument("--grading", type=float, default=1.0)
    args = ap.parse_args()
    prev = None
    print(f"{'n':>5} {'L2 error':>12} {'order':>6} {'cg':>5}")
    for n in map(int, args.sizes.split(",")):
        g = build_domain_grid(DomainSpec(1.0), n, n, args.grading)
        st, stats = solve_stokes(g, ViscosityField.uniform(g, 1.0), BoundaryCondition(),
                                 (lambda x, y: force(x, y)[0], lambda x, y: force(x, y)[1]))
        eu, _ = sample_faces(g, lambda x, y: exact(x, y)[0], 0.0)
        _, ev = sample_faces(g, 0.0, lambda x, y: exact(x, y)[1])
        err = l2_norm(FlowState(st.u - eu, st.v - ev, st.p), g)
        order = "" if prev is None else f"{np.log2(prev / err):6.2f}"
        print(f"{n:5d} {err:12.4e} {order:>6} {stats.cg_iters:5d}")
        prev = err


if __name__ == "__main__":
    main()
