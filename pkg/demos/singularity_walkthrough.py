"""Walk through one singular scenario step by step.

A 2-dof path whose first joint turns around at s = 0.3 makes the
maximum-jerk forward run stall before that point.  The script locates the
singularity, builds its singular curve, extends the stalled run onto the
curve and finally solves the whole problem.

Run with ``python3 demos/singularity_walkthrough.py``.
"""

import logging

import numpy as np

from topp3 import (Policy, Side, extend_profile, find_singularities, integrate, singular_curve,
                   singular_jerk, solve, to_trajectory, validate)
from topp3 import scenarios as S


def main():
    logging.basicConfig(level=logging.WARNING)
    pb = S.one_singularity(0.3, 0.3)
    cs = pb.constraints
    start, _ = pb.boundary_states()

    print("singularities")
    sings = find_singularities(cs)
    for g in sings:
        curve = singular_curve(cs, g)
        print(f"  s*={g.s_star:.4f} row {g.k} {g.side.name}: "
              f"sd in [{curve.sd_min:.3f}, {curve.sd_max:.3f}]")

    forward = integrate(cs, start, 1, Policy.MaxJerk)
    print(f"\nmaximum-jerk forward run stops at s={forward.s[-1]:.4f} "
          f"({forward.termination.name})")

    g = next(x for x in sings if x.side is Side.MaxCurve)
    ext = extend_profile(cs, forward, g, form="active")
    print(f"extension leaves the run at s={ext.s_anchor:.4f} and lands on the curve at "
          f"sd={ext.sd_curve:.4f}")
    sdd = g.sdd_on_curve(cs, ext.sd_curve)
    print(f"singular jerk there: {singular_jerk(cs, g, ext.sd_curve, sdd, form='active'):.3f}")

    sol = solve(pb)
    print(f"\nsolution: {' '.join(sol.structure)}, duration {sol.duration:.4f} s")
    print(f"switch points: {np.round(sol.switches, 4).tolist()}")
    rep = validate(to_trajectory(sol, pb.path, 1e-3), cs, pb.path)
    print(rep.summary())


if __name__ == "__main__":
    main()
