"""Solve seeded random polynomial paths and show how jerk limits set the duration.

Run with ``python3 demos/random_paths.py``.
"""

import time

from topp3 import solve, to_trajectory, validate
from topp3 import scenarios as S


def main():
    solve(S.random_regular(0))  # compile the kernels before timing
    print("seed dof duration  iters  time   check")
    for seed in range(6):
        pb = S.random_regular(seed)
        t0 = time.perf_counter()
        sol = solve(pb)
        elapsed = time.perf_counter() - t0
        rep = validate(to_trajectory(sol, pb.path, 1e-3), pb.constraints, pb.path)
        print(f"{seed:4d} {pb.path.n_dof:3d} {sol.duration:8.4f} {sol.bridge.iterations:6d} "
              f"{elapsed:6.3f} {'ok' if rep.passed else 'VIOLATED'}")

    print("\nscaling every jerk bound of seed 3")
    for factor in (1, 10, 100):
        pb = S.random_regular(3)
        pb.constraints = pb.constraints.scaled(factor)
        print(f"  x{factor:<4d} duration {solve(pb).duration:.4f} s")


if __name__ == "__main__":
    main()
