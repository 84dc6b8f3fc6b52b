"""Time-optimal parameterization under jerk bounds: orchestration and trajectory output.

The forward pass follows maximum jerk from the start state, extending through
singular positions as it stalls; the backward pass does the same from the end
state in reversed time.  A minimum-jerk bridge found by multiple shooting
joins the two, giving a max-min-max-... bang-bang profile.
"""

from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .constraints import ConstraintSet, coeffs, controls
from .errors import (ExtensionFailed, InfeasibleBoundary, NoConnection, SchemaError,
                     Topp3Error)
from .integrator import (Limits, Policy, Profile, Tag, Termination, concatenate,
                         integrate, truncate)
from .path import BoundaryCondition, PathSpec, boundary_state, eval_derivatives
from .shooting import NewtonOptions, ShootingResult, solve_bridge
from .singularity import SD_CAP, Side, extend_profile, find_singularities

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_EXTENSIONS = 32
_STALLED = (Termination.EmptyJerkInterval, Termination.JerkCapHit)


@dataclass
class SolverOptions:
    dt: float = 1e-3
    N: int = 3
    seed: int = 0
    newton: NewtonOptions = field(default_factory=NewtonOptions)
    max_extensions: int = MAX_EXTENSIONS
    step_limit: int = 1_000_000
    sd_cap: float = SD_CAP
    singular_form: str = "active"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        self.newton.seed = self.seed

    @property
    def limits(self) -> Limits:
        return Limits(dt=self.dt, step_limit=self.step_limit)


@dataclass
class Topp3Problem:
    path: PathSpec
    constraints: ConstraintSet
    boundary: BoundaryCondition
    options: SolverOptions = field(default_factory=SolverOptions)

    def boundary_states(self):
        """Start and end states ``(s, sd, sdd)``; raises InfeasibleBoundary."""
        out = []
        for end in ("start", "end"):
            state = boundary_state(self.path, self.boundary, end)
            if not state[1] > 0:
                raise InfeasibleBoundary(f"{end} velocity must be nonzero along the path")
            gamma, eta = controls(self.constraints, state)
            if gamma > eta + 1e-9 * (1.0 + abs(gamma) + abs(eta)):
                raise InfeasibleBoundary(
                    f"no admissible jerk at the {end} state (min {gamma:.6g} > max {eta:.6g})")
            out.append(state)
        return tuple(out)

    # scenario files

    def to_dict(self) -> dict:
        c = self.constraints
        return {
            "schema": SCHEMA_VERSION,
            "path": self.path.to_dict(),
            "constraints": {"jerk_min": c.jerk_min.tolist(), "jerk_max": c.jerk_max.tolist()},
            "boundary": self.boundary.to_dict(),
            "options": {"dt": self.options.dt, "N": self.options.N, "seed": self.options.seed},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topp3Problem":
        if not isinstance(data, dict):
            raise SchemaError("scenario must be a JSON object")
        for key in ("schema", "path", "constraints", "boundary"):
            if key not in data:
                raise SchemaError(f"scenario is missing required key '{key}'")
        if data["schema"] != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema version {data['schema']!r}")
        cons = data["constraints"]
        extra = sorted(set(cons) & {"velocity", "v_max", "vel_max", "acceleration", "a_max",
                                     "acc_max", "torque"})
        if extra:
            raise SchemaError("only jerk constraints are supported; remove "
                              + ", ".join(repr(k) for k in extra))
        for key in ("jerk_min", "jerk_max"):
            if key not in cons:
                raise SchemaError(f"constraints block is missing required key '{key}'")
        for key in ("v_beg", "a_beg", "v_end", "a_end"):
            if key not in data["boundary"]:
                raise SchemaError(f"boundary block is missing required key '{key}'")
        try:
            path = PathSpec.from_dict(data["path"])
        except KeyError as exc:
            raise SchemaError(f"path block is missing required key {exc}") from exc
        try:
            cs = ConstraintSet(path, cons["jerk_min"], cons["jerk_max"],
                               eps_a=cons.get("eps_a", 1e-8), jerk_cap=cons.get("jerk_cap"))
            opts = data.get("options", {})
            options = SolverOptions(dt=float(opts.get("dt", 1e-3)), N=int(opts.get("N", 3)),
                                    seed=int(opts.get("seed", 0)))
            bc = BoundaryCondition.from_dict(data["boundary"])
        except SchemaError:
            raise
        except (ValueError, TypeError) as exc:
            raise SchemaError(str(exc)) from exc
        return cls(path, cs, bc, options)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Topp3Problem":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, filename) -> "Topp3Problem":
        with open(filename) as fh:
            return cls.from_json(fh.read())


@dataclass
class Piece:
    kind: str  # "max" | "min"
    profile: Profile
    singular: bool = False

    @property
    def s_range(self):
        return self.profile.s_range


@dataclass
class Topp3Solution:
    pieces: List[Piece]
    profile: Profile
    duration: float
    forward: Profile
    backward: Profile
    bridge: ShootingResult
    extensions: List[dict]
    constraints: Optional[ConstraintSet] = None

    @property
    def structure(self) -> List[str]:
        return [p.kind for p in self.pieces]

    @property
    def switches(self) -> List[float]:
        return [p.s_range[0] for p in self.pieces[1:]]

    @property
    def node_tags(self) -> List[str]:
        """Run-length tags including singular bands."""
        out = []
        for g in self.profile.tag:
            name = Tag(int(g)).name.replace("Jerk", "").lower()
            if not out or out[-1] != name:
                out.append(name)
        return out

    @property
    def n_extensions(self) -> int:
        return len(self.extensions)

    @property
    def restarts(self) -> int:
        return self.bridge.restarts + sum(e["restarts"] for e in self.extensions)

    def to_dict(self, files: Optional[dict] = None) -> dict:
        return {
            "structure": self.structure,
            "singular_bands": [i for i, p in enumerate(self.pieces) if p.singular],
            "switches": [float(f"{s:.12g}") for s in self.switches],
            "duration": float(f"{self.duration:.12g}"),
            "extensions": [{k: (float(f"{v:.12g}") if isinstance(v, float) else v)
                            for k, v in e.items() if k != "trace"} for e in self.extensions],
            "bridge": {"s_A": float(f"{self.bridge.anchor1:.12g}"),
                       "s_B": float(f"{self.bridge.anchor2:.12g}"),
                       "iterations": self.bridge.iterations,
                       "restarts": self.bridge.restarts},
            "files": dict(files or {}),
        }


def _merge(pieces: List[Piece]) -> List[Piece]:
    out: List[Piece] = []
    for p in pieces:
        if len(p.profile) < 2 or p.s_range[1] <= p.s_range[0]:
            continue
        if out and out[-1].kind == p.kind:
            prev = out[-1]
            out[-1] = Piece(p.kind, concatenate([prev.profile, p.profile],
                                                direction=prev.profile.direction),
                            prev.singular or p.singular)
        else:
            out.append(p)
    return out


def _clip(cs, pieces: List[Piece], s_lo=None, s_hi=None) -> List[Piece]:
    out = []
    for p in pieces:
        lo, hi = p.s_range
        a = lo if s_lo is None else max(lo, s_lo)
        b = hi if s_hi is None else min(hi, s_hi)
        if b <= a:
            continue
        prof = p.profile if (a == lo and b == hi) else truncate(p.profile, a, b, cs)
        out.append(Piece(p.kind, prof, p.singular))
    return out


def _composite(pieces: List[Piece], direction: int) -> Profile:
    return concatenate([p.profile for p in pieces],
                       pieces=[(p.s_range[0], p.s_range[1], p.kind) for p in pieces],
                       direction=direction)


def _next_singularity(sings, s_last, cell, direction):
    if direction > 0:
        cands = [g for g in sings if g.side is Side.MaxCurve and g.s_star > s_last - cell]
        return min(cands, key=lambda g: (g.s_star, g.k), default=None)
    cands = [g for g in sings if g.side is Side.MinCurve and g.s_star < s_last + cell]
    return max(cands, key=lambda g: (g.s_star, -g.k), default=None)


def _pass(cs, start, direction, sings, cell, opts: SolverOptions):
    """Maximum-jerk pass with extensions; returns pieces in increasing s."""
    limits = opts.limits
    prof = integrate(cs, start, direction, Policy.MaxJerk, limits=limits)
    pieces = [Piece("max", prof)]
    extensions = []
    while prof.termination in _STALLED:
        s_last = prof.s_range[1] if direction > 0 else prof.s_range[0]
        sg = _next_singularity(sings, s_last, cell, direction)
        if sg is None:
            break
        if len(extensions) >= opts.max_extensions:
            raise ExtensionFailed(f"more than {opts.max_extensions} extensions", sg.s_star)
        logger.info("extending %s profile through s*=%.9g",
                    "forward" if direction > 0 else "backward", sg.s_star)
        ext = extend_profile(cs, prof, sg, direction=direction, N=opts.N, opts=opts.newton,
                             limits=limits, sd_cap=opts.sd_cap, form=opts.singular_form)
        if ext is None:
            break
        last = pieces[-1]
        if direction > 0:
            pieces[-1] = Piece(last.kind, truncate(last.profile, None, ext.s_anchor, cs), last.singular)
        else:
            pieces[-1] = Piece(last.kind, truncate(last.profile, ext.s_anchor, None, cs), last.singular)
        pieces += [Piece("min", ext.bridge), Piece("max", ext.resumed, singular=True)]
        extensions.append({"s_star": sg.s_star, "row": sg.k,
                           "direction": "forward" if direction > 0 else "backward",
                           "s_anchor": ext.s_anchor, "sd_curve": ext.sd_curve,
                           "iterations": ext.newton.iterations,
                           "restarts": ext.newton.restarts,
                           "trace": ext.newton.trace})
        prof = ext.resumed
    if direction < 0:
        pieces = pieces[::-1]
    return pieces, extensions


def solve(problem: Topp3Problem) -> Topp3Solution:
    """Run the forward/backward passes and bridge them."""
    cs = problem.constraints
    opts = problem.options
    start, end = problem.boundary_states()
    sings = find_singularities(cs)
    cell = problem.path.s_end / 2000.0
    fwd, ext_f = _pass(cs, start, 1, sings, cell, opts)
    bwd, ext_b = _pass(cs, end, -1, sings, cell, opts)
    A = _composite(fwd, 1)
    B = _composite(bwd, -1)
    try:
        br = solve_bridge(cs, A, B, N=opts.N, opts=opts.newton, limits=opts.limits)
    except Topp3Error as exc:
        raise NoConnection(f"no bridge between forward and backward profiles: {exc}") from exc
    s_a, s_b = br.anchor1, br.anchor2
    left = _clip(cs, fwd, None, s_a)
    right = _clip(cs, bwd, s_b, None)
    pieces = _merge(left + [Piece("min", br.profile)] + right)
    profile = _composite(pieces, 1)
    used = [e for e in ext_f if e["s_star"] <= s_a] + [e for e in ext_b if e["s_star"] >= s_b]
    return Topp3Solution(pieces, profile, profile.duration, A, B, br, used, cs)


# trajectory output

@dataclass
class Trajectory:
    """Time samples of the path state and joint kinematics."""

    t: np.ndarray
    s: np.ndarray
    sd: np.ndarray
    sdd: np.ndarray
    sddd: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    qddd: np.ndarray

    def __len__(self):
        return len(self.t)

    def to_csv(self) -> str:
        n = self.q.shape[1] if self.q.ndim == 2 else 0
        head = ["t", "s", "sd", "sdd", "sddd"]
        for name in ("q", "qd", "qdd", "qddd"):
            head += [f"{name}{j}" for j in range(n)]
        buf = io.StringIO()
        buf.write(",".join(head) + "\n")
        for i in range(len(self.t)):
            row = [self.t[i], self.s[i], self.sd[i], self.sdd[i], self.sddd[i]]
            for arr in (self.q, self.qd, self.qdd, self.qddd):
                row += list(arr[i])
            buf.write(",".join(f"{v:.12g}" for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        if not lines:
            raise SchemaError("empty trajectory file")
        head = lines[0].split(",")
        for key in ("t", "s", "sd", "sdd", "sddd"):
            if key not in head:
                raise SchemaError(f"trajectory file is missing column '{key}'")
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(
            -1, len(head))
        col = {k: data[:, i] for i, k in enumerate(head)}

        def block(name):
            keys = sorted((k for k in head if k[len(name):].isdigit() and k.startswith(name)
                           and k[len(name):] != ""), key=lambda k: int(k[len(name):]))
            return np.column_stack([col[k] for k in keys]) if keys else np.zeros((len(data), 0))

        return cls(col["t"], col["s"], col["sd"], col["sdd"], col["sddd"],
                   block("q"), block("qd"), block("qdd"), block("qddd"))


def _sample_node_interval(prof: Profile, i: int, tau: float):
    h = prof.t[i + 1] - prof.t[i]
    u0 = prof.jerk[i]
    du = 0.0
    if prof.tag[i] == prof.tag[i + 1] and h > 0:
        du = (prof.jerk[i + 1] - u0) / h
    elif i > 0 and prof.tag[i - 1] == prof.tag[i]:
        # switch ahead: continue the jerk trend of the current piece
        hp = prof.t[i] - prof.t[i - 1]
        if hp > 0:
            du = (u0 - prof.jerk[i - 1]) / hp
    s = prof.s[i] + prof.sd[i] * tau + prof.sdd[i] * tau ** 2 / 2 + u0 * tau ** 3 / 6 \
        + du * tau ** 4 / 24
    sd = prof.sd[i] + prof.sdd[i] * tau + u0 * tau ** 2 / 2 + du * tau ** 3 / 6
    sdd = prof.sdd[i] + u0 * tau + du * tau ** 2 / 2
    return s, sd, sdd, u0 + du * tau


def to_trajectory(solution: Topp3Solution, path: PathSpec, sample_dt: float) -> Trajectory:
    """Sample the solution on a uniform time grid and map it to joint space."""
    if not sample_dt > 0:
        raise ValueError("sample_dt must be positive")
    prof = solution.profile
    t0 = prof.t[0]
    T = prof.t[-1] - t0
    n = int(math.floor(T / sample_dt + 1e-9))
    ts = np.arange(n + 1) * sample_dt
    if T - ts[-1] > 1e-9 * max(1.0, T):
        ts = np.append(ts, T)
    rel = prof.t - t0
    out = np.empty((len(ts), 4))
    cs = solution.constraints
    for k, tk in enumerate(ts):
        i = int(np.searchsorted(rel, tk, side="right")) - 1
        i = min(max(i, 0), len(rel) - 2)
        out[k] = _sample_node_interval(prof, i, tk - rel[i])
        tag = prof.tag[i]
        if cs is not None and tag != Tag.SingularJerk and out[k, 1] > 0 \
                and 0.0 <= out[k, 0] <= path.s_end:
            # bang-bang pieces: take the extremal jerk at the sampled state itself
            gamma, eta = controls(cs, out[k, :3])
            u = eta if tag == Tag.MaxJerk else gamma
            if math.isfinite(u):
                out[k, 3] = u
    out[-1] = prof.s[-1], prof.sd[-1], prof.sdd[-1], prof.jerk[-1]
    s = np.clip(out[:, 0], 0.0, path.s_end)
    sd, sdd, sddd = out[:, 1], out[:, 2], out[:, 3]
    nd = path.n_dof
    q = np.empty((len(ts), nd))
    qd = np.empty_like(q)
    qdd = np.empty_like(q)
    qddd = np.empty_like(q)
    for k in range(len(ts)):
        d = eval_derivatives(path, s[k], 3)
        q[k] = d[0]
        qd[k] = d[1] * sd[k]
        qdd[k] = d[2] * sd[k] ** 2 + d[1] * sdd[k]
        qddd[k] = d[3] * sd[k] ** 3 + 3 * d[2] * sd[k] * sdd[k] + d[1] * sddd[k]
    return Trajectory(ts, s, sd, sdd, sddd, q, qd, qdd, qddd)


@dataclass
class ValidationReport:
    worst: float
    row: Optional[int]
    index: Optional[int]
    t: Optional[float]
    per_row: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol

    def summary(self) -> str:
        if self.index is None:
            return "worst violation 0 (no samples)"
        return (f"worst violation {self.worst:.6g} x row scale at sample {self.index} "
                f"(t={self.t:.6g}, row {self.row}); "
                f"{'PASS' if self.passed else 'FAIL'} at tol {self.tol:g}")


def validate(traj: Trajectory, cs: ConstraintSet, path: PathSpec,
             tol: float = 1e-3) -> ValidationReport:
    """Worst constraint violation over the samples, normalised by row scale.

    Each sample is checked twice: through its path state and directly
    through its joint jerks.
    """
    scale = cs.row_scale()
    per_row = np.zeros(cs.m)
    worst, where = 0.0, (None, None)
    if len(traj) == 0:
        return ValidationReport(0.0, None, None, None, per_row, tol)
    n = path.n_dof
    for k in range(len(traj)):
        blk = coeffs(cs, min(max(traj.s[k], 0.0), path.s_end))
        v = blk.values(traj.sd[k], traj.sdd[k], traj.sddd[k]) / scale
        if traj.qddd.shape[1] == n:
            qj = traj.qddd[k]
            v = np.maximum(v, np.concatenate([qj - cs.jerk_max, cs.jerk_min - qj]) / scale)
        per_row = np.maximum(per_row, v)
        r = int(np.argmax(v))
        if v[r] > worst or where[0] is None:
            worst, where = max(worst, float(v[r])), (k, r)
    k, r = where
    return ValidationReport(max(worst, 0.0), r, k, float(traj.t[k]), per_row, tol)
