"""Branching random walks on a finite site set.

Sites double as types: a particle at x is replaced by f(y) particles at each
site y, where f is drawn from the offspring law attached to x.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .distributions import OffspringLaw
from .errors import LawError, MaxIterationsExceeded, ProjectionInvalid

CRITICAL_SLACK = 1e-9


@dataclass(frozen=True)
class BrwModel:
    laws: tuple

    def __post_init__(self):
        laws = tuple(self.laws)
        if not laws:
            raise LawError("a BRW needs at least one site")
        if any(law.type_count != len(laws) for law in laws):
            raise LawError("every offspring law must have one coordinate per site")
        object.__setattr__(self, "laws", laws)

    @property
    def site_count(self):
        return len(self.laws)

    @classmethod
    def homogeneous(cls, law: OffspringLaw) -> "BrwModel":
        return cls(tuple([law] * law.type_count))

    def genfun(self, q) -> np.ndarray:
        return np.array([law.genfun(q) for law in self.laws])


@dataclass(frozen=True)
class ExtinctionVector:
    q: np.ndarray
    iterations: int
    residual: float

    def to_dict(self):
        return {"q": [float(v) for v in self.q], "iterations": self.iterations, "residual": self.residual}


def extinction_vector(model: BrwModel, tol: float = 1e-12, max_iter: int = 10**6) -> ExtinctionVector:
    """Smallest fixed point of q = G(q), by iteration from the zero vector."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = np.zeros(model.site_count)
    for it in range(1, max_iter + 1):
        new = model.genfun(q)
        change = float(np.max(np.abs(new - q)))
        q = new
        if change < tol:
            residual = float(np.max(np.abs(q - model.genfun(q))))
            return ExtinctionVector(q, it, residual)
    residual = float(np.max(np.abs(q - model.genfun(q))))
    raise MaxIterationsExceeded(
        f"no convergence after {max_iter} iterations (residual {residual:.3g})",
        last=q, residual=residual, iterations=max_iter,
    )


def extinction_iterates(model: BrwModel, n: int) -> np.ndarray:
    """G applied n times to 0: the probability of extinction by generation n."""
    q = np.zeros(model.site_count)
    for _ in range(n):
        q = model.genfun(q)
    return q


def first_moment_matrix(model: BrwModel) -> np.ndarray:
    """m[x, y] = expected number of children placed at y by a particle at x."""
    return np.vstack([law.first_moments() for law in model.laws])


def perron_root(m, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Spectral radius of a non-negative matrix by power iteration.

    Iterates on M + I from the all-ones vector, which removes the oscillation
    of periodic matrices, and stops when the Collatz-Wielandt bounds meet.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or np.any(m < 0):
        raise ValueError("expected a square non-negative matrix")
    a = m + np.eye(m.shape[0])
    v = np.ones(m.shape[0])
    est = 1.0
    for _ in range(max_iter):
        w = a @ v
        pos = v > 1e-300
        ratios = w[pos] / v[pos]
        lo, hi = ratios.min(), ratios.max()
        est = 0.5 * (lo + hi)
        v = w / np.max(w)
        if hi - lo <= tol * max(1.0, est):
            break
    return float(est - 1.0)


def fbrw_project_check(p, g, tol: float = 1e-9):
    """Whether the walk with matrix P projects along the labelling g.

    Returns (ok, projected matrix or None).  The projection is valid when the
    mass sent into each fiber of g depends only on the fiber of the source.
    """
    p = np.asarray(p, dtype=float)
    labels = list(g)
    if p.shape != (len(labels), len(labels)):
        raise ValueError("P must be square with one label per site")
    if np.any(p < -tol) or np.any(np.abs(p.sum(axis=1) - 1.0) > tol):
        raise ValueError("P must be row-stochastic")
    classes = sorted(set(labels), key=labels.index)
    idx = np.array([classes.index(c) for c in labels])
    sums = np.zeros((len(labels), len(classes)))
    for v in range(len(classes)):
        sums[:, v] = p[:, idx == v].sum(axis=1)
    proj = np.zeros((len(classes), len(classes)))
    for u in range(len(classes)):
        rows = sums[idx == u]
        if np.any(np.abs(rows - rows[0]) > tol):
            return False, None
        proj[u] = rows[0]
    return True, proj


def _row_of(law: OffspringLaw) -> np.ndarray:
    if hasattr(law, "row"):
        return np.asarray(law.row)
    m = law.first_moments()
    return m / m.sum() if m.sum() > 0 else np.full(law.type_count, 1.0 / law.type_count)


@dataclass(frozen=True)
class FbrwVerdict:
    kind: str  # "Survives" | "Dies"
    perron_root: float
    projected_moments: np.ndarray

    def to_dict(self):
        return {"kind": self.kind, "perron_root": self.perron_root,
                "projected_moments": self.projected_moments.tolist()}


def classify_projected(mmat, tol: float = 1e-10) -> FbrwVerdict:
    """Global survival of an F-BRW from its projected first-moment matrix."""
    mmat = np.asarray(mmat, dtype=float)
    root = perron_root(mmat, tol)
    kind = "Survives" if root > 1 + CRITICAL_SLACK else "Dies"
    return FbrwVerdict(kind, root, mmat)


def fbrw_survival(model: BrwModel, g, tol: float = 1e-10) -> FbrwVerdict:
    labels = list(g)
    p = np.vstack([_row_of(law) for law in model.laws])
    ok, proj = fbrw_project_check(p, labels)
    if not ok:
        raise ProjectionInvalid("transition mass into fibers is not constant within fibers")
    classes = sorted(set(labels), key=labels.index)
    means = np.zeros(len(classes))
    for u, c in enumerate(classes):
        members = [law for law, lab in zip(model.laws, labels) if lab == c]
        totals = {law.total() for law in members}
        if len(totals) != 1:
            raise ProjectionInvalid(f"total laws differ inside fiber {c!r}")
        means[u] = members[0].total().mean()
    return classify_projected(means[:, None] * proj, tol)


def germ_transfer_bound(q_nu, delta: float) -> np.ndarray:
    """Upper bound q_nu (1 - delta) + delta for the extinction vector of mu."""
    if not (0 <= delta < 1):
        raise ValueError("delta must lie in [0,1)")
    q = np.asarray(q_nu.q if isinstance(q_nu, ExtinctionVector) else q_nu, dtype=float)
    return q * (1 - delta) + delta


@dataclass
class BrwTrajectory:
    occupation: np.ndarray  # (generations + 1, sites)
    alive: bool
    capped: bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "site", "count"])
        for n, row in enumerate(self.occupation):
            for x, c in enumerate(row):
                w.writerow([n, x, int(c)])
        return buf.getvalue()


def _step(model: BrwModel, state: np.ndarray, rng) -> np.ndarray:
    """One generation for a batch of population vectors, shape (reps, sites)."""
    out = np.zeros_like(state)
    for x, law in enumerate(model.laws):
        col = state[:, x]
        if np.any(col):
            out += law.sample_sum(col, rng)
    return out


def simulate_brw(model: BrwModel, start: int, horizon: int, rng, population_cap: int = 10**6) -> BrwTrajectory:
    if population_cap < 1:
        raise ValueError("population cap must be >= 1")
    state = np.zeros((1, model.site_count), dtype=np.int64)
    state[0, start] = 1
    rows = [state[0].copy()]
    capped = False
    for _ in range(horizon):
        state = _step(model, state, rng)
        rows.append(state[0].copy())
        total = int(state.sum())
        if total == 0:
            break
        if total > population_cap:
            capped = True
            break
    occ = np.vstack(rows)
    return BrwTrajectory(occ, alive=capped or int(occ[-1].sum()) > 0, capped=capped)


@dataclass(frozen=True)
class AliveEstimate:
    frequency: float
    stderr: float
    reps: int
    capped: int

    def to_dict(self):
        return {"frequency": self.frequency, "stderr": self.stderr, "reps": self.reps, "capped": self.capped}


def alive_frequency(model: BrwModel, start: int, horizon: int, reps: int, rng,
                    population_cap: int = 10**6) -> AliveEstimate:
    """Fraction of independent runs with a particle at the horizon.

    Runs whose population exceeds the cap stop early and count as alive.
    """
    state = np.zeros((reps, model.site_count), dtype=np.int64)
    state[:, start] = 1
    capped = np.zeros(reps, dtype=bool)
    active = np.arange(reps)
    for _ in range(horizon):
        sub = _step(model, state[active], rng)
        state[active] = sub
        tot = sub.sum(axis=1)
        over = tot > population_cap
        capped[active[over]] = True
        active = active[(tot > 0) & ~over]
        if active.size == 0:
            break
    alive = capped | (state.sum(axis=1) > 0)
    f = float(alive.mean())
    return AliveEstimate(f, float(np.sqrt(f * (1 - f) / reps)), reps, int(capped.sum()))
