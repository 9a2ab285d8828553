"""Laws on the naturals and on type-count vectors, with their generating functions.

A ``NatLaw`` is a probability law on {0, 1, 2, ...}.  An ``OffspringLaw`` is a
law on vectors f in N^X (how many children, or stations, of each type) and is
evaluated through its multidimensional generating function

    G(z) = sum_f mu(f) prod_x z_x^f_x,    z in [0,1]^X.

All laws are immutable.  Samplers take an explicit ``numpy.random.Generator``
and are vectorized over replicates through ``sample_sum``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, LawError, TruncationBudgetExceeded

NORM_TOL = 1e-12
DOMAIN_SLACK = 1e-12
TRUNCATION_CAP = 10**7


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def _check_unit(t, name="t"):
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < -DOMAIN_SLACK) or np.any(arr > 1 + DOMAIN_SLACK):
        raise DomainError(f"{name} must lie in [0,1]")
    return np.clip(arr, 0.0, 1.0)


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


# ---------------------------------------------------------------------------
# Laws on N
# ---------------------------------------------------------------------------


class NatLaw:
    """Common interface of the laws on N."""

    def pmf(self, n):
        raise NotImplementedError

    def tail(self, n):
        """P(T >= n)."""
        raise NotImplementedError

    def _pgf(self, t):
        raise NotImplementedError

    def _pgf_derivative(self, t, k):
        raise NotImplementedError

    def sample_sum(self, counts, rng):
        """For each entry c of ``counts``, the sum of c independent draws."""
        raise NotImplementedError

    def truncation_point(self, eps: float) -> int:
        """Smallest N with P(T > N) <= eps."""
        raise NotImplementedError

    @property
    def support_max(self):
        return None

    def pgf(self, t):
        t = _check_unit(t)
        return _scalar_or_array(self._pgf(t), t)

    def pgf_derivative(self, t, k: int):
        if k < 0:
            raise DomainError("derivative order must be >= 0")
        t = _check_unit(t)
        if k == 0:
            return self.pgf(t)
        return _scalar_or_array(self._pgf_derivative(t, int(k)), t)

    def factorial_moment(self, k: int) -> float:
        """E[T (T-1) ... (T-k+1)]."""
        if k < 0:
            raise DomainError("k must be >= 0")
        if k == 0:
            return 1.0
        return float(self._pgf_derivative(np.asarray(1.0), int(k)))

    def mean(self) -> float:
        return self.factorial_moment(1)

    def second_moment(self) -> float:
        return self.factorial_moment(2) + self.factorial_moment(1)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        out = self.sample_sum(np.ones(n, dtype=np.int64), rng)
        return int(out[0]) if size is None else out.reshape(size)


@dataclass(frozen=True)
class FiniteSupport(NatLaw):
    """Law with P(T = n) = probs[n]."""

    probs: tuple

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise LawError("FiniteSupport needs a non-empty probability list")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise LawError("FiniteSupport probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > NORM_TOL:
            raise LawError(f"FiniteSupport probabilities sum to {p.sum()!r}, not 1")
        # trailing zeros carry no mass; drop them so equal laws compare equal
        nz = np.nonzero(p)[0]
        p = p[: nz[-1] + 1]
        object.__setattr__(self, "probs", tuple(float(v) for v in p))

    @classmethod
    def from_dict(cls, masses: dict) -> "FiniteSupport":
        top = max(int(n) for n in masses)
        p = [0.0] * (top + 1)
        for n, w in masses.items():
            p[int(n)] += float(w)
        return cls(tuple(p))

    @property
    def support_max(self):
        return len(self.probs) - 1

    def _arr(self):
        return np.asarray(self.probs)

    def pmf(self, n):
        n = np.asarray(n)
        p = self._arr()
        inside = (n >= 0) & (n < p.size)
        out = np.where(inside, p[np.clip(n, 0, p.size - 1)], 0.0)
        return _scalar_or_array(out, n)

    def tail(self, n):
        n = np.asarray(n)
        p = self._arr()
        suffix = np.concatenate([np.cumsum(p[::-1])[::-1], [0.0]])
        out = np.where(n <= 0, 1.0, suffix[np.clip(n, 0, p.size)])
        return _scalar_or_array(out, n)

    def _pgf(self, t):
        return np.polynomial.polynomial.polyval(t, self._arr())

    def _pgf_derivative(self, t, k):
        c = np.polynomial.polynomial.polyder(self._arr(), k)
        return np.polynomial.polynomial.polyval(t, c)

    def sample_sum(self, counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        p = self._arr()
        if p.size == 1:
            return np.zeros_like(counts)
        if p.size == 2:
            return rng.binomial(counts, p[1])
        draws = rng.multinomial(counts, p / p.sum())
        return draws @ np.arange(p.size, dtype=np.int64)

    def truncation_point(self, eps):
        return self.support_max


@dataclass(frozen=True)
class Poisson(NatLaw):
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise LawError("Poisson rate must be positive and finite")
        object.__setattr__(self, "lam", float(self.lam))

    def pmf(self, n):
        n = np.asarray(n)
        return _scalar_or_array(stats.poisson.pmf(n, self.lam), n)

    def tail(self, n):
        n = np.asarray(n)
        return _scalar_or_array(np.where(n <= 0, 1.0, stats.poisson.sf(n - 1, self.lam)), n)

    def _pgf(self, t):
        return np.exp(self.lam * (t - 1.0))

    def _pgf_derivative(self, t, k):
        return self.lam**k * np.exp(self.lam * (t - 1.0))

    def sample_sum(self, counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        return rng.poisson(self.lam * counts)

    def truncation_point(self, eps):
        n = int(stats.poisson.isf(eps, self.lam))
        while stats.poisson.sf(n, self.lam) > eps:
            n += 1
        while n > 0 and stats.poisson.sf(n - 1, self.lam) <= eps:
            n -= 1
        return n


@dataclass(frozen=True)
class MixedPoisson(NatLaw):
    """Poisson law with a random rate taking finitely many values.

    ``components`` is a tuple of (weight, rate) pairs.
    """

    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), float(r)) for w, r in self.components)
        if not comps:
            raise LawError("MixedPoisson needs at least one component")
        if any(not (0 < w <= 1) for w, _ in comps):
            raise LawError("MixedPoisson weights must lie in (0,1]")
        if any(not (r > 0 and math.isfinite(r)) for _, r in comps):
            raise LawError("MixedPoisson rates must be positive and finite")
        if abs(sum(w for w, _ in comps) - 1.0) > NORM_TOL:
            raise LawError("MixedPoisson weights must sum to 1")
        object.__setattr__(self, "components", comps)

    @property
    def weights(self):
        return np.array([w for w, _ in self.components])

    @property
    def rates(self):
        return np.array([r for _, r in self.components])

    def pmf(self, n):
        n = np.asarray(n)
        out = sum(w * stats.poisson.pmf(n, r) for w, r in self.components)
        return _scalar_or_array(out, n)

    def tail(self, n):
        n = np.asarray(n)
        out = sum(w * stats.poisson.sf(n - 1, r) for w, r in self.components)
        return _scalar_or_array(np.where(n <= 0, 1.0, out), n)

    def _pgf(self, t):
        return sum(w * np.exp(r * (t - 1.0)) for w, r in self.components)

    def _pgf_derivative(self, t, k):
        return sum(w * r**k * np.exp(r * (t - 1.0)) for w, r in self.components)

    def mixing_expectation(self, fn) -> float:
        """E[fn(Lambda)] for the mixing law."""
        return float(sum(w * fn(r) for w, r in self.components))

    def sample_sum(self, counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        per = rng.multinomial(counts, self.weights / self.weights.sum())
        return rng.poisson(per @ self.rates)

    def truncation_point(self, eps):
        return max(Poisson(r).truncation_point(eps) for _, r in self.components)


@dataclass(frozen=True)
class Geometric(NatLaw):
    """P(T = n) = p (1-p)^n for n >= 0."""

    p: float

    def __post_init__(self):
        if not (0 < self.p < 1):
            raise LawError("Geometric success probability must lie in (0,1)")
        object.__setattr__(self, "p", float(self.p))

    @property
    def q(self):
        return 1.0 - self.p

    def pmf(self, n):
        n = np.asarray(n)
        out = np.where(n >= 0, self.p * self.q ** np.maximum(n, 0), 0.0)
        return _scalar_or_array(out, n)

    def tail(self, n):
        n = np.asarray(n)
        return _scalar_or_array(self.q ** np.maximum(n, 0).astype(float), n)

    def _pgf(self, t):
        return self.p / (1.0 - self.q * t)

    def _pgf_derivative(self, t, k):
        return math.factorial(k) * self.p * self.q**k / (1.0 - self.q * t) ** (k + 1)

    def sample_sum(self, counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        out = np.zeros_like(counts)
        pos = counts > 0
        if np.any(pos):
            out[pos] = rng.negative_binomial(counts[pos], self.p)
        return out

    def truncation_point(self, eps):
        n = max(0, math.ceil(math.log(eps) / math.log(self.q)) - 1)
        while self.q ** (n + 1) > eps:
            n += 1
        return n


def pgf(law: NatLaw, t):
    return law.pgf(t)


def pgf_derivative(law: NatLaw, t, k: int):
    return law.pgf_derivative(t, k)


def factorial_moment(law: NatLaw, k: int) -> float:
    return law.factorial_moment(k)


# ---------------------------------------------------------------------------
# Laws on N^X
# ---------------------------------------------------------------------------


def _as_row(row) -> tuple:
    r = np.asarray(row, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise LawError("row must be a non-empty vector")
    if np.any(r < 0) or abs(r.sum() - 1.0) > NORM_TOL:
        raise LawError("row must be a probability vector")
    return tuple(float(v) for v in r)


class OffspringLaw:
    """Common interface of the laws on N^X."""

    type_count: int

    def _genfun(self, z):
        raise NotImplementedError

    def total(self) -> NatLaw:
        raise NotImplementedError

    def first_moments(self) -> np.ndarray:
        """Expected number of children of each type."""
        raise NotImplementedError

    def sample_sum(self, counts, rng) -> np.ndarray:
        """Row r is the sum of counts[r] independent draws; shape (len(counts), X)."""
        raise NotImplementedError

    def genfun(self, z):
        z = _check_unit(z, "z")
        if z.shape[-1] != self.type_count:
            raise DomainError(f"z must have {self.type_count} coordinates")
        out = self._genfun(z)
        return float(out) if z.ndim == 1 else out

    def sample(self, rng, size=None):
        n = 1 if size is None else int(size)
        out = self.sample_sum(np.ones(n, dtype=np.int64), rng)
        return out[0] if size is None else out

    def zero_mass(self, x: int) -> float:
        """P(f_x = 0)."""
        z = np.ones(self.type_count)
        z[x] = 0.0
        return self.genfun(z)


@dataclass(frozen=True)
class Explicit(OffspringLaw):
    """Finitely many atoms, each a (vector, probability) pair."""

    atoms: tuple

    def __post_init__(self):
        if not self.atoms:
            raise LawError("Explicit law needs at least one atom")
        vecs = [tuple(int(v) for v in f) for f, _ in self.atoms]
        probs = [float(p) for _, p in self.atoms]
        width = {len(v) for v in vecs}
        if len(width) != 1:
            raise LawError("all atoms must have the same number of types")
        if any(v < 0 for f in vecs for v in f) or any(p < 0 for p in probs):
            raise LawError("atoms must be non-negative")
        if abs(sum(probs) - 1.0) > NORM_TOL:
            raise LawError("atom probabilities must sum to 1")
        object.__setattr__(self, "atoms", tuple(zip(vecs, probs)))

    @property
    def type_count(self):
        return len(self.atoms[0][0])

    def _mat(self):
        return np.array([f for f, _ in self.atoms], dtype=np.int64)

    def _probs(self):
        return np.array([p for _, p in self.atoms])

    def _genfun(self, z):
        mono = np.prod(z[..., None, :] ** self._mat(), axis=-1)
        return mono @ self._probs()

    def total(self):
        sizes = self._mat().sum(axis=1)
        p = np.zeros(int(sizes.max()) + 1)
        np.add.at(p, sizes, self._probs())
        return FiniteSupport(tuple(p / p.sum()))

    def first_moments(self):
        return self._probs() @ self._mat()

    def sample_sum(self, counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        probs = self._probs()
        draws = rng.multinomial(counts, probs / probs.sum())
        return draws @ self._mat()


@dataclass(frozen=True)
class IndepDiffusion(OffspringLaw):
    """T ~ total children, each typed independently according to ``row``."""

    total_law: NatLaw
    row: tuple

    def __post_init__(self):
        object.__setattr__(self, "row", _as_row(self.row))

    @property
    def type_count(self):
        return len(self.row)

    def _genfun(self, z):
        return self.total_law.pgf(np.clip(z @ np.asarray(self.row), 0.0, 1.0))

    def total(self):
        return self.total_law

    def first_moments(self):
        return self.total_law.mean() * np.asarray(self.row)

    def sample_sum(self, counts, rng):
        n = self.total_law.sample_sum(counts, rng)
        row = np.asarray(self.row)
        return rng.multinomial(n, row / row.sum())


@dataclass(frozen=True)
class AllToOne(OffspringLaw):
    """T ~ total children, all given one type drawn according to ``row``."""

    total_law: NatLaw
    row: tuple

    def __post_init__(self):
        object.__setattr__(self, "row", _as_row(self.row))

    @property
    def type_count(self):
        return len(self.row)

    def _genfun(self, z):
        return sum(p * self.total_law.pgf(z[..., x]) for x, p in enumerate(self.row) if p > 0)

    def total(self):
        return self.total_law

    def first_moments(self):
        return self.total_law.mean() * np.asarray(self.row)

    def sample_sum(self, counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        row = np.asarray(self.row)
        blocks = rng.multinomial(counts, row / row.sum())
        out = np.zeros_like(blocks)
        for x in range(self.type_count):
            out[:, x] = self.total_law.sample_sum(blocks[:, x], rng)
        return out


@dataclass(frozen=True)
class Balanced(OffspringLaw):
    """Deterministic quota per type plus an independently typed remainder.

    With i children in total, ``alpha_i * k * row[x]`` of them get type x and
    the remaining ``i - k * alpha_i`` are typed independently by ``row``.
    ``alpha`` is ``"floor"`` (alpha_i = i // k), ``"zero"``, or a tuple of
    explicit values for the first few i, continued by the floor rule.
    """

    total_law: NatLaw
    row: tuple
    k: int
    alpha: object = "floor"
    eps: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "row", _as_row(self.row))
        k = int(self.k)
        if k < 1:
            raise LawError("Balanced k must be a positive integer")
        quota = k * np.asarray(self.row)
        if np.any(np.abs(quota - np.round(quota)) > 1e-9):
            raise LawError("k * row[x] must be a natural number for every x")
        object.__setattr__(self, "k", k)
        a = self.alpha
        if isinstance(a, str):
            if a not in ("floor", "zero"):
                raise LawError("alpha must be 'floor', 'zero' or a list of integers")
        else:
            a = tuple(int(v) for v in a)
            bad = [i for i, v in enumerate(a) if v < 0 or k * v > i]
            if bad:
                raise LawError(f"alpha schedule violates k*alpha_i <= i at i={bad[0]}")
            object.__setattr__(self, "alpha", a)

    @property
    def type_count(self):
        return len(self.row)

    def quota(self) -> np.ndarray:
        return np.round(self.k * np.asarray(self.row)).astype(np.int64)

    def alpha_at(self, i):
        i = np.asarray(i, dtype=np.int64)
        if self.alpha == "zero":
            return np.zeros_like(i)
        out = i // self.k
        if not isinstance(self.alpha, str) and len(self.alpha):
            explicit = np.asarray(self.alpha, dtype=np.int64)
            inside = i < explicit.size
            out = np.where(inside, explicit[np.clip(i, 0, explicit.size - 1)], out)
        return out

    def truncation(self):
        """(N, bound): terms i <= N are summed, the neglected mass is <= bound."""
        law = self.total_law
        try:
            n = law.truncation_point(self.eps)
        except (OverflowError, ValueError) as exc:
            raise TruncationBudgetExceeded(str(exc)) from exc
        if n > TRUNCATION_CAP:
            raise TruncationBudgetExceeded(f"tail mass {self.eps} needs {n} terms")
        return n, float(law.tail(n + 1))

    def _genfun(self, z):
        n, _ = self.truncation()
        i = np.arange(n + 1)
        rho = np.asarray(self.total_law.pmf(i), dtype=float)
        a = self.alpha_at(i)
        fixed = a[:, None] * self.quota()[None, :]
        rem = i - self.k * a
        flat = z.reshape(-1, self.type_count)
        pz = flat @ np.asarray(self.row)
        out = np.empty(flat.shape[0])
        step = max(1, 2**20 // (n + 1))
        for s in range(0, flat.shape[0], step):
            zz = flat[s : s + step]
            mono = np.prod(zz[:, None, :] ** fixed[None, :, :], axis=-1)
            mono *= pz[s : s + step, None] ** rem[None, :]
            out[s : s + step] = mono @ rho
        return out.reshape(z.shape[:-1])

    def genfun_with_bound(self, z):
        return self.genfun(z), self.truncation()[1]

    def total(self):
        return self.total_law

    def first_moments(self):
        return self.total_law.mean() * np.asarray(self.row)

    def sample_sum(self, counts, rng):
        counts = np.asarray(counts, dtype=np.int64)
        owner = np.repeat(np.arange(counts.size), counts)
        sizes = self.total_law.sample_sum(np.ones(owner.size, dtype=np.int64), rng)
        a = self.alpha_at(sizes)
        fixed = np.zeros((counts.size, self.type_count), dtype=np.int64)
        np.add.at(fixed, owner, a[:, None] * self.quota()[None, :])
        rem = np.zeros(counts.size, dtype=np.int64)
        np.add.at(rem, owner, sizes - self.k * a)
        row = np.asarray(self.row)
        return fixed + rng.multinomial(rem, row / row.sum())


def genfun_eval(law: OffspringLaw, z):
    return law.genfun(z)


def total_law(law: OffspringLaw) -> NatLaw:
    return law.total()


def sample_offspring(law: OffspringLaw, rng) -> np.ndarray:
    return law.sample(rng)
