"""Branching processes in varying environment (BPVE).

Generation n reproduces with the law rho_n.  A model is an explicit prefix of
laws followed by a tail rule: a constant law, a periodic list of laws, or a
named one-parameter family driven by a parameter sequence (``ParamSeq``).
Tail rules are what make statements about *all* n checkable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np

from .brw import AliveEstimate
from .distributions import FiniteSupport, MixedPoisson, NatLaw, Poisson
from .errors import LawError

TOL = 1e-12


# ---------------------------------------------------------------------------
# parameter sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamSeq:
    """A parameter sequence n -> a_n with a recognizable form.

    kind      a_n
    const     limit
    power     limit - coef / (n + shift)**power
    geometric limit - coef * ratio**n
    periodic  values[n % len(values)]
    """

    kind: str
    limit: float = 1.0
    coef: float = 0.0
    shift: float = 1.0
    power: float = 1.0
    ratio: float = 0.5
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("const", "power", "geometric", "periodic"):
            raise LawError(f"unknown parameter sequence kind {self.kind!r}")
        if self.kind == "power" and self.shift <= 0:
            raise LawError("power sequences need shift > 0")
        if self.kind == "geometric" and not (0 < self.ratio < 1):
            raise LawError("geometric sequences need 0 < ratio < 1")
        if self.kind == "periodic":
            if not self.values:
                raise LawError("periodic sequences need values")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def constant(cls, value):
        return cls("const", limit=float(value))

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        if self.kind == "const":
            out = np.full(n.shape, self.limit)
        elif self.kind == "power":
            out = self.limit - self.coef / (n + self.shift) ** self.power
        elif self.kind == "geometric":
            out = self.limit - self.coef * self.ratio**n
        else:
            vals = np.asarray(self.values)
            out = vals[n.astype(np.int64) % vals.size]
        return float(out) if out.ndim == 0 else out

    @property
    def period(self) -> int:
        return len(self.values) if self.kind == "periodic" else 1

    def phase_limit(self, r: int) -> float:
        """Limit along n = r mod period."""
        return self.values[r % len(self.values)] if self.kind == "periodic" else self.limit

    def inf_from(self, n0: int) -> float:
        if self.kind == "periodic":
            return min(self.values)
        return min(self(n0), self.limit)

    def sup_from(self, n0: int) -> float:
        if self.kind == "periodic":
            return max(self.values)
        return max(self(n0), self.limit)

    def deficit_summable(self, target: float):
        """Whether sum_n |target - a_n| < infinity."""
        if self.kind == "periodic":
            return all(abs(v - target) <= TOL for v in self.values)
        if abs(self.limit - target) > TOL:
            return False
        if self.kind == "power":
            return self.coef == 0 or self.power > 1
        return True

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "periodic":
            d["values"] = list(self.values)
            return d
        d["limit"] = self.limit
        if self.kind == "power":
            d.update(coef=self.coef, shift=self.shift, power=self.power)
        if self.kind == "geometric":
            d.update(coef=self.coef, ratio=self.ratio)
        return d


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

FAMILIES = ("bernoulli", "poisson", "binary_split", "mixed_poisson")


def family_law(family: str, params, weights=()) -> NatLaw:
    """The law of a named family at the given parameter value(s)."""
    if family == "bernoulli":
        a = float(params[0])
        if not (0 < a <= 1 + TOL):
            raise LawError("bernoulli parameter must lie in (0,1]")
        a = min(a, 1.0)
        return FiniteSupport((1 - a, a))
    if family == "poisson":
        return Poisson(float(params[0]))
    if family == "binary_split":
        m = float(params[0])
        if not (0 < m <= 2 + TOL):
            raise LawError("binary_split mean must lie in (0,2]")
        m = min(m, 2.0)
        return FiniteSupport((1 - m / 2, 0.0, m / 2))
    if family == "mixed_poisson":
        return MixedPoisson(tuple(zip(weights, (float(p) for p in params))))
    raise LawError(f"unknown family {family!r}")


@dataclass(frozen=True)
class ConstantTail:
    law: NatLaw


@dataclass(frozen=True)
class PeriodicTail:
    laws: tuple

    def __post_init__(self):
        if not self.laws:
            raise LawError("periodic tail needs at least one law")
        object.__setattr__(self, "laws", tuple(self.laws))


@dataclass(frozen=True)
class ClosedFormTail:
    """Named family evaluated at params[j](n) for absolute time n."""

    family: str
    params: tuple
    weights: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise LawError(f"unknown family {self.family!r}")
        params = tuple(self.params) if isinstance(self.params, (tuple, list)) else (self.params,)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.family == "mixed_poisson" and len(self.weights) != len(params):
            raise LawError("mixed_poisson needs one weight per rate sequence")
        if self.family != "mixed_poisson" and len(params) != 1:
            raise LawError(f"{self.family} takes a single parameter sequence")

    def law(self, n: int) -> NatLaw:
        return family_law(self.family, [p(n) for p in self.params], self.weights)

    @property
    def period(self) -> int:
        return reduce(math.lcm, (p.period for p in self.params), 1)

    def convergent(self) -> bool:
        return all(p.kind != "periodic" for p in self.params)

    def limit_laws(self) -> list:
        """Laws at the limit points of the parameter sequences."""
        return [family_law(self.family, [p.phase_limit(r) for p in self.params], self.weights)
                for r in range(self.period)]

    def extreme_law(self, n0: int, lowest: bool) -> NatLaw:
        """Law at the smallest (or largest) parameter values over n >= n0.

        Every family here has a pgf that decreases in each parameter, so these
        laws bound the pgfs of the tail from above (or below).
        """
        vals = [p.inf_from(n0) if lowest else p.sup_from(n0) for p in self.params]
        return family_law(self.family, vals, self.weights)


@dataclass(frozen=True)
class BpveModel:
    prefix: tuple = ()
    tail: object = None

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        if self.tail is None:
            raise LawError("a BPVE needs a tail rule")
        for n, law in enumerate(self.prefix):
            if law.pmf(0) >= 1:
                raise LawError(f"generation {n} has no offspring almost surely")
        t = self.tail
        if isinstance(t, ConstantTail) and t.law.pmf(0) >= 1:
            raise LawError("tail law has no offspring almost surely")
        if isinstance(t, PeriodicTail) and any(l.pmf(0) >= 1 for l in t.laws):
            raise LawError("a periodic tail law has no offspring almost surely")
        if isinstance(t, ClosedFormTail):
            lo = [p.inf_from(len(self.prefix)) for p in t.params]
            if min(lo) <= 0:
                raise LawError("closed-form parameters must stay positive")
            t.extreme_law(len(self.prefix), lowest=True)
            t.extreme_law(len(self.prefix), lowest=False)

    @classmethod
    def constant(cls, law: NatLaw) -> "BpveModel":
        return cls((), ConstantTail(law))

    @classmethod
    def bernoulli(cls, a: ParamSeq) -> "BpveModel":
        return cls((), ClosedFormTail("bernoulli", (a,)))

    @property
    def start(self) -> int:
        return len(self.prefix)

    @property
    def period(self) -> int:
        t = self.tail
        if isinstance(t, PeriodicTail):
            return len(t.laws)
        if isinstance(t, ClosedFormTail):
            return t.period
        return 1

    def law_at(self, n: int) -> NatLaw:
        if n < len(self.prefix):
            return self.prefix[n]
        t = self.tail
        if isinstance(t, ConstantTail):
            return t.law
        if isinstance(t, PeriodicTail):
            return t.laws[(n - len(self.prefix)) % len(t.laws)]
        return t.law(n)

    def limit_laws(self):
        """Laws whose values determine limsup / liminf of continuous functionals."""
        t = self.tail
        if isinstance(t, ConstantTail):
            return [t.law]
        if isinstance(t, PeriodicTail):
            return list(t.laws)
        return t.limit_laws()

    def pgf_envelope(self, n0: int, upper: bool, t):
        """sup (or inf) over n >= n0 of phi_n(t), exact for every tail rule."""
        t = np.asarray(t, dtype=float)
        head = [self.law_at(n) for n in range(n0, max(n0, self.start))]
        tl = self.tail
        if isinstance(tl, ConstantTail):
            laws = head + [tl.law]
        elif isinstance(tl, PeriodicTail):
            laws = head + list(tl.laws)
        else:
            laws = head + [tl.extreme_law(max(n0, self.start), lowest=upper)]
        vals = np.vstack([np.atleast_1d(l.pgf(t)) for l in laws])
        return vals.max(axis=0) if upper else vals.min(axis=0)


# ---------------------------------------------------------------------------
# block composition and survival criteria
# ---------------------------------------------------------------------------


def compose_blocks(model: BpveModel, breakpoints, i: int, t: float) -> float:
    """phi_{n_{i+1}-1} o ... o phi_{n_i} evaluated at t (phi_{n_i} applied first)."""
    bp = list(breakpoints)
    if any(b <= a for a, b in zip(bp, bp[1:])):
        raise ValueError("breakpoints must be strictly increasing")
    if not (0 <= i < len(bp) - 1):
        raise IndexError("block index out of range")
    val = t
    for n in range(bp[i], bp[i + 1]):
        val = model.law_at(n).pgf(val)
    return float(val)


@dataclass
class BinarySurvival:
    kind: str  # "Survives" | "Dies" | "Undecided"
    partial_product: float
    horizon: int
    limit: float | None = None
    limit_exact: str | None = None
    limit_bounds: tuple | None = None
    method: str = ""

    def to_dict(self):
        d = {"kind": self.kind, "partial_product": self.partial_product, "horizon": self.horizon,
             "method": self.method}
        if self.limit is not None:
            d["limit"] = self.limit
        if self.limit_exact is not None:
            d["limit_exact"] = self.limit_exact
        if self.limit_bounds is not None:
            d["limit_bounds"] = list(self.limit_bounds)
        return d


def _power_tail_sum_bounds(seq: ParamSeq, n0: int):
    """Bounds on sum_{n >= n0} coef/(n+shift)^p for p > 1 (integral test)."""
    c, s, p = seq.coef, seq.shift, seq.power
    lo = c / ((p - 1) * (n0 + s) ** (p - 1))
    hi = c / (n0 + s) ** p + lo
    return lo, hi


def survival_binary(a_seq, horizon: int = 10_000) -> BinarySurvival:
    """Survival of the BPVE with rho_n(1) = a_n, rho_n(0) = 1 - a_n.

    The process survives with probability prod a_n, which is positive iff
    sum (1 - a_n) < infinity.
    """
    n = np.arange(horizon)
    vals = np.asarray(a_seq(n), dtype=float)
    if np.any(vals <= 0) or np.any(vals > 1 + TOL):
        raise LawError("a_n must lie in (0,1]")
    partial = float(np.exp(np.sum(np.log(np.minimum(vals, 1.0)))))
    if not isinstance(a_seq, ParamSeq):
        return BinarySurvival("Undecided", partial, horizon, method="no recognized form")
    if a_seq.sup_from(0) > 1 + TOL:
        raise LawError("a_n must lie in (0,1]")
    if not a_seq.deficit_summable(1.0):
        return BinarySurvival("Dies", partial, horizon, limit=0.0,
                              method="sum of 1 - a_n diverges")
    out = BinarySurvival("Survives", partial, horizon, method="sum of 1 - a_n converges")
    if a_seq.kind == "const" or (a_seq.kind == "periodic") or a_seq.coef == 0:
        out.limit, out.limit_exact = 1.0, "1"
        return out
    s = a_seq.shift
    if (a_seq.kind == "power" and a_seq.power == 2 and a_seq.coef == 1
            and float(s).is_integer() and s >= 2):
        # prod_{k >= s} (1 - 1/k^2) telescopes to (s-1)/s
        frac = Fraction(int(s) - 1, int(s))
        out.limit, out.limit_exact = float(frac), f"{frac.numerator}/{frac.denominator}"
        out.method += "; telescoping product"
        return out
    # tail product bounds from -d/(1-d) <= log(1-d) <= -d
    if a_seq.kind == "power":
        lo_sum, hi_sum = _power_tail_sum_bounds(a_seq, horizon)
    else:
        hi_sum = lo_sum = a_seq.coef * a_seq.ratio**horizon / (1 - a_seq.ratio)
    d0 = 1 - a_seq(horizon)
    lower = partial * math.exp(-hi_sum / (1 - d0))
    upper = partial * math.exp(-lo_sum)
    out.limit_bounds = (lower, upper)
    out.limit = 0.5 * (lower + upper)
    return out


@dataclass
class CriterionResult:
    kind: str  # "Survives" | "Inconclusive"
    limsup: float
    threshold: float
    window_max: float | None = None
    method: str = ""

    def to_dict(self):
        return {"kind": self.kind, "limsup": self.limsup, "threshold": self.threshold,
                "window_max": self.window_max, "method": self.method}


def _limsup(model: BpveModel, fn, horizon: int):
    value = max(fn(law) for law in model.limit_laws())
    lo = max(model.start, horizon // 2)
    window = max(fn(model.law_at(n)) for n in range(lo, max(lo + 1, horizon + 1)))
    return value, window


def check_zero_one_survival(model: BpveModel, horizon: int = 1000) -> CriterionResult:
    """Survival when limsup (2 rho_n(0) + rho_n(1)) < 1."""
    fn = lambda law: 2 * law.pmf(0) + law.pmf(1)
    ls, window = _limsup(model, fn, horizon)
    kind = "Survives" if ls < 1 - TOL else "Inconclusive"
    return CriterionResult(kind, float(ls), 1.0, float(window), "limsup over tail rule")


def check_small_counts_survival(model: BpveModel, k0: int, horizon: int = 1000) -> CriterionResult:
    """Survival when limsup sum_{k <= k0} (k0 + 1 - k) rho_n(k) < k0."""
    if k0 < 1:
        raise ValueError("k0 must be a positive integer")
    k = np.arange(k0 + 1)
    fn = lambda law: float(np.sum((k0 + 1 - k) * np.asarray(law.pmf(k))))
    ls, window = _limsup(model, fn, horizon)
    kind = "Survives" if ls < k0 - TOL else "Inconclusive"
    return CriterionResult(kind, float(ls), float(k0), float(window), "limsup over tail rule")


def tail_sum_compare(mu_law: NatLaw, nu_law: NatLaw, t: float, k0: int, tol: float = 1e-12) -> bool:
    """Truncated tail-sum inequality implying phi_mu(t) <= phi_nu(t).

    Left side: sum_{i <= k0} P(T_mu > i) t^i.  Right side: the full series
    sum_i P(T_nu > i) t^i = (1 - phi_nu(t)) / (1 - t), or E[T_nu] at t = 1.
    """
    if not (0 <= t <= 1):
        raise ValueError("t must lie in [0,1]")
    i = np.arange(k0 + 1)
    lhs = float(np.sum(np.asarray(mu_law.tail(i + 1)) * t**i))
    rhs = nu_law.mean() if t == 1 else (1 - nu_law.pgf(t)) / (1 - t)
    return lhs >= rhs - tol


@dataclass
class GermCompareResult:
    holds: bool
    worst_margin: float
    witness: dict | None = None
    tail_exact: bool = False
    checked_to: int = 0

    def to_dict(self):
        return {"holds": self.holds, "worst_margin": self.worst_margin, "witness": self.witness,
                "tail_exact": self.tail_exact, "checked_to": self.checked_to}


def germ_compare_bpve(mu: BpveModel, nu: BpveModel, delta: float, n0: int = 0,
                      horizon: int = 200, points: int = 256, tol: float = 1e-12) -> GermCompareResult:
    """Check phi^mu_n <= phi^nu_n on [delta,1] for every n >= n0.

    Times up to the horizon are checked law by law; later times are covered
    by envelopes of the tail rules, which is exact for constant and periodic
    tails and uses parameter monotonicity for the named families.
    """
    if not (0 <= delta < 1):
        raise ValueError("delta must lie in [0,1)")
    t = np.linspace(delta, 1.0, points)[:-1]
    horizon = max(horizon, n0, mu.start, nu.start)
    worst, witness = np.inf, None
    for n in range(n0, horizon + 1):
        lm, ln = mu.law_at(n), nu.law_at(n)
        if lm.mean() < ln.mean() - tol:
            return GermCompareResult(False, lm.mean() - ln.mean(),
                                     {"n": n, "t": "1-", "mean_mu": lm.mean(), "mean_nu": ln.mean()},
                                     checked_to=n)
        margin = np.asarray(ln.pgf(t)) - np.asarray(lm.pgf(t))
        j = int(np.argmin(margin))
        if margin[j] < worst:
            worst, witness = float(margin[j]), {"n": n, "t": float(t[j])}
        if margin[j] < -tol:
            return GermCompareResult(False, worst, witness, checked_to=n)
    up = mu.pgf_envelope(horizon + 1, upper=True, t=t)
    down = nu.pgf_envelope(horizon + 1, upper=False, t=t)
    margin = down - up
    j = int(np.argmin(margin))
    if margin[j] < worst:
        worst, witness = float(margin[j]), {"n": f">{horizon}", "t": float(t[j])}
    # slope at 1: the smallest mean of mu against the largest mean of nu
    mean_mu = min(l.mean() for l in _tail_laws(mu, horizon + 1, lowest=True))
    mean_nu = max(l.mean() for l in _tail_laws(nu, horizon + 1, lowest=False))
    if mean_mu < mean_nu - tol:
        return GermCompareResult(False, min(worst, mean_mu - mean_nu),
                                 {"n": f">{horizon}", "t": "1-", "mean_mu": mean_mu, "mean_nu": mean_nu},
                                 checked_to=horizon)
    holds = worst >= -tol
    return GermCompareResult(holds, worst, witness, tail_exact=holds,
                             checked_to=horizon)


def _tail_laws(model: BpveModel, n0: int, lowest: bool):
    tl = model.tail
    head = [model.law_at(n) for n in range(n0, max(n0, model.start))]
    if isinstance(tl, ConstantTail):
        return head + [tl.law]
    if isinstance(tl, PeriodicTail):
        return head + list(tl.laws)
    return head + [tl.extreme_law(max(n0, model.start), lowest=lowest)]


# ---------------------------------------------------------------------------
# moment criterion for the comparison process
# ---------------------------------------------------------------------------


@dataclass
class MomentCriterion:
    kind: str  # "Survives" | "Inconclusive"
    partial_sum: float
    running_inf: float
    horizon: int
    series: str
    infimum: str
    tail_bound: float | None = None
    infinite_second_moment: bool = False

    def to_dict(self):
        return {"kind": self.kind, "partial_sum": self.partial_sum, "running_inf": self.running_inf,
                "horizon": self.horizon, "series": self.series, "infimum": self.infimum,
                "tail_bound": self.tail_bound, "infinite_second_moment": self.infinite_second_moment}


def _family_moment_ratio(family: str, law: NatLaw) -> float:
    m1 = law.mean()
    return (law.second_moment() - m1) / m1


def check_moment_survival(nu: BpveModel, n0: int = 0, horizon: int = 1000) -> MomentCriterion:
    """Moment conditions implying survival of nu (and of anything germ-above it).

        sum_{j >= n0} (m2_j - m1_j)/m1_j * (prod_{i=n0}^j m1_i)^{-1} < infinity,
        inf_j prod_{i=n0}^j m1_i > 0,

    where m1, m2 are the first two raw moments of rho^nu_j.
    """
    tl = nu.tail
    period = nu.period
    # extend the explicit range to a whole number of periods past the prefix
    end = max(horizon, n0, nu.start)
    end = nu.start + max(1, -(-(end - nu.start + 1) // period)) * period - 1
    idx = range(n0, end + 1)
    m1 = np.array([nu.law_at(j).mean() for j in idx])
    m2 = np.array([nu.law_at(j).second_moment() for j in idx])
    if np.any(m1 <= 0):
        return MomentCriterion("Inconclusive", math.inf, 0.0, end, "zero mean", "zero mean")
    if not np.all(np.isfinite(m2)):
        return MomentCriterion("Inconclusive", math.inf, 0.0, end, "infinite second moment",
                               "undecided", infinite_second_moment=True)
    log_prod = np.cumsum(np.log(m1))
    with np.errstate(over="ignore"):  # huge products only shrink the terms
        prod = np.exp(log_prod)
    terms = (m2 - m1) / m1 * np.exp(-log_prod)
    partial = float(terms.sum())
    running_inf = float(prod.min())
    p_end = float(prod[-1])

    series, infimum, bound = "undecided", "undecided", None
    if isinstance(tl, (ConstantTail, PeriodicTail)) or (
            isinstance(tl, ClosedFormTail) and not tl.convergent()):
        laws = [nu.law_at(end + 1 + r) for r in range(period)]
        lm1 = np.array([l.mean() for l in laws])
        ratio = np.array([(l.second_moment() - l.mean()) / l.mean() for l in laws])
        cyc = float(np.prod(lm1))
        within = np.cumprod(lm1)
        per_period = float(np.sum(ratio / within))
        if per_period <= TOL:
            series, bound = "converges: terms vanish beyond the horizon", 0.0
        elif cyc > 1:
            bound = per_period / p_end / (1 - 1 / cyc)
            series = "converges: geometric tail"
        else:
            series = "diverges: per-period product <= 1"
        if cyc >= 1:
            infimum = "positive: products non-decreasing over whole periods"
            running_inf = min(running_inf, p_end * float(within.min()))
        else:
            infimum = "zero: per-period product < 1"
    elif isinstance(tl, ClosedFormTail):
        lim = tl.limit_laws()[0]
        lim_m1 = lim.mean()
        if tl.family == "bernoulli":
            series, bound = "converges: second and first moments coincide", 0.0
            if tl.params[0].deficit_summable(1.0):
                infimum = "positive: sum of 1 - a_n converges"
            else:
                infimum = "zero: sum of 1 - a_n diverges"
        elif lim_m1 > 1 + TOL:
            q = 0.5 * (1 + lim_m1)
            # the mean increases in each parameter, so the lowest-parameter law
            # over n >= j bounds every later mean from below
            j = end + 1
            while tl.extreme_law(j, lowest=True).mean() < q:
                j = 2 * j + 1
            extra = range(end + 1, j)
            e1 = np.array([nu.law_at(k).mean() for k in extra])
            e2 = np.array([nu.law_at(k).second_moment() for k in extra])
            if e1.size:
                with np.errstate(over="ignore"):
                    ep = p_end * np.exp(np.cumsum(np.log(e1)))
                partial += float(np.sum((e2 - e1) / e1 / ep))
                running_inf = min(running_inf, float(ep.min()))
                p_j = float(ep[-1])
            else:
                p_j = p_end
            # (m2 - m1)/m1 is 1 for binary splits and at most the largest rate otherwise
            sup_ratio = 1.0 if tl.family == "binary_split" else max(p.sup_from(j) for p in tl.params)
            bound = sup_ratio / p_j / (q - 1)
            series = "converges: means eventually above a constant > 1"
            infimum = "positive: products increasing after the horizon"
        else:
            lim_ratio = _family_moment_ratio(tl.family, lim)
            top_m1 = tl.extreme_law(end + 1, lowest=False).mean()
            if lim_m1 < 1 - TOL:
                series, infimum = "diverges: limiting mean < 1", "zero: limiting mean < 1"
            elif top_m1 <= 1 + TOL and lim_ratio > TOL:
                # products stop growing, so the terms stay bounded away from zero
                series = "diverges: terms do not tend to zero"
                infimum = "undecided"
    ok = series.startswith("converges") and infimum.startswith("positive")
    return MomentCriterion("Survives" if ok else "Inconclusive", partial, running_inf, end,
                           series, infimum, bound)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def simulate_bpve(model: BpveModel, horizon: int, reps: int, rng, cap: int = 10**6,
                  start: int = 1) -> AliveEstimate:
    """Fraction of runs with at least one individual after ``horizon`` generations."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    z = np.full(reps, start, dtype=np.int64)
    capped = np.zeros(reps, dtype=bool)
    active = np.arange(reps)
    for n in range(horizon):
        law = model.law_at(n)
        sub = law.sample_sum(z[active], rng)
        z[active] = sub
        over = sub > cap
        capped[active[over]] = True
        active = active[(sub > 0) & ~over]
        if active.size == 0:
            break
    alive = capped | (z > 0)
    f = float(alive.mean())
    return AliveEstimate(f, float(np.sqrt(f * (1 - f) / reps)), reps, int(capped.sum()))
