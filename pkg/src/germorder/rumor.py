"""Firework and reverse firework rumor processes on N with multi-type stations.

Site y carries a random configuration of stations drawn from an offspring
law mu_y on N^X; a station of type x at y has an integer radius drawn from
r_{x,y}.  Only the maximal radius at each site matters, and its law is
P(max radius < t) = G_y(r_y(t)) with r_y(t)_x = P(R_{x,y} < t).

In the firework process an informed site informs every site within its
maximal radius; in the reverse firework process a site becomes informed when
an informed site lies within its own maximal radius.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .distributions import IndepDiffusion, OffspringLaw
from .errors import LawError, NotReducible, PreconditionViolated
from .orders import GERM, PGF, FamilyPair, GridSpec, OrderVerdict, check_pgf_order, find_germ_delta
from .series import CONVERGES, DIVERGES, UNDECIDED, SeriesVerdict, sampled_partial_sums

FIREWORK = "Firework"
REVERSE = "ReverseFirework"
CRITICAL_SLACK = 1e-12


# ---------------------------------------------------------------------------
# radius laws
# ---------------------------------------------------------------------------


class RadiusLaw:
    """Law of an integer radius R >= 0, given by tail(i) = P(R >= i)."""

    def _tail(self, i: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tail(self, i):
        i = np.asarray(i)
        out = np.where(i <= 0, 1.0, self._tail(np.maximum(i, 1)))
        return float(out) if out.ndim == 0 else out

    def cdf(self, t):
        """P(R < t) for real t >= 0."""
        t = np.asarray(t, dtype=float)
        out = np.where(t <= 0, 0.0, 1.0 - self.tail(np.ceil(t).astype(np.int64)))
        return float(out) if out.ndim == 0 else out

    def harmonic_constant(self):
        """c such that tail(i) - c/i is absolutely summable, or None if unknown."""
        return None

    def tail_sum_bound(self, k: int):
        """Upper bound on sum_{i > k} tail(i): inf if the sum diverges, None if unknown."""
        return None

    def satisfies_standing_assumption(self) -> bool:
        """Whether P(R < 1) lies strictly between 0 and 1."""
        return 0.0 < self.cdf(1.0) < 1.0

    def sample_max(self, counts, rng, cap: int) -> np.ndarray:
        """Maximum of counts[j] independent radii (0 for no radii), capped at cap.

        Inverse transform on the law of the maximum: P(max <= m) = P(R <= m)^k.
        """
        counts = np.asarray(counts)
        table = 1.0 - self.tail(np.arange(1, cap + 2))  # P(R <= m), m = 0..cap
        u = rng.random(counts.shape)
        pos = counts > 0
        v = np.zeros(counts.shape)
        v[pos] = u[pos] ** (1.0 / counts[pos])
        out = np.searchsorted(table, v, side="left")
        out[~pos] = 0
        return np.minimum(out, cap)


@dataclass(frozen=True)
class ParetoRadius(RadiusLaw):
    """P(R >= i) = min(1, 1/(lam0 i)) for i >= 1."""

    lam0: float

    def __post_init__(self):
        if not self.lam0 > 0:
            raise LawError("lam0 must be positive")

    def _tail(self, i):
        return np.minimum(1.0, 1.0 / (self.lam0 * i))

    def harmonic_constant(self):
        return 1.0 / self.lam0

    def tail_sum_bound(self, k):
        return math.inf


@dataclass(frozen=True)
class GeometricRadius(RadiusLaw):
    """P(R >= i) = ratio**i."""

    ratio: float

    def __post_init__(self):
        if not (0 <= self.ratio < 1):
            raise LawError("ratio must lie in [0,1)")

    def _tail(self, i):
        return self.ratio ** i.astype(float)

    def harmonic_constant(self):
        return 0.0

    def tail_sum_bound(self, k):
        return self.ratio ** (k + 1) / (1 - self.ratio)


@dataclass(frozen=True)
class FiniteRadius(RadiusLaw):
    """P(R >= i) = tails[i-1] for i <= len(tails) and 0 beyond."""

    tails: tuple

    def __post_init__(self):
        t = tuple(float(v) for v in self.tails)
        arr = np.asarray(t)
        if arr.size and (np.any(arr < 0) or np.any(arr > 1) or np.any(np.diff(arr) > 0)):
            raise LawError("tails must be non-increasing values in [0,1]")
        object.__setattr__(self, "tails", t)

    @classmethod
    def point(cls, r: int) -> "FiniteRadius":
        return cls((1.0,) * int(r))

    def _tail(self, i):
        arr = np.append(np.asarray(self.tails), 0.0)
        return arr[np.minimum(i, arr.size) - 1]

    def harmonic_constant(self):
        return 0.0

    def tail_sum_bound(self, k):
        return float(sum(self.tails[k:]))


@dataclass(frozen=True)
class MixtureRadius(RadiusLaw):
    components: tuple  # ((weight, RadiusLaw), ...)

    def __post_init__(self):
        comps = tuple((float(w), r) for w, r in self.components)
        if not comps or any(w < 0 for w, _ in comps) or abs(sum(w for w, _ in comps) - 1) > 1e-12:
            raise LawError("mixture weights must be a probability vector")
        object.__setattr__(self, "components", comps)

    def _tail(self, i):
        return sum(w * np.asarray(r.tail(i)) for w, r in self.components)

    def harmonic_constant(self):
        cs = [r.harmonic_constant() for _, r in self.components]
        return None if any(c is None for c in cs) else sum(w * c for (w, _), c in zip(self.components, cs))

    def tail_sum_bound(self, k):
        bs = [r.tail_sum_bound(k) for w, r in self.components if w > 0]
        return None if any(b is None for b in bs) else sum(
            w * r.tail_sum_bound(k) for w, r in self.components if w > 0)


@dataclass(frozen=True, eq=False)
class CallableRadius(RadiusLaw):
    """Arbitrary tail rule; asymptotic facts must be supplied to be used."""

    fn: object
    harmonic: float | None = None

    def _tail(self, i):
        return np.asarray(self.fn(i), dtype=float)

    def harmonic_constant(self):
        return self.harmonic


def effective_lambda0(radius: RadiusLaw) -> float:
    """lam0 with tail(i) ~ 1/(lam0 i)."""
    c = radius.harmonic_constant()
    if not c:
        raise ValueError("radius law has no harmonic tail")
    return 1.0 / c


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SiteRule:
    """y -> prefix[y] for y < len(prefix), then periodic in y."""

    prefix: tuple = ()
    period: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "period", tuple(self.period))
        if not self.period:
            raise LawError("a site rule needs a non-empty period")

    @classmethod
    def constant(cls, item) -> "SiteRule":
        return cls((), (item,))

    def at(self, y: int):
        if y < len(self.prefix):
            return self.prefix[y]
        return self.period[(y - len(self.prefix)) % len(self.period)]

    @property
    def homogeneous(self) -> bool:
        return not self.prefix and len(self.period) == 1


def _as_radii(item) -> tuple:
    return tuple(item) if isinstance(item, (tuple, list)) else (item,)


@dataclass(frozen=True)
class RumorModel:
    kind: str
    stations: SiteRule
    radii: SiteRule

    def __post_init__(self):
        if self.kind not in (FIREWORK, REVERSE):
            raise LawError(f"unknown rumor kind {self.kind!r}")
        radii = SiteRule(tuple(_as_radii(r) for r in self.radii.prefix),
                         tuple(_as_radii(r) for r in self.radii.period))
        object.__setattr__(self, "radii", radii)
        for y in range(self.explicit_sites + self.period):
            law, rad = self.stations.at(y), self.radii.at(y)
            if law.type_count != len(rad):
                raise LawError(f"site {y}: {law.type_count} station types but {len(rad)} radius laws")

    @classmethod
    def homogeneous(cls, kind, law: OffspringLaw, radii, root_law: OffspringLaw | None = None) -> "RumorModel":
        prefix = () if root_law is None else (root_law,)
        if root_law is not None and kind != REVERSE:
            raise LawError("a distinct root law is only meaningful for the reverse process")
        return cls(kind, SiteRule(prefix, (law,)), SiteRule.constant(_as_radii(radii)))

    @property
    def explicit_sites(self) -> int:
        return max(len(self.stations.prefix), len(self.radii.prefix))

    @property
    def period(self) -> int:
        return math.lcm(len(self.stations.period), len(self.radii.period))

    @property
    def is_homogeneous(self) -> bool:
        if not self.radii.homogeneous or len(self.stations.period) != 1:
            return False
        allowed = 1 if self.kind == REVERSE else 0
        return len(self.stations.prefix) <= allowed

    @property
    def type_count(self) -> int:
        return self.stations.at(0).type_count

    def station_law(self, y: int) -> OffspringLaw:
        return self.stations.at(y)

    def radius_laws(self, y: int) -> tuple:
        return self.radii.at(y)

    def radius_vector(self, y: int, t) -> np.ndarray:
        """r_y(t) with shape t.shape + (X,)."""
        t = np.asarray(t, dtype=float)
        return np.stack([np.asarray(r.cdf(t), dtype=float) for r in self.radius_laws(y)], axis=-1)

    def class_sites(self) -> list:
        """Representative sites of the periodic part."""
        return list(range(self.explicit_sites, self.explicit_sites + self.period))


def max_radius_cdf(model: RumorModel, y: int, t):
    """P(maximal radius at y < t) = G_y(r_y(t))."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    return model.station_law(y).genfun(model.radius_vector(y, t))


def _exponent(law: OffspringLaw, radii: tuple):
    """p = sum_x m_x c_x, the power in 1 - G(r(t)) ~ p / t, or None if unknown."""
    cs = [r.harmonic_constant() for r in radii]
    if any(c is None for c in cs):
        return None
    if not np.isfinite(law.total().second_moment()):
        return None
    return float(np.dot(law.first_moments(), cs))


def _site_factors(model: RumorModel, y: int, t) -> np.ndarray:
    return np.asarray(max_radius_cdf(model, y, np.asarray(t, dtype=float)), dtype=float)


# ---------------------------------------------------------------------------
# series criteria
# ---------------------------------------------------------------------------


@dataclass
class RumorVerdict:
    classification: str
    series: SeriesVerdict
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"classification": self.classification, "series": self.series.to_dict(), "detail": self.detail}


def _log_terms(g: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.cumsum(np.log(g))


def firework_homog_series(model: RumorModel, horizon: int = 10_000) -> RumorVerdict:
    """sum_n prod_{i<=n} G(r(i+1)): finite iff the process survives."""
    if model.kind != FIREWORK or not model.is_homogeneous:
        raise PreconditionViolated("needs a homogeneous firework model")
    law, radii = model.station_law(0), model.radius_laws(0)
    g = _site_factors(model, 0, np.arange(1, horizon + 2))
    terms = np.exp(_log_terms(g))
    sums = sampled_partial_sums(terms)
    p = _exponent(law, radii)
    if np.any(g <= 0):
        v = SeriesVerdict(CONVERGES, "ClosedForm", sums, {"reason": "a factor vanishes, so terms are eventually 0"})
    elif p is None:
        v = SeriesVerdict(UNDECIDED, "TruncationOnly", sums, {"reason": "radius tails without a known profile"})
    elif p > 1 + CRITICAL_SLACK:
        v = SeriesVerdict(CONVERGES, "ClosedForm", sums, {"exponent": p, "terms": "order n^-p"})
    else:
        v = SeriesVerdict(DIVERGES, "ClosedForm", sums, {"exponent": p, "terms": "order n^-p"})
    cls = {CONVERGES: "Survives", DIVERGES: "Dies"}.get(v.kind, "Undecided")
    return RumorVerdict(cls, v)


def reverse_homog_W(model: RumorModel, horizon: int = 10_000) -> RumorVerdict:
    """W = sum_i (1 - G(r(i))): infinite iff almost sure survival."""
    if model.kind != REVERSE or not model.is_homogeneous:
        raise PreconditionViolated("needs a homogeneous reverse firework model")
    y = model.explicit_sites  # first site with the common law
    law, radii = model.station_law(y), model.radius_laws(y)
    terms = 1.0 - _site_factors(model, y, np.arange(0, horizon + 1))
    sums = sampled_partial_sums(terms)
    v = _reverse_summability(law, radii, sums, horizon)
    cls = {DIVERGES: "SurvivesAS", CONVERGES: "Dies"}.get(v.kind, "Undecided")
    return RumorVerdict(cls, v, {"W_partial": float(terms.sum())})


def _reverse_summability(law, radii, sums, horizon) -> SeriesVerdict:
    """Classify sum_k (1 - G(r(k))) by comparison with the radius tails.

    Lower bound P(f_x >= 1) tail_x(k); upper bound sum_x m_x tail_x(k).
    """
    m = law.first_moments()
    for x, r in enumerate(radii):
        c = r.harmonic_constant()
        if c is not None and c > 0 and 1 - law.zero_mass(x) > 0:
            return SeriesVerdict(DIVERGES, "ComparisonSeries", sums,
                                 {"comparison": "harmonic", "type": x, "constant": c})
    bounds = []
    for x, r in enumerate(radii):
        if m[x] == 0:
            continue
        b = r.tail_sum_bound(horizon)
        if b is None or not np.isfinite(b):
            return SeriesVerdict(UNDECIDED, "TruncationOnly", sums, {"reason": f"tail of type {x} not classified"})
        bounds.append(m[x] * b)
    return SeriesVerdict(CONVERGES, "ComparisonSeries", sums,
                         {"comparison": "summable radius tails", "remainder_bound": float(sum(bounds))})


def firework_hetero_series(model: RumorModel, horizon: int = 2000) -> RumorVerdict:
    """Sufficient survival condition sum_n prod_{i<=n} G_i(r_i(n-i+1)) < infinity."""
    if model.kind != FIREWORK:
        raise PreconditionViolated("needs a firework model")
    L, P, H = model.explicit_sites, model.period, horizon
    d = np.arange(1, H + 2)
    log_terms = np.zeros(H + 1)
    g_min = 1.0
    for i in range(min(L, H + 1)):
        g = _site_factors(model, i, d[: H + 1 - i])
        g_min = min(g_min, float(g.min()))
        with np.errstate(divide="ignore"):
            log_terms[i:] += np.log(np.maximum(g, 1e-300))
    exps = []
    for k in range(P):
        y = L + k
        g = _site_factors(model, y, d)
        g_min = min(g_min, float(g.min()))
        exps.append(_exponent(model.station_law(y), model.radius_laws(y)))
        ind = np.zeros(H + 1)
        ind[y::P] = 1.0
        lg = np.log(np.maximum(g[: H + 1], 1e-300))
        log_terms += np.convolve(ind, lg)[: H + 1]
    sums = sampled_partial_sums(np.exp(log_terms))
    if any(e is None for e in exps):
        v = SeriesVerdict(UNDECIDED, "TruncationOnly", sums, {"reason": "radius tails without a known profile"})
    elif min(exps) > 1 + CRITICAL_SLACK:
        v = SeriesVerdict(CONVERGES, "ComparisonSeries", sums,
                          {"comparison": "homogeneous series of the weakest class", "exponent": min(exps)})
    elif max(exps) <= 1 + CRITICAL_SLACK and g_min > 0:
        v = SeriesVerdict(DIVERGES, "ComparisonSeries", sums,
                          {"comparison": "homogeneous series of the strongest class", "exponent": max(exps)})
    else:
        v = SeriesVerdict(UNDECIDED, "TruncationOnly", sums, {"exponents": exps})
    return RumorVerdict("Survives" if v.kind == CONVERGES else "Undecided", v, {"class_exponents": exps})


@dataclass
class ReverseChecks:
    classification: str  # "SurvivesAS" | "SurvivesPositive" | "Undecided"
    condition1: str
    condition2: str
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"classification": self.classification, "condition1": self.condition1,
                "condition2": self.condition2, "detail": self.detail}


def reverse_hetero_checks(model: RumorModel, horizon: int = 2000) -> ReverseChecks:
    """Both conditions for the heterogeneous reverse firework.

    (1) sum_k (1 - G_{n+k}(r_{n+k}(k))) = infinity for all n: almost sure survival.
    (2) sum_n prod_{k>=1} G_{n+k}(r_{n+k}(k)) < infinity: survival with positive probability.
    Both are decided class by class over the periodic part, since finitely
    many prefix sites change neither a divergent sum nor a positive product.
    """
    if model.kind != REVERSE:
        raise PreconditionViolated("needs a reverse firework model")
    L, P = model.explicit_sites, model.period
    cond1 = "fails"
    for y in model.class_sites():
        law, radii = model.station_law(y), model.radius_laws(y)
        v = _reverse_summability(law, radii, [], horizon)
        if v.kind == DIVERGES:
            return ReverseChecks("SurvivesAS", "holds", "not needed", {"class": y, **v.detail})
        if v.kind == UNDECIDED:
            cond1 = "undecided"
    if cond1 == "undecided":
        return ReverseChecks("Undecided", cond1, "not evaluated", {"reason": "radius tails not classified"})
    # condition (2): products for n >= L depend only on n mod P
    K = horizon
    k = np.arange(1, K + 1)
    products = []
    for r in range(P):
        n = L + r
        log_p, s_tail, s_max = 0.0, 0.0, 0.0
        for c in range(P):
            ks = k[(n + k - L) % P == c]
            y = L + c
            if ks.size:
                g = _site_factors(model, y, ks)
                if np.any(g <= 0):
                    log_p = -math.inf
                else:
                    log_p += float(np.sum(np.log(g)))
            m = model.station_law(y).first_moments()
            for x, rad in enumerate(model.radius_laws(y)):
                if m[x] > 0:
                    s_tail += m[x] * rad.tail_sum_bound(K)
                    s_max += m[x] * float(rad.tail(K + 1))
        if log_p == -math.inf:
            products.append(0.0)
        elif s_max < 1:
            products.append(math.exp(log_p - s_tail / (1 - s_max)))
        else:
            products.append(None)
    detail = {"product_lower_bounds": products}
    if any(p is None for p in products):
        return ReverseChecks("Undecided", cond1, "undecided", detail)
    if all(p == 0.0 for p in products):
        return ReverseChecks("SurvivesPositive", cond1, "holds", detail)
    return ReverseChecks("Undecided", cond1, "fails: products bounded below", detail)


# ---------------------------------------------------------------------------
# reduction and comparison
# ---------------------------------------------------------------------------


def single_station_counterpart(model: RumorModel) -> RumorModel:
    """Equivalent one-type model for independently placed station types."""
    L, P = model.explicit_sites, model.period
    sites = range(L + P)
    if all(model.station_law(y).type_count == 1 for y in sites):
        return model
    laws, radii = [], []
    for y in sites:
        law = model.station_law(y)
        if not isinstance(law, IndepDiffusion):
            raise NotReducible(f"site {y}: station law {type(law).__name__} does not place types independently")
        comps = tuple((p, r) for p, r in zip(law.row, model.radius_laws(y)) if p > 0)
        radii.append((MixtureRadius(comps),))
        laws.append(IndepDiffusion(law.total_law, (1.0,)))
    return RumorModel(model.kind, SiteRule(tuple(laws[:L]), tuple(laws[L:])),
                      SiteRule(tuple(radii[:L]), tuple(radii[L:])))


@dataclass
class TransferResult:
    kind: str  # "TransferSurvival" | "TransferExtinction" | "NotApplicable"
    assumption: int | None = None
    delta: float | None = None
    T: int | None = None
    chain_margin: float | None = None
    order: dict | None = None
    upper_status: str | None = None
    lower_status: str | None = None
    reason: str = ""

    def to_dict(self):
        return {"kind": self.kind, "assumption": self.assumption, "delta": self.delta, "T": self.T,
                "chain_margin": self.chain_margin, "order": self.order, "upper_status": self.upper_status,
                "lower_status": self.lower_status, "reason": self.reason}


def _radius_eventually_below(up: RadiusLaw, low: RadiusLaw):
    """Smallest T0 from which cdf_up(t) <= cdf_low(t) is certain, or None."""
    if up == low:
        return 1
    if isinstance(up, ParetoRadius) and isinstance(low, ParetoRadius):
        return 1 if up.lam0 <= low.lam0 else None
    if isinstance(up, GeometricRadius) and isinstance(low, GeometricRadius):
        return 1 if up.ratio >= low.ratio else None
    if isinstance(up, FiniteRadius) and isinstance(low, FiniteRadius):
        return max(len(up.tails), len(low.tails)) + 1
    return None


def _status(model: RumorModel, horizon: int) -> str:
    """Survives / Dies / Undecided from the model's own criteria."""
    if model.kind == FIREWORK:
        v = firework_homog_series(model, horizon) if model.is_homogeneous else firework_hetero_series(model, horizon)
        return v.classification
    if model.is_homogeneous:
        return {"SurvivesAS": "Survives"}.get(reverse_homog_W(model, horizon).classification, "Dies")
    c = reverse_hetero_checks(model, horizon).classification
    return "Survives" if c == "SurvivesAS" else "Undecided"


def germ_rumor_transfer(upper: RumorModel, lower: RumorModel, order: OrderVerdict | None = None,
                        T: int | None = None, t_max: int = 2000, grid: GridSpec = GridSpec(),
                        upper_status: str | None = None, lower_status: str | None = None,
                        horizon: int = 2000) -> TransferResult:
    """Transfer survival up, or extinction down, along upper >= lower.

    Needs a certified pgf order with r_up(t) <= r_low(t) for t >= T, or a
    certified germ order with delta and max(r_up(t), delta) <= r_low(t) for
    t >= T.  Survival of ``lower`` then gives survival of ``upper``, and
    extinction of ``upper`` gives extinction of ``lower`` (homogeneous models
    only for the reverse process).  ``*_status`` override the models' own
    verdicts, which chains transfers.
    """
    if upper.kind != lower.kind:
        raise PreconditionViolated("both models must be of the same kind")
    L = max(upper.explicit_sites, lower.explicit_sites)
    P = math.lcm(upper.period, lower.period)
    sites = list(range(L + P))
    if order is None:
        pair = FamilyPair(tuple(upper.station_law(y) for y in sites), tuple(lower.station_law(y) for y in sites))
        order = check_pgf_order(pair, grid)
        if not (order.kind == PGF and order.certified):
            order = find_germ_delta(pair, grid)
    if order.kind == PGF and order.certified:
        assumption, delta = 2, 0.0
    elif order.kind == GERM and order.certified:
        assumption, delta = 1, float(order.certified_delta if order.certified_delta is not None else order.delta)
    else:
        return TransferResult("NotApplicable", order=order.to_dict(), reason="no certified pgf or germ order")

    # smallest T such that max(r_up(t), delta) <= r_low(t) for all integer t >= T
    t_grid = np.arange(1, t_max + 1)
    T_need = 1
    for y in sites:
        for x, (ru, rl) in enumerate(zip(upper.radius_laws(y), lower.radius_laws(y))):
            t0 = _radius_eventually_below(ru, rl)
            if t0 is None:
                return TransferResult("NotApplicable", assumption, delta, order=order.to_dict(),
                                      reason=f"radius comparison not certified at site class {y}, type {x}")
            low = np.asarray(rl.cdf(t_grid))
            ok = (np.asarray(ru.cdf(t_grid)) <= low + 1e-15) & (low >= delta)
            bad = np.nonzero(~ok[t0 - 1:])[0] if t0 <= t_max else np.array([])
            if t0 > t_max or (bad.size and bad[-1] + t0 == t_max):
                return TransferResult("NotApplicable", assumption, delta, order=order.to_dict(),
                                      reason="radius comparison does not settle within t_max")
            need = t0 if not bad.size else int(t0 + bad[-1] + 1)
            T_need = max(T_need, need)
    if T is not None and T < T_need:
        return TransferResult("NotApplicable", assumption, delta, T, order=order.to_dict(),
                              reason=f"radius comparison fails below T = {T_need}")
    T = T_need if T is None else T

    # G_up(r_up(t)) <= G_up(r_low(t)) <= G_low(r_low(t)) for t >= T
    ts = np.arange(T, t_max + 1)
    margin = math.inf
    for y in sites:
        zu, zl = upper.radius_vector(y, ts), lower.radius_vector(y, ts)
        a = upper.station_law(y).genfun(zu)
        b = upper.station_law(y).genfun(zl)
        c = lower.station_law(y).genfun(zl)
        margin = min(margin, float(np.min(b - a)), float(np.min(c - b)))
    if margin < -1e-12:
        return TransferResult("NotApplicable", assumption, delta, T, margin, order.to_dict(),
                              reason="generating function chain fails on the grid")

    lo = lower_status or _status(lower, horizon)
    res = dict(assumption=assumption, delta=delta, T=T, chain_margin=margin, order=order.to_dict(),
               lower_status=lo)
    if lo == "Survives":
        return TransferResult("TransferSurvival", upper_status=upper_status, **res)
    up = upper_status or _status(upper, horizon)
    res["upper_status"] = up
    homog = upper.is_homogeneous and lower.is_homogeneous
    if up == "Dies" and (upper.kind == FIREWORK or homog):
        return TransferResult("TransferExtinction", **res)
    return TransferResult("NotApplicable", reason="no survival verdict below and no extinction verdict above", **res)


# ---------------------------------------------------------------------------
# simulation and exact reach probabilities
# ---------------------------------------------------------------------------


@dataclass
class RumorSimResult:
    frequency: float
    stderr: float
    reps: int
    mode: str
    depths: np.ndarray
    environment: np.ndarray | None = None

    def to_dict(self):
        return {"frequency": self.frequency, "stderr": self.stderr, "reps": self.reps, "mode": self.mode,
                "mean_depth": float(self.depths.mean()) if self.depths.size else 0.0}


def environment_csv(env: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["site", "type", "count"])
    for y, row in enumerate(env):
        for x, c in enumerate(row):
            w.writerow([y, x, int(c)])
    return buf.getvalue()


def sample_environment(model: RumorModel, sites: int, rng, condition_root: bool = True,
                       max_attempts: int = 10_000) -> np.ndarray:
    """Station counts (sites, X); with condition_root, redrawn until site 0 has a station."""
    for _ in range(max_attempts):
        env = np.vstack([model.station_law(y).sample(rng) for y in range(sites)])
        if not condition_root or env[0].sum() > 0:
            return env
    raise PreconditionViolated("could not draw an environment with a station at the root")


def _max_radii(model: RumorModel, counts: np.ndarray, rng, cap: int) -> np.ndarray:
    """counts (reps, sites, X) -> maximal radius per (rep, site)."""
    reps, sites, X = counts.shape
    out = np.zeros((reps, sites), dtype=np.int64)
    for y in range(sites):
        for x, r in enumerate(model.radius_laws(y)):
            out[:, y] = np.maximum(out[:, y], r.sample_max(counts[:, y, x], rng, cap))
    return out


def _firework_reach(radius: np.ndarray, has_root: np.ndarray, N: int):
    idx = np.arange(radius.shape[1])
    front = np.maximum.accumulate(idx + radius, axis=1)[:, :N]
    stuck = front < idx[:N] + 1
    reached = ~stuck.any(axis=1) & has_root
    depth = np.where(stuck.any(axis=1), np.argmax(stuck, axis=1), N)
    return reached, np.where(has_root, np.minimum(depth, N), 0)


def _reverse_reach(radius: np.ndarray, has_root: np.ndarray, N: int):
    reps, S = radius.shape
    idx = np.arange(S)
    active = np.zeros((reps, S), dtype=bool)
    active[:, 0] = has_root
    while True:
        left = np.maximum.accumulate(np.where(active, idx, -10 * S), axis=1)
        right = np.minimum.accumulate(np.where(active, idx, 10 * S)[:, ::-1], axis=1)[:, ::-1]
        dist = np.minimum(idx - left, right - idx)
        new = active | (dist <= radius)
        if np.array_equal(new, active):
            break
        active = new
    depth = np.where(active.any(axis=1), S - 1 - np.argmax(active[:, ::-1], axis=1), 0)
    return active[:, N], depth


def simulate_rumor(model: RumorModel, N: int, reps: int, rng, mode: str = "annealed",
                   environment: np.ndarray | None = None, env_rng=None) -> RumorSimResult:
    """Frequency of runs in which site N gets informed, on the sites 0..N.

    Annealed runs draw stations and radii afresh; a run without a station at
    0 never starts.  Quenched runs share one environment with a station at 0
    (drawn from ``env_rng`` unless given) and redraw only the radii.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    sites = N + 1
    X = model.type_count
    if mode == "annealed":
        counts = np.zeros((reps, sites, X), dtype=np.int64)
        for y in range(sites):
            counts[:, y, :] = model.station_law(y).sample(rng, reps)
        env = None
    elif mode == "quenched":
        env = environment if environment is not None else sample_environment(model, sites, env_rng or rng)
        env = np.asarray(env, dtype=np.int64)[:sites]
        counts = np.broadcast_to(env, (reps, sites, X))
    else:
        raise ValueError("mode must be 'annealed' or 'quenched'")
    radius = _max_radii(model, counts, rng, cap=N + 1)
    has_root = counts[:, 0, :].sum(axis=1) > 0
    reach = _firework_reach if model.kind == FIREWORK else _reverse_reach
    reached, depth = reach(radius, has_root, N)
    f = float(reached.mean())
    return RumorSimResult(f, float(np.sqrt(f * (1 - f) / reps)), reps, mode, depth, env)


def reach_probability_dp(model: RumorModel, N: int, environment: np.ndarray | None = None,
                         condition_root: bool = False) -> float:
    """Exact probability that the firework informs site N.

    Dynamic program over the rightmost informed site: processing site y
    replaces the frontier m by max(m, y + R_y), and the run stops when the
    frontier equals y.  With an environment the per-site laws are quenched,
    prod_x r_{x,y}(t)^{f_y(x)}; otherwise they are G_y(r_y(t)).
    """
    if model.kind != FIREWORK:
        raise PreconditionViolated("the frontier recursion describes the firework process")
    mass = np.zeros(N + 1)
    mass[0] = 1.0
    k = np.arange(N + 1)
    for y in range(N):
        # H[k] = P(R_y <= k) = P(R_y < k + 1)
        z = model.radius_vector(y, k + 1.0)
        if environment is None:
            H = np.asarray(model.station_law(y).genfun(z))
        else:
            H = np.prod(z ** np.asarray(environment[y])[None, :], axis=1)
        F = np.cumsum(mass)
        m = np.arange(N + 1)
        Hm = np.where(m >= y, H[np.clip(m - y, 0, N)], 0.0)
        Hm[N] = 1.0  # frontier capped at N
        Fn = F * Hm
        mass = np.diff(Fn, prepend=0.0)
        mass[: y + 1] = 0.0
        mass = np.maximum(mass, 0.0)
    p = float(mass.sum())
    if condition_root and environment is None:
        p /= 1.0 - model.station_law(0).genfun(np.zeros(model.type_count))
    return p
