"""Certified convergence and divergence of positive series.

Partial sums alone never decide a series here.  A verdict needs a closed
form, a comparison series, or a Kummer certificate: a positive sequence B_n
with B_n a_n / a_{n+1} - B_{n+1} >= alpha > 0 for all n >= N proves
convergence, with tail bound sum_{i > N} a_i <= B_N a_N / alpha, and
B_n a_n / a_{n+1} <= B_{n+1} together with sum 1/B_n = infinity proves
divergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

N_SYM = sp.Symbol("n", integer=True, nonnegative=True)

CONVERGES = "Converges"
DIVERGES = "Diverges"
UNDECIDED = "Undecided"

CERT_CONV = "ConvergenceCertified"
CERT_DIV = "DivergenceCertified"
FAILED = "Failed"


@dataclass
class SeriesVerdict:
    kind: str
    method: str  # "ClosedForm" | "KummerCertificate" | "ComparisonSeries" | "TruncationOnly"
    partial_sums: list = field(default_factory=list)  # [(N, S_N)]
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind in (CONVERGES, DIVERGES) and self.method == "TruncationOnly":
            raise ValueError("a truncated sum cannot decide a series")

    def to_dict(self):
        return {"kind": self.kind, "method": self.method,
                "partial_sums": [[int(n), float(s)] for n, s in self.partial_sums],
                "detail": self.detail}


def sampled_partial_sums(terms: np.ndarray, start: int = 0) -> list:
    """Partial sums at powers of ten and at the last index."""
    cs = np.cumsum(terms)
    marks = [10**k for k in range(1, 12) if 10**k <= len(terms)]
    idx = sorted(set(marks + [len(terms)]))
    return [(start + i - 1, float(cs[i - 1])) for i in idx]


@dataclass
class KummerResult:
    kind: str  # CERT_CONV | CERT_DIV | FAILED
    failed_at: int | None = None
    tail_bound: float | None = None
    horizon_tail_bound: float | None = None
    checked_to: int = 0
    reason: str = ""

    def to_dict(self):
        return {"kind": self.kind, "failed_at": self.failed_at, "tail_bound": self.tail_bound,
                "horizon_tail_bound": self.horizon_tail_bound, "checked_to": self.checked_to,
                "reason": self.reason}


def _as_expr(rule):
    if isinstance(rule, sp.Basic):
        return rule
    if isinstance(rule, (int, float)):
        return sp.nsimplify(rule)
    return None


def _evaluate(rule, n: np.ndarray) -> np.ndarray:
    expr = _as_expr(rule)
    if expr is not None:
        f = sp.lambdify(N_SYM, expr, "numpy")
        return np.broadcast_to(np.asarray(f(n), dtype=float), n.shape).copy()
    return np.asarray(rule(n), dtype=float)


def nonnegative_from(expr, start: int) -> bool:
    """Prove expr(n) >= 0 for every integer n >= start, for rational functions.

    Substitutes n = start + m and accepts when numerator and denominator have
    coefficients of one sign each (so the sign is constant for m >= 0).
    """
    m = sp.Symbol("m", nonnegative=True)
    rat = sp.cancel(sp.together(sp.powsimp(sp.sympify(expr), force=True).subs(N_SYM, start + m)))
    num, den = sp.fraction(rat)
    try:
        pn, pd = sp.Poly(sp.expand(num), m), sp.Poly(sp.expand(den), m)
    except sp.PolynomialError:
        return False
    cn = [float(c) for c in pn.all_coeffs()]
    cd = [float(c) for c in pd.all_coeffs()]
    if not all(np.isfinite(cn + cd)):
        return False
    if all(c >= 0 for c in cd) and any(c > 0 for c in cd):
        return all(c >= 0 for c in cn)
    if all(c <= 0 for c in cd) and any(c < 0 for c in cd):
        return all(c <= 0 for c in cn)
    return False


def reciprocal_diverges(b_expr, start: int) -> bool:
    """sum_{n >= start} 1/B_n = infinity for a rational B, positive from start."""
    inv = sp.cancel(sp.together(1 / sp.sympify(b_expr)))
    num, den = sp.fraction(inv)
    try:
        dn = sp.Poly(num, N_SYM).degree()
        dd = sp.Poly(den, N_SYM).degree()
    except sp.PolynomialError:
        return False
    return dd - dn <= 1


def tail_sum(expr, start: int):
    """Exact value of sum_{i >= start} a_i as a float, or None."""
    try:
        val = sp.summation(expr, (N_SYM, start, sp.oo))
    except Exception:  # sympy raises a zoo of errors on hard sums
        return None
    if val.has(sp.Sum):
        return None
    if val in (sp.oo, sp.zoo, sp.nan):
        return float("inf")
    try:
        return float(sp.N(val, 30))
    except TypeError:
        return None


def kummer_certificate(terms, B, alpha: float = 1.0, N: int = 0, horizon: int = 10_000) -> KummerResult:
    """Kummer test for sum a_n with a_n = terms(n) > 0 on [N, horizon].

    ``terms`` is a sympy expression in ``N_SYM`` or a vectorized callable.
    ``B`` is either an explicit positive sequence (sympy expression or
    callable) or a number B_N that starts the recursion
    B_{n+1} = B_n a_n / a_{n+1} - alpha.

    Convergence needs the inequality (or recursion positivity) up to the
    horizon *and* a proof that it persists forever, which is available for
    rational expressions only.  Divergence is tried when convergence fails
    and an explicit B is given.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n = np.arange(N, horizon + 2)
    a = _evaluate(terms, n)
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        bad = int(n[np.argmax(~(a > 0) | ~np.isfinite(a))])
        return KummerResult(FAILED, failed_at=bad, checked_to=horizon, reason="terms must be positive")
    ratio = a[:-1] / a[1:]
    a_expr, b_expr = _as_expr(terms), None
    if isinstance(B, (int, float)) and not isinstance(B, bool):
        return _kummer_recursion(a, ratio, float(B), alpha, N, horizon, a_expr)
    b_expr = _as_expr(B)
    b = _evaluate(B, n)
    if np.any(b[:-1] <= 0):
        return KummerResult(FAILED, failed_at=int(n[np.argmax(b <= 0)]), checked_to=horizon,
                            reason="B must be positive")
    gap = b[:-1] * ratio - b[1:] - alpha
    conv_ok = bool(np.all(gap >= -1e-12 * np.maximum(1.0, np.abs(b[1:]))))
    symbolic = a_expr is not None and b_expr is not None
    if conv_ok:
        forever = symbolic and nonnegative_from(
            b_expr * a_expr / a_expr.subs(N_SYM, N_SYM + 1) - b_expr.subs(N_SYM, N_SYM + 1) - alpha, N
        ) and nonnegative_from(b_expr, N)
        if forever:
            return KummerResult(CERT_CONV, tail_bound=float(b[0] * a[0] / alpha),
                                horizon_tail_bound=float(b[-2] * a[-2] / alpha), checked_to=horizon,
                                reason="inequality holds for all n >= N")
        return KummerResult(FAILED, checked_to=horizon, reason="inequality not provable beyond the horizon")
    failed_at = int(n[np.argmax(gap < -1e-12 * np.maximum(1.0, np.abs(b[1:])))])
    # divergence side
    div_gap = b[1:] - b[:-1] * ratio
    if symbolic and np.all(div_gap >= -1e-12 * np.maximum(1.0, np.abs(b[1:]))):
        expr = b_expr.subs(N_SYM, N_SYM + 1) - b_expr * a_expr / a_expr.subs(N_SYM, N_SYM + 1)
        if nonnegative_from(expr, N) and nonnegative_from(b_expr, N) and reciprocal_diverges(b_expr, N):
            return KummerResult(CERT_DIV, failed_at=failed_at, checked_to=horizon,
                                reason="B_n a_n/a_{n+1} <= B_{n+1} and sum 1/B_n diverges")
    return KummerResult(FAILED, failed_at=failed_at, checked_to=horizon,
                        reason="convergence inequality fails")


def _kummer_recursion(a, ratio, b0, alpha, N, horizon, a_expr) -> KummerResult:
    b = np.empty(len(ratio) + 1)
    b[0] = b0
    for k in range(len(ratio)):
        b[k + 1] = b[k] * ratio[k] - alpha
        if b[k + 1] <= 0:
            return KummerResult(FAILED, failed_at=N + k + 1, checked_to=horizon,
                                reason="recursion left the positive reals")
    # B_{n+1} > 0 for all n iff alpha * sum_{i > N} a_i <= B_N a_N
    if a_expr is None:
        return KummerResult(FAILED, checked_to=horizon, reason="positivity beyond the horizon not provable")
    rest = tail_sum(a_expr, N + 1)
    if rest is None or not np.isfinite(rest) or alpha * rest > b0 * a[0]:
        return KummerResult(FAILED, checked_to=horizon, reason="tail sum exceeds B_N a_N / alpha")
    return KummerResult(CERT_CONV, tail_bound=float(b0 * a[0] / alpha),
                        horizon_tail_bound=float(b[-2] * a[-2] / alpha), checked_to=horizon,
                        reason="recursion positive for all n >= N")


def kummer_verdict(terms, B, alpha: float = 1.0, N: int = 0, horizon: int = 10_000) -> SeriesVerdict:
    """Series verdict backed by a Kummer certificate (Undecided when none applies)."""
    res = kummer_certificate(terms, B, alpha, N, horizon)
    vals = _evaluate(terms, np.arange(N, horizon + 1))
    sums = sampled_partial_sums(vals, N)
    kind = {CERT_CONV: CONVERGES, CERT_DIV: DIVERGES}.get(res.kind, UNDECIDED)
    method = "KummerCertificate" if kind != UNDECIDED else "TruncationOnly"
    return SeriesVerdict(kind, method, sums, {"kummer": res.to_dict(), "alpha": alpha, "N": N})
