"""Registry of named worked examples with runnable reproductions.

Every parameter carries a provenance tag: "given" when the example fixes the
value, "chosen" when the example only constrains it and a concrete value was
picked to make it runnable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bpve import (
    BpveModel,
    ParamSeq,
    check_zero_one_survival,
    germ_compare_bpve,
    simulate_bpve,
    survival_binary,
)
from .brw import (
    BrwModel,
    alive_frequency,
    extinction_vector,
    fbrw_survival,
    germ_transfer_bound,
)
from .distributions import (
    AllToOne,
    Balanced,
    FiniteSupport,
    IndepDiffusion,
    MixedPoisson,
    Poisson,
    make_rng,
)
from .errors import NotFound
from .orders import FamilyPair, GridSpec, check_pgf_order, find_germ_delta, uniform_mixture_delta, mixed_poisson_germ, pgf_failure_threshold
from .rumor import (
    FIREWORK,
    ParetoRadius,
    RumorModel,
    effective_lambda0,
    environment_csv,
    germ_rumor_transfer,
    reach_probability_dp,
    simulate_rumor,
    single_station_counterpart,
)


@dataclass(frozen=True)
class RunOptions:
    seed: int = 0
    reps: int | None = None
    horizon: int | None = None


@dataclass
class ExampleOutput:
    verdicts: list = field(default_factory=list)
    monte_carlo: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # file name -> CSV text


@dataclass(frozen=True)
class NamedExample:
    name: str
    summary: str
    params: dict  # name -> {"value": ..., "provenance": "given" | "chosen"}
    defaults: dict  # default reps / horizon
    run: Callable[["NamedExample", RunOptions], ExampleOutput]

    def value(self, key):
        return self.params[key]["value"]

    def to_dict(self):
        return {"name": self.name, "summary": self.summary, "params": self.params, "defaults": self.defaults}


def verdict(name: str, kind, method: str, params: dict | None = None, evidence: dict | None = None) -> dict:
    return {"name": name, "kind": kind, "method": method, "params": params or {}, "evidence": evidence or {}}


def _given(v):
    return {"value": v, "provenance": "given"}


def _chosen(v):
    return {"value": v, "provenance": "chosen"}


def _mix_law(lam, eps, alpha):
    return MixedPoisson(((alpha, lam - eps), (1 - alpha, lam + eps)))


def _indep(total, row=(1.0,)):
    return IndepDiffusion(total, row)


def _opt(opts: RunOptions, ex: NamedExample, key: str):
    v = getattr(opts, key)
    return ex.defaults[key] if v is None else v


# ---------------------------------------------------------------------------
# order examples
# ---------------------------------------------------------------------------


def _run_mix(ex, opts):
    lam, eps, alpha = ex.value("lambda"), ex.value("epsilon"), ex.value("alpha")
    mu, nu = _mix_law(lam, eps, alpha), Poisson(lam)
    pair = FamilyPair((_indep(mu),), (_indep(nu),))
    germ = find_germ_delta(pair)
    pgf = check_pgf_order(pair)
    d = germ.certified_delta
    out = ExampleOutput()
    out.verdicts.append(verdict("germ order mu >= nu", germ.kind, germ.method, {"grid": 64}, germ.to_dict()))
    out.verdicts.append(verdict("mixed Poisson rate condition", mixed_poisson_germ(mu, nu, d), "ClosedForm",
                                {"delta": d}, {"lhs": sum(a * r * math.exp((d - 1) * r) for a, r in zip(mu.weights, mu.rates)),
                                               "rhs": lam}))
    out.verdicts.append(verdict("pgf order mu >= nu", pgf.kind, pgf.method, {}, pgf.to_dict()))
    thr = pgf_failure_threshold(eps)
    out.verdicts.append(verdict("weight above pgf failure threshold", alpha > thr, "ClosedForm",
                                {"threshold": thr}, {"pgf_mu_at_0": mu.pgf(0.0), "pgf_nu_at_0": nu.pgf(0.0)}))
    return out


MIX2_RATES = (1.3, 2.1, 1.6, 2.4)
MIX2_ALPHAS = (0.1, 0.3, 0.45, 0.2)


def _run_mix2(ex, opts):
    eps, big_m = ex.value("epsilon"), ex.value("M")
    rates, alphas = ex.value("lambda_y"), ex.value("alpha_y")
    mu = tuple(_indep(_mix_law(l, eps, a)) for l, a in zip(rates, alphas))
    nu = tuple(_indep(Poisson(l)) for l in rates)
    d = uniform_mixture_delta(eps, big_m, max(alphas))
    per_site = [mixed_poisson_germ(m.total(), n.total(), d + 1e-9) for m, n in zip(mu, nu)]
    germ = find_germ_delta(FamilyPair(mu, nu))
    # converse: weights above 1/2 reverse the comparison
    high = tuple(1 - a for a in alphas)
    mu_hi = tuple(_indep(_mix_law(l, eps, a)) for l, a in zip(rates, high))
    conv = find_germ_delta(FamilyPair(nu, mu_hi))
    out = ExampleOutput()
    out.verdicts.append(verdict("uniform delta bound", d, "ClosedForm", {"epsilon": eps, "M": big_m,
                                                                        "alpha_sup": max(alphas)}))
    out.verdicts.append(verdict("rate condition at every site", all(per_site), "ClosedForm",
                                {"delta": d + 1e-9}, {"per_site": per_site}))
    out.verdicts.append(verdict("germ order mu >= nu", germ.kind, germ.method, {}, germ.to_dict()))
    out.verdicts.append(verdict("germ order nu >= mu with weights above 1/2", conv.kind, conv.method,
                                {"alpha_y": list(high)}, conv.to_dict()))
    return out


def _run_nonind(ex, opts):
    lam, row = ex.value("lambda"), tuple(ex.value("row"))
    nu = _indep(Poisson(lam), row)
    if ex.name == "nonind1":
        mu = Balanced(Poisson(lam), row, ex.value("k"))
        pair, label = FamilyPair((mu,), (nu,)), "balanced >= independent"
    else:
        mu = AllToOne(Poisson(lam), row)
        pair, label = FamilyPair((nu,), (mu,)), "independent >= all-to-one"
    v = check_pgf_order(pair)
    out = ExampleOutput()
    out.verdicts.append(verdict(f"pgf order {label}", v.kind, v.method, {"points_per_axis": 64}, v.to_dict()))
    return out


# ---------------------------------------------------------------------------
# branching random walks
# ---------------------------------------------------------------------------


WALK_GRID = GridSpec(points_per_axis=20)  # four types: 20^4 points


def _cycle_rows(n):
    p = np.zeros((n, n))
    for x in range(n):
        p[x, (x + 1) % n] = p[x, (x - 1) % n] = 0.5
    return [tuple(r) for r in p]


def _run_fbrw(ex, opts):
    rows = _cycle_rows(ex.value("sites"))
    eps = ex.value("epsilon")
    out = ExampleOutput()
    for case, lam, alpha in (("survival", ex.value("lambda_survive"), ex.value("alpha_low")),
                             ("extinction", ex.value("lambda_die"), ex.value("alpha_high"))):
        nu = BrwModel(tuple(_indep(Poisson(lam), r) for r in rows))
        mu = BrwModel(tuple(_indep(_mix_law(lam, eps, alpha), r) for r in rows))
        fv = fbrw_survival(nu, [0] * len(rows))
        out.verdicts.append(verdict(f"{case}: comparison walk", fv.kind, "PerronRoot", {"lambda": lam},
                                    fv.to_dict()))
        if case == "survival":
            germ = find_germ_delta(FamilyPair(mu.laws, nu.laws), WALK_GRID)
            bound = germ_transfer_bound(extinction_vector(nu), germ.certified_delta)
            out.verdicts.append(verdict("survival: mu >= nu in germ order", germ.kind, germ.method, {},
                                        germ.to_dict()))
            out.verdicts.append(verdict("survival: extinction bound for mu", bool(np.all(bound < 1)),
                                        "GermTransfer", {"delta": germ.certified_delta},
                                        {"bound": bound.tolist()}))
            est = alive_frequency(mu, 0, _opt(opts, ex, "horizon"), _opt(opts, ex, "reps"),
                                  make_rng(opts.seed, 1), population_cap=10**4)
            out.monte_carlo.append({"name": "mu alive at horizon", "horizon": _opt(opts, ex, "horizon"),
                                    "seed": opts.seed, **est.to_dict(), "lower_bound": float(1 - bound[0])})
        else:
            germ = find_germ_delta(FamilyPair(nu.laws, mu.laws), WALK_GRID)
            out.verdicts.append(verdict("extinction: nu >= mu in germ order", germ.kind, germ.method, {},
                                        germ.to_dict()))
            dies = fv.kind == "Dies" and germ.certified
            out.verdicts.append(verdict("extinction: mu dies", dies, "GermTransfer", {}, {}))
    return out


def _run_fbrw2(ex, opts):
    rows = _cycle_rows(len(ex.value("lambda_hat")))
    eps, big_m = ex.value("epsilon"), ex.value("M")
    lam_hat, alphas = ex.value("lambda_hat"), ex.value("alpha_x")
    lam_min = min(lam_hat)
    mu = BrwModel(tuple(_indep(_mix_law(l, eps, a), r) for l, a, r in zip(lam_hat, alphas, rows)))
    nu = BrwModel(tuple(_indep(Poisson(lam_min), r) for r in rows))
    d = uniform_mixture_delta(eps, big_m, max(alphas)) + 1e-9
    per_site = [mixed_poisson_germ(m.total(), n.total(), d) for m, n in zip(mu.laws, nu.laws)]
    fv = fbrw_survival(nu, [0] * len(rows))
    q_nu = extinction_vector(nu)
    bound = germ_transfer_bound(q_nu, d)
    out = ExampleOutput()
    out.verdicts.append(verdict("comparison walk at the smallest rate", fv.kind, "PerronRoot",
                                {"lambda": lam_min}, fv.to_dict()))
    out.verdicts.append(verdict("rate condition at every site", all(per_site), "ClosedForm", {"delta": d},
                                {"per_site": per_site}))
    out.verdicts.append(verdict("extinction bound for mu", bool(np.all(bound < 1)), "GermTransfer",
                                {"delta": d}, {"q_nu": q_nu.q.tolist(), "bound": bound.tolist()}))
    est = alive_frequency(mu, 0, _opt(opts, ex, "horizon"), _opt(opts, ex, "reps"), make_rng(opts.seed, 1),
                          population_cap=10**4)
    out.monte_carlo.append({"name": "mu alive at horizon", "horizon": _opt(opts, ex, "horizon"),
                            "seed": opts.seed, **est.to_dict(), "lower_bound": float(1 - bound[0])})
    return out


# ---------------------------------------------------------------------------
# varying environment
# ---------------------------------------------------------------------------


BPVE0_SEQ = ParamSeq("power", limit=1.0, coef=1.0, shift=2.0, power=2.0)


def _run_bpve0(ex, opts):
    sb = survival_binary(BPVE0_SEQ)
    h, reps = _opt(opts, ex, "horizon"), _opt(opts, ex, "reps")
    est = simulate_bpve(BpveModel.bernoulli(BPVE0_SEQ), h, reps, make_rng(opts.seed, 1))
    out = ExampleOutput()
    out.verdicts.append(verdict("survival of the Bernoulli process", sb.kind, sb.method,
                                {"a_n": BPVE0_SEQ.to_dict()}, sb.to_dict()))
    out.monte_carlo.append({"name": "alive at horizon", "horizon": h, "seed": opts.seed, **est.to_dict(),
                            "finite_horizon_product": float(np.prod(BPVE0_SEQ(np.arange(h))))})
    return out


def _run_bpve1(ex, opts):
    law = FiniteSupport(tuple(ex.value("rho")))
    mu = BpveModel.constant(law)
    nu = BpveModel.bernoulli(BPVE0_SEQ)
    crit = check_zero_one_survival(mu)
    cmp = germ_compare_bpve(mu, nu, ex.value("delta"))
    h, reps = _opt(opts, ex, "horizon"), _opt(opts, ex, "reps")
    est = simulate_bpve(mu, h, reps, make_rng(opts.seed, 1), cap=10**4)
    out = ExampleOutput()
    out.verdicts.append(verdict("limsup criterion", crit.kind, crit.method, {}, crit.to_dict()))
    out.verdicts.append(verdict("germ comparison with the Bernoulli process", cmp.holds, "GridAndTailEnvelope",
                                {"delta": ex.value("delta")}, cmp.to_dict()))
    ext = float(extinction_vector(BrwModel((_indep(law),))).q[0])
    out.monte_carlo.append({"name": "alive at horizon", "horizon": h, "seed": opts.seed, **est.to_dict(),
                            "survival_probability": 1 - ext})
    return out


# ---------------------------------------------------------------------------
# rumor processes
# ---------------------------------------------------------------------------


def _firework(law, radii):
    return RumorModel.homogeneous(FIREWORK, law, radii)


def _run_fireworkmixedpoisson1(ex, opts):
    lam, eps, alpha, lam0 = (ex.value(k) for k in ("lambda", "epsilon", "alpha", "lambda0"))
    mu = _firework(_indep(_mix_law(lam, eps, alpha)), ParetoRadius(lam0))
    nu = _firework(_indep(Poisson(lam)), ParetoRadius(lam0))
    tr = germ_rumor_transfer(mu, nu)
    n, reps = _opt(opts, ex, "horizon"), _opt(opts, ex, "reps")
    sim = simulate_rumor(mu, n, reps, make_rng(opts.seed, 1), mode="quenched", env_rng=make_rng(opts.seed, 2))
    dp = reach_probability_dp(mu, n, sim.environment)
    out = ExampleOutput()
    out.verdicts.append(verdict("mu survives by transfer", tr.kind, "GermTransfer", {}, tr.to_dict()))
    out.monte_carlo.append({"name": "quenched reach", "N": n, "seed": opts.seed, **sim.to_dict(),
                            "exact_given_environment": dp})
    out.tables["environment.csv"] = environment_csv(sim.environment)
    return out


def _run_nonid(ex, opts):
    beta, l10, l20 = ex.value("beta"), ex.value("lambda10"), ex.value("lambda20")
    row, radii = (beta, 1 - beta), (ParetoRadius(l10), ParetoRadius(l20))
    out = ExampleOutput()
    lam_eff = effective_lambda0(single_station_counterpart(
        _firework(_indep(Poisson(1.0), row), radii)).radius_laws(0)[0])
    out.verdicts.append(verdict("effective lambda0", lam_eff, "ClosedForm",
                                {"formula": "1 / (beta / lambda10 + (1 - beta) / lambda20)"}))
    n = _opt(opts, ex, "horizon")
    lo, hi = ex.value("lambda_low"), ex.value("lambda_high")
    nu_lo = _firework(_indep(Poisson(lo), row), radii)
    mu2 = _firework(AllToOne(Poisson(lo), row), radii)
    down = germ_rumor_transfer(nu_lo, mu2)
    out.verdicts.append(verdict("all-to-one model dies", down.kind, "GermTransfer", {"lambda": lo},
                                down.to_dict()))
    nu_hi = _firework(_indep(Poisson(hi), row), radii)
    mu1 = _firework(Balanced(Poisson(hi), row, 2), radii)
    up = germ_rumor_transfer(mu1, nu_hi)
    out.verdicts.append(verdict("balanced model survives", up.kind, "GermTransfer", {"lambda": hi},
                                up.to_dict()))
    for name, m in (("all-to-one", mu2), ("balanced", mu1)):
        out.monte_carlo.append({"name": f"{name} annealed reach (exact)", "N": n,
                                "probability": reach_probability_dp(m, n, condition_root=True)})
    return out


def _run_nonidmp(ex, opts):
    l1, l2, alpha, lam = ex.value("lambda1"), ex.value("lambda2"), ex.value("alpha"), ex.value("lambda_bar")
    beta = ex.value("beta")
    row, radii = (beta, 1 - beta), (ParetoRadius(ex.value("lambda10")), ParetoRadius(ex.value("lambda20")))
    total = MixedPoisson(((alpha, l1), (1 - alpha, l2)))
    bar = _firework(_indep(Poisson(lam), row), radii)
    nu = _firework(_indep(total, row), radii)
    mu2 = _firework(AllToOne(total, row), radii)
    first = germ_rumor_transfer(bar, nu)
    second = germ_rumor_transfer(nu, mu2, upper_status="Dies" if first.kind == "TransferExtinction" else None)
    out = ExampleOutput()
    out.verdicts.append(verdict("weight condition", alpha > (l2 - lam) / (l2 - l1), "ClosedForm",
                                {"threshold": (l2 - lam) / (l2 - l1)}))
    out.verdicts.append(verdict("independent mixed model dies", first.kind, "GermTransfer", {}, first.to_dict()))
    out.verdicts.append(verdict("all-to-one mixed model dies", second.kind, "GermTransfer", {},
                                second.to_dict()))
    return out


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

_EXAMPLES = [
    NamedExample("mix", "Mixed Poisson above a fixed-rate Poisson in germ order but not in pgf order",
                 {"lambda": _given(2.0), "epsilon": _given(1.0), "alpha": _given(0.4)}, {}, _run_mix),
    NamedExample("mix2", "Site-dependent mixed Poisson families with a uniform germ threshold",
                 {"epsilon": _chosen(0.4), "M": _chosen(3.0), "lambda_y": _chosen(list(MIX2_RATES)),
                  "alpha_y": _chosen(list(MIX2_ALPHAS))}, {}, _run_mix2),
    NamedExample("nonind1", "Balanced placement is pgf-above independent placement",
                 {"lambda": _chosen(2.0), "row": _given([1 / 3, 1 / 3, 1 / 3]), "k": _given(3)}, {},
                 _run_nonind),
    NamedExample("nonind2", "Independent placement is pgf-above all-to-one placement",
                 {"lambda": _chosen(2.0), "row": _chosen([0.25, 0.75])}, {}, _run_nonind),
    NamedExample("fbrw", "Mixed Poisson BRW on a cycle compared with a projectable Poisson BRW",
                 {"sites": _chosen(4), "epsilon": _chosen(0.5), "lambda_survive": _chosen(1.5),
                  "alpha_low": _chosen(0.3), "lambda_die": _chosen(0.9), "alpha_high": _chosen(0.7)},
                 {"reps": 4000, "horizon": 30}, _run_fbrw),
    NamedExample("fbrw2", "Site-dependent mixed Poisson BRW above the walk with the smallest rate",
                 {"epsilon": _chosen(0.4), "M": _chosen(3.0), "lambda_hat": _chosen(list(MIX2_RATES)),
                  "alpha_x": _chosen(list(MIX2_ALPHAS))}, {"reps": 4000, "horizon": 30}, _run_fbrw2),
    NamedExample("bpve0", "Bernoulli process with a_n = 1 - 1/(n+2)^2 survives with probability 1/2",
                 {"a_n": _given("1 - 1/(n+2)^2")}, {"reps": 100_000, "horizon": 1000}, _run_bpve0),
    NamedExample("bpve1", "Constant law with 2 rho(0) + rho(1) < 1 survives",
                 {"rho": _chosen([0.2, 0.0, 0.8]), "delta": _chosen(0.9)}, {"reps": 20_000, "horizon": 200},
                 _run_bpve1),
    NamedExample("fireworkmixedpoisson1", "Mixed Poisson firework survives by comparison with Poisson stations",
                 {"lambda": _given(1.5), "epsilon": _given(0.4), "alpha": _given(0.3), "lambda0": _given(1.0)},
                 {"reps": 10_000, "horizon": 200}, _run_fireworkmixedpoisson1),
    NamedExample("nonid", "Two station types with Pareto radii: all-to-one dies, balanced survives",
                 {"beta": _given(0.5), "lambda10": _given(0.5), "lambda20": _given(4.0),
                  "lambda_low": _given(0.7), "lambda_high": _given(1.2),
                  "lambda0": _given("1 / (beta / lambda10 + (1 - beta) / lambda20)")},
                 {"horizon": 200}, _run_nonid),
    NamedExample("nonidMP", "Mixed Poisson version of the two-type firework, extinction in two steps",
                 {"lambda1": _given(0.5), "lambda2": _given(2.0), "alpha": _given(0.85), "lambda_bar": _given(0.8),
                  "beta": _given(0.5), "lambda10": _given(0.5), "lambda20": _given(4.0)}, {}, _run_nonidmp),
]

CATALOGUE = {ex.name: ex for ex in _EXAMPLES}


def list_named_examples() -> list:
    return [ex.to_dict() for ex in _EXAMPLES]


def get_example(name: str) -> NamedExample:
    try:
        return CATALOGUE[name]
    except KeyError:
        raise NotFound(f"no named example {name!r}; known: {', '.join(CATALOGUE)}") from None


def run_example(name: str, opts: RunOptions = RunOptions()) -> ExampleOutput:
    ex = get_example(name)
    return ex.run(ex, opts)
