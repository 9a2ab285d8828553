import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from germorder.distributions import (
    AllToOne,
    Balanced,
    Explicit,
    FiniteSupport,
    IndepDiffusion,
    MixedPoisson,
    Poisson,
    make_rng,
)
from germorder.errors import GridBudgetExceeded, PreconditionViolated
from germorder.orders import (
    COUNTER,
    GERM,
    INCONCLUSIVE,
    PGF,
    FamilyPair,
    GridSpec,
    check_on_subgrid,
    check_pgf_order,
    find_germ_delta,
    germ_sufficient_factorial,
    germ_sufficient_mean,
    uniform_mixture_delta,
    mixed_poisson_germ,
    pgf_failure_threshold,
    totals_necessary_check,
)

ROW = (0.5, 0.5)


def indep(total, row=ROW):
    return IndepDiffusion(total, row)


def mix_law(lam, eps, alpha):
    return MixedPoisson(((alpha, lam - eps), (1 - alpha, lam + eps)))


def pair1(mu, nu):
    return FamilyPair((mu,), (nu,))


def test_reflexive_examples():
    law = indep(Poisson(2))
    assert check_pgf_order(pair1(law, law)).kind == PGF
    v = find_germ_delta(pair1(law, law))
    assert v.kind == GERM and v.delta == 0.0 and v.certified


def test_poisson_rates_pgf_ordered():
    v = check_pgf_order(pair1(indep(Poisson(3)), indep(Poisson(2))))
    assert v.kind == PGF and v.certified


def test_mix_counterexample_at_zero():
    v = check_pgf_order(pair1(indep(mix_law(2, 1, 0.4)), indep(Poisson(2))))
    assert v.kind == COUNTER
    assert v.witness["z"] == [0.0, 0.0]
    assert v.witness["g_mu"] == pytest.approx(0.4 * math.exp(-1) + 0.6 * math.exp(-3), abs=1e-12)
    assert v.witness["g_nu"] == pytest.approx(math.exp(-2), abs=1e-12)


def test_mix_germ_dominance():
    v = find_germ_delta(pair1(indep(mix_law(2, 1, 0.4)), indep(Poisson(2))))
    assert v.kind == GERM and v.delta < 1 and v.certified
    assert "mixed Poisson" in v.method


def test_reversed_mix_heavy_low_weight():
    # lambda_1 = 1 < 2, alpha = 0.7 > (3-2)/(3-1): the fixed rate dominates
    v = find_germ_delta(pair1(indep(Poisson(2)), indep(mix_law(2, 1, 0.7))))
    assert v.kind == GERM and v.delta < 1 and v.certified


def test_pgf_failure_threshold_value():
    # (1 - e^-1)/(e - e^-1)
    assert pgf_failure_threshold(1.0) == pytest.approx(0.268941, abs=1e-6)
    # below the threshold the mixture is pgf-above the fixed rate at z = 0
    low = indep(mix_law(2, 1, 0.2))
    assert low.genfun([0, 0]) < indep(Poisson(2)).genfun([0, 0])


def test_totals_necessary_examples():
    same = pair1(indep(Poisson(2)), indep(Poisson(2)))
    assert totals_necessary_check(same, 0.0)[0]
    assert totals_necessary_check(pair1(indep(Poisson(3)), indep(Poisson(2))), 0.0)[0]
    ok, wit = totals_necessary_check(pair1(indep(Poisson(1)), indep(Poisson(2))), 0.5)
    assert not ok and wit["t"] == "1-"


def test_germ_sufficient_mean_poisson():
    d = germ_sufficient_mean(Poisson(3), Poisson(2))
    assert d is not None and d < 1
    # independent oracle: E[U e^{-tU}] for Poisson(3) by truncated summation
    t = -math.log(d)
    val = sum(n * math.exp(-t * n) * math.exp(-3) * 3**n / math.factorial(n) for n in range(120))
    assert val >= 2 - 1e-9
    root = optimize.brentq(lambda s: 3 * s * math.exp(3 * (s - 1)) - 2, 0.0, 1.0, xtol=1e-14)
    assert d == pytest.approx(root, abs=1e-9)


def test_germ_sufficient_mean_none_and_mix():
    assert germ_sufficient_mean(Poisson(2), Poisson(2)) is None
    d = germ_sufficient_mean(MixedPoisson(((0.4, 1), (0.6, 3))), Poisson(2))
    assert d is not None and d < 1


def test_germ_sufficient_factorial_examples():
    assert germ_sufficient_factorial(Poisson(3), Poisson(2), 0, 0.99)
    assert not germ_sufficient_factorial(Poisson(2), Poisson(2), 0, 0.5)
    u = FiniteSupport.from_dict({2: 1.0})
    w = FiniteSupport.from_dict({0: 0.5, 2: 0.5})
    assert germ_sufficient_factorial(u, w, 0, 0.9)


def test_germ_sufficient_factorial_precondition():
    with pytest.raises(PreconditionViolated):
        germ_sufficient_factorial(Poisson(3), Poisson(2), 1, 0.9)


def test_germ_sufficient_factorial_odd_orientation():
    # equal means; W has the larger second factorial moment, so U >=germ W
    u = FiniteSupport.from_dict({1: 1.0})
    w = FiniteSupport.from_dict({0: 0.5, 2: 0.5})
    assert germ_sufficient_factorial(u, w, 1, 0.0)
    # the conclusion phi_U <= phi_W holds on the whole interval
    t = np.linspace(0, 1, 101)
    assert np.all(u.pgf(t) <= w.pgf(t) + 1e-15)
    assert not germ_sufficient_factorial(w, u, 1, 0.0)


def test_mixed_poisson_germ_examples():
    assert 3 * math.exp(-0.03) == pytest.approx(2.911, abs=1e-3)
    assert mixed_poisson_germ(3.0, 2.0, 0.99)
    assert not mixed_poisson_germ([(1.0, 2.0)], [(1.0, 2.0)], 0.9)


def test_mix2_family_delta_bound():
    eps, m = 0.5, 3.0
    rng = make_rng(11)
    lams = rng.uniform(eps + 1e-3, m, size=25)
    alphas = rng.uniform(0.05, 0.45, size=25)
    d = uniform_mixture_delta(eps, m, alphas.max()) + 1e-9
    assert d < 1
    for lam, a in zip(lams, alphas):
        assert mixed_poisson_germ(mix_law(lam, eps, a), Poisson(lam), d)


def test_mix2_multisite_pair():
    sites = [(1.0, 0.3), (2.0, 0.2), (2.8, 0.4)]
    mu = tuple(indep(mix_law(l, 0.5, a)) for l, a in sites)
    nu = tuple(indep(Poisson(l)) for l, _ in sites)
    v = find_germ_delta(FamilyPair(mu, nu))
    assert v.kind == GERM and v.certified
    assert len(v.per_site_delta) == 3 and v.delta == max(v.per_site_delta)


def test_structural_pairs_certified():
    nu = indep(Poisson(2))
    v = check_pgf_order(pair1(nu, AllToOne(Poisson(2), ROW)))
    assert v.kind == PGF and v.certified
    v = check_pgf_order(pair1(Balanced(Poisson(2), ROW, 2), nu))
    assert v.kind == PGF and v.certified
    # the reverse directions fail somewhere
    assert check_pgf_order(pair1(AllToOne(Poisson(2), ROW), nu)).kind == COUNTER


def test_grid_budget_guard():
    law = Explicit((((1, 1, 1, 1), 1.0),))
    with pytest.raises(GridBudgetExceeded):
        check_pgf_order(pair1(law, law), GridSpec(points_per_axis=64))


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(delta_ladder=(0.5, 0.2))
    with pytest.raises(ValueError):
        GridSpec(delta_ladder=(0.0, 1.0))


def test_counterexample_is_lexicographically_smallest():
    # violation region is z_1 < 0.5 for every z_2; smallest point is the origin
    mu = Explicit((((0, 0), 0.5), ((2, 0), 0.5)))
    nu = Explicit((((1, 0), 1.0),))
    v = check_pgf_order(pair1(mu, nu))
    assert v.kind == COUNTER and v.witness["z"] == [0.0, 0.0]


def test_near_tie_refinement_finds_violation_between_nodes():
    # phi_mu - phi_nu = 0.1 t (t - 1/2)(t - 1): zero on the 3-point grid, positive at 1/4
    nu = Explicit(tuple(((i,), 0.25) for i in range(4)))
    mu = Explicit((((0,), 0.25), ((1,), 0.3), ((2,), 0.1), ((3,), 0.35)))
    coarse = GridSpec(points_per_axis=3, delta_ladder=(0.0,))
    v = check_pgf_order(pair1(mu, nu), coarse)
    assert v.kind == COUNTER
    assert v.witness["z"] == [0.25]
    assert v.witness["g_mu"] - v.witness["g_nu"] == pytest.approx(0.1 * 0.25 * 0.25 * 0.75, abs=1e-12)


# ---- property suite -------------------------------------------------------

def random_total(rng):
    kind = rng.integers(4)
    if kind == 0:
        return Poisson(float(rng.uniform(0.2, 4)))
    if kind == 1:
        lam = float(rng.uniform(0.6, 4))
        eps = float(rng.uniform(0.05, 0.5))
        return mix_law(lam, eps, float(rng.uniform(0.05, 0.95)))
    if kind == 2:
        p = rng.dirichlet(np.ones(int(rng.integers(2, 6))))
        return FiniteSupport(tuple(p))
    from germorder.distributions import Geometric
    return Geometric(float(rng.uniform(0.2, 0.8)))


def random_indep_pair(rng):
    row = tuple(rng.dirichlet(np.ones(2)))
    sites = int(rng.integers(1, 3))
    mu = tuple(IndepDiffusion(random_total(rng), row) for _ in range(sites))
    nu = tuple(IndepDiffusion(random_total(rng), row) for _ in range(sites))
    return FamilyPair(mu, nu)


def axiom_violations(pair, grid):
    """All order-axiom checks for one pair; returns a list of failures."""
    bad = []
    if check_pgf_order(FamilyPair(pair.mu, pair.mu), grid).kind != PGF:
        bad.append("reflexivity (pgf)")
    r = find_germ_delta(FamilyPair(pair.mu, pair.mu), grid)
    if r.kind != GERM or r.delta != grid.delta_ladder[0]:
        bad.append("reflexivity (germ)")
    v = find_germ_delta(pair, grid)
    if v.kind == GERM:
        for d in grid.delta_ladder:
            if d > v.delta and check_on_subgrid(pair, d, grid) is not None:
                bad.append(f"delta monotonicity at {d}")
        for d in [v.delta] + ([v.certified_delta] if v.certified else []):
            if not totals_necessary_check(pair, d, grid)[0]:
                bad.append(f"totals check at {d}")
        p = check_pgf_order(pair, grid)
        if p.kind == PGF and v.delta != 0.0:
            bad.append("pgf without germ(0)")
    return bad, v


def test_order_axioms_random_battery():
    grid = GridSpec(points_per_axis=32)
    rng = make_rng(2024)
    for _ in range(40):
        pair = random_indep_pair(rng)
        bad, _ = axiom_violations(pair, grid)
        assert not bad, (pair, bad)


def test_transitivity_random_triples():
    grid = GridSpec(points_per_axis=32)
    rng = make_rng(77)
    seen = 0
    for _ in range(60):
        row = tuple(rng.dirichlet(np.ones(2)))
        laws = sorted((random_total(rng) for _ in range(3)), key=lambda l: -l.mean())
        a, b, c = (IndepDiffusion(l, row) for l in laws)
        v1 = find_germ_delta(pair1(a, b), grid)
        v2 = find_germ_delta(pair1(b, c), grid)
        if v1.kind == GERM and v2.kind == GERM:
            seen += 1
            d = max(v1.delta, v2.delta)
            loose = GridSpec(points_per_axis=32, tolerance=2 * grid.tolerance)
            assert check_on_subgrid(pair1(a, c), d, loose) is None
    assert seen >= 20


def dense_max_violation(mu, nu, n):
    """max over an n-by-n grid of G_mu - G_nu for two-type Explicit laws."""
    t = np.linspace(0, 1, n)
    A = [np.array([f for f, _ in law.atoms]) for law in (mu, nu)]
    P = np.concatenate([np.array([p for _, p in mu.atoms]), -np.array([p for _, p in nu.atoms])])
    F = np.concatenate(A)
    left = t[:, None] ** F[None, :, 0]
    right = t[:, None] ** F[None, :, 1]
    best = -np.inf
    for s in range(0, n, 500):
        block = (left[s : s + 500] * P) @ right.T
        best = max(best, float(block.max()))
    return best


def random_explicit(rng):
    k = int(rng.integers(1, 6))
    atoms = tuple((tuple(int(v) for v in rng.integers(0, 4, size=2)), float(p))
                  for p in rng.dirichlet(np.ones(k)))
    return Explicit(atoms)


def test_grid_agrees_with_dense_oracle():
    rng = make_rng(99)
    grid = GridSpec()
    for _ in range(6):
        mu, nu = random_explicit(rng), random_explicit(rng)
        dense = dense_max_violation(mu, nu, 10_000) > grid.tolerance
        verdict = check_pgf_order(pair1(mu, nu), grid)
        assert (verdict.kind == COUNTER) == dense


def test_grid_agrees_with_dense_oracle_one_type():
    rng = make_rng(5)
    grid = GridSpec()
    t = np.linspace(0, 1, 10_000)
    for _ in range(20):
        p = rng.dirichlet(np.ones(5))
        q = rng.dirichlet(np.ones(5))
        mu = Explicit(tuple(((i,), float(v)) for i, v in enumerate(p)))
        nu = Explicit(tuple(((i,), float(v)) for i, v in enumerate(q)))
        dense = np.max(np.polynomial.polynomial.polyval(t, p - q)) > grid.tolerance
        assert (check_pgf_order(pair1(mu, nu), grid).kind == COUNTER) == dense


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 5), st.floats(0.3, 5))
def test_poisson_pair_germ_iff_rate_order(l1, l2):
    v = find_germ_delta(pair1(indep(Poisson(l1)), indep(Poisson(l2))))
    if l1 >= l2:
        assert v.kind == GERM and v.delta == 0.0 and v.certified
    elif l2 - l1 > 1e-3:
        assert v.kind == INCONCLUSIVE


def test_jensen_rule_certifies_mixed_poisson_below():
    from germorder.distributions import IndepDiffusion, MixedPoisson, Poisson
    from germorder.orders import FamilyPair, check_pgf_order

    pair = FamilyPair((IndepDiffusion(Poisson(2.0), (1.0,)),),
                      (IndepDiffusion(MixedPoisson(((0.5, 1.0), (0.5, 2.5))), (1.0,)),))
    v = check_pgf_order(pair)
    assert v.kind == "PgfDominates" and v.certified
    assert v.method == "Jensen bound on the mixing law"
