import math

import numpy as np
import pytest

from germorder.brw import (
    BrwModel,
    alive_frequency,
    classify_projected,
    extinction_iterates,
    extinction_vector,
    fbrw_project_check,
    fbrw_survival,
    first_moment_matrix,
    germ_transfer_bound,
    perron_root,
    simulate_brw,
)
from germorder.distributions import (
    AllToOne,
    Explicit,
    FiniteSupport,
    IndepDiffusion,
    MixedPoisson,
    Poisson,
    make_rng,
)
from germorder.errors import MaxIterationsExceeded, ProjectionInvalid
from germorder.orders import FamilyPair, find_germ_delta, uniform_mixture_delta, mixed_poisson_germ

GW = FiniteSupport.from_dict({0: 0.25, 2: 0.75})


def single(total):
    return BrwModel((IndepDiffusion(total, (1.0,)),))


def test_extinction_gw():
    ev = extinction_vector(single(GW))
    assert ev.q[0] == pytest.approx(1 / 3, abs=1e-9)
    assert ev.residual <= 1e-12


def test_extinction_trivial_cases():
    assert extinction_vector(single(FiniteSupport((0, 1)))).q[0] == 0.0
    assert extinction_vector(single(Poisson(0.5))).q[0] == pytest.approx(1.0, abs=1e-6)


def test_extinction_max_iter():
    with pytest.raises(MaxIterationsExceeded) as err:
        extinction_vector(single(Poisson(1.0)), max_iter=50)
    assert err.value.last is not None and err.value.residual > 0


def test_extinction_iterates_monotone():
    m = BrwModel((IndepDiffusion(Poisson(1.3), (0.3, 0.7)), IndepDiffusion(GW, (0.6, 0.4))))
    prev = np.zeros(2)
    for n in range(1, 30):
        q = extinction_iterates(m, n)
        assert np.all(q >= prev - 1e-15)
        prev = q
    ev = extinction_vector(m)
    assert np.all(prev <= ev.q + 1e-12)


def test_homogeneous_extinction_equal_coordinates():
    m = BrwModel.homogeneous(IndepDiffusion(Poisson(1.4), (0.2, 0.3, 0.5)))
    q = extinction_vector(m).q
    assert np.ptp(q) < 1e-12
    assert q[0] == pytest.approx(extinction_vector(single(Poisson(1.4))).q[0], abs=1e-10)


def test_first_moment_examples():
    m = BrwModel.homogeneous(IndepDiffusion(Poisson(2), (0.5, 0.5)))
    assert np.allclose(first_moment_matrix(m), [[1, 1], [1, 1]])
    e = BrwModel((Explicit((((1, 0), 1.0),)), Explicit((((0, 3), 1.0),))))
    assert np.allclose(first_moment_matrix(e)[1], [0, 3])
    a = BrwModel.homogeneous(AllToOne(Poisson(2), (0.25, 0.75)))
    assert np.allclose(first_moment_matrix(a)[0], [0.5, 1.5])


def test_moment_rows_match_total_mean():
    laws = (IndepDiffusion(MixedPoisson(((0.3, 1), (0.7, 2))), (0.1, 0.9)),
            AllToOne(GW, (0.5, 0.5)))
    m = first_moment_matrix(BrwModel(laws))
    for row, law in zip(m, laws):
        assert row.sum() == pytest.approx(law.total().pgf_derivative(1.0, 1), abs=1e-9)


def test_perron_against_eigvals():
    rng = make_rng(3)
    for _ in range(30):
        n = int(rng.integers(1, 6))
        m = rng.uniform(0, 2, size=(n, n)) * (rng.random((n, n)) < 0.7)
        m += np.diag(rng.uniform(0.01, 0.1, n))  # keeps things aperiodic-ish but not required
        expected = max(abs(np.linalg.eigvals(m)))
        assert perron_root(m) == pytest.approx(expected, rel=1e-8, abs=1e-8)


def test_perron_periodic():
    assert perron_root([[0, 2], [2, 0]]) == pytest.approx(2.0, abs=1e-9)
    assert perron_root([[0, 0.5], [0.5, 0]]) == pytest.approx(0.5, abs=1e-9)


def test_project_check_examples():
    ok, proj = fbrw_project_check(np.full((4, 4), 0.25), [0, 0, 0, 0])
    assert ok and np.allclose(proj, [[1]])
    p = np.zeros((4, 4))
    for x in range(4):
        p[x, (x + 1) % 4] = 0.5
        p[x, (x + 3) % 4] = 0.5
    ok, proj = fbrw_project_check(p, [x % 2 for x in range(4)])
    assert ok and np.allclose(proj, [[0, 1], [1, 0]])
    bad = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.2, 0.2, 0.6]])
    ok, _ = fbrw_project_check(bad, ["a", "a", "a"])
    assert ok
    bad2 = np.array([[0.5, 0.25, 0.25], [0.5, 0.5, 0.0], [0.2, 0.2, 0.6]])
    ok, proj = fbrw_project_check(bad2, ["a", "b", "b"])
    # fiber {1,2}: rows send 0.5 vs 0.2 into fiber a
    assert not ok and proj is None


def test_fbrw_survival_homogeneous_poisson():
    p = [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
    for lam, kind in [(1.5, "Survives"), (1.0, "Dies")]:
        m = BrwModel(tuple(IndepDiffusion(Poisson(lam), row) for row in p))
        v = fbrw_survival(m, [0, 0, 0])
        assert v.kind == kind and v.perron_root == pytest.approx(lam, abs=1e-9)


def test_classify_projected_examples():
    s = classify_projected([[0, 2], [2, 0]])
    assert s.kind == "Survives" and s.perron_root == pytest.approx(2, abs=1e-9)
    d = classify_projected([[0, 0.5], [0.5, 0]])
    assert d.kind == "Dies" and d.perron_root == pytest.approx(0.5, abs=1e-9)


def test_fbrw_invalid_projection():
    m = BrwModel((IndepDiffusion(Poisson(2), (0.5, 0.5)), IndepDiffusion(Poisson(3), (0.5, 0.5))))
    with pytest.raises(ProjectionInvalid):
        fbrw_survival(m, [0, 0])


def test_germ_transfer_bound_examples():
    assert np.allclose(germ_transfer_bound(np.zeros(3), 0.5), 0.5)
    assert np.allclose(germ_transfer_bound(np.ones(3), 0.7), 1.0)


def test_germ_transfer_single_site_pair():
    mu_total = MixedPoisson(((0.4, 1), (0.6, 3)))
    mu = single(mu_total)
    nu = single(Poisson(2))
    verdict = find_germ_delta(FamilyPair(mu.laws, nu.laws))
    assert verdict.certified
    delta = verdict.certified_delta
    q_nu = extinction_vector(nu)
    bound = germ_transfer_bound(q_nu, delta)
    assert np.all(extinction_vector(mu).q <= bound + 1e-6)
    gw_bound = germ_transfer_bound(np.array([1 / 3]), 0.9)
    assert gw_bound[0] == pytest.approx(0.93333333, abs=1e-8)


def test_fbrw2_chain_bound_below_one():
    # sites with rates in (eps, M], mixtures with alpha < 1/2, period-2 walk
    lam_hat = [1.3, 2.1, 1.6, 2.4]
    alphas = [0.1, 0.3, 0.45, 0.2]
    eps, big_m = 0.4, 3.0
    p = np.zeros((4, 4))
    for x in range(4):
        p[x, (x + 1) % 4] = p[x, (x + 3) % 4] = 0.5
    nu_model = BrwModel(tuple(IndepDiffusion(Poisson(l), tuple(p[x])) for x, l in enumerate(lam_hat)))
    mu_model = BrwModel(tuple(
        IndepDiffusion(MixedPoisson(((a, l - eps), (1 - a, l + eps))), tuple(p[x]))
        for x, (l, a) in enumerate(zip(lam_hat, alphas))
    ))
    delta = uniform_mixture_delta(eps, big_m, max(alphas)) + 1e-9
    for mu_law, nu_law in zip(mu_model.laws, nu_model.laws):
        assert mixed_poisson_germ(mu_law.total(), nu_law.total(), delta)
    q_nu = extinction_vector(nu_model)
    assert np.all(q_nu.q < 1)
    bound = germ_transfer_bound(q_nu, delta)
    assert np.all(bound < 1)
    assert np.all(extinction_vector(mu_model).q <= bound + 1e-6)


def test_simulate_trivial():
    dead = simulate_brw(single(FiniteSupport((1.0,))), 0, 10, make_rng(1))
    assert not dead.alive and dead.occupation.shape[0] == 2
    grow = simulate_brw(single(FiniteSupport((0, 0, 1))), 0, 40, make_rng(1), population_cap=10**6)
    assert grow.alive and grow.capped
    totals = grow.occupation.sum(axis=1)
    assert list(totals[:5]) == [1, 2, 4, 8, 16]


def test_trajectory_csv():
    t = simulate_brw(single(FiniteSupport((0, 0, 1))), 0, 2, make_rng(1))
    lines = t.to_csv().strip().split("\n")
    assert lines[0] == "generation,site,count"
    assert lines[-1] == "2,0,4"


def test_monte_carlo_brackets_fixed_point():
    model = BrwModel((IndepDiffusion(Poisson(1.6), (0.4, 0.6)), IndepDiffusion(GW, (0.7, 0.3))))
    q = extinction_vector(model).q
    h = 25
    qh = extinction_iterates(model, h)
    est = alive_frequency(model, 0, h, 20_000, make_rng(8))
    sigma = math.sqrt(0.25 / est.reps)
    assert 1 - q[0] - 3 * sigma <= est.frequency <= 1 - qh[0] + 3 * sigma
