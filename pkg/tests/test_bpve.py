import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from germorder.bpve import (
    BpveModel,
    ClosedFormTail,
    ConstantTail,
    ParamSeq,
    PeriodicTail,
    check_moment_survival,
    check_zero_one_survival,
    check_small_counts_survival,
    compose_blocks,
    germ_compare_bpve,
    simulate_bpve,
    survival_binary,
    tail_sum_compare,
)
from germorder.distributions import FiniteSupport, MixedPoisson, Poisson, make_rng
from germorder.errors import LawError

SQUARE_DEFICIT = ParamSeq("power", limit=1.0, coef=1.0, shift=2.0, power=2.0)
SPLIT = FiniteSupport.from_dict({0: 0.2, 2: 0.8})


def const(law):
    return BpveModel.constant(law)


def finite_laws(max_support=5):
    return st.lists(st.floats(0, 1), min_size=2, max_size=max_support).filter(
        lambda w: sum(w) > 1e-3 and w[0] / sum(w) < 0.999
    ).map(lambda w: FiniteSupport(tuple(np.asarray(w) / sum(w))))


# -- models ----------------------------------------------------------------


def test_param_seq_forms():
    assert SQUARE_DEFICIT(0) == pytest.approx(0.75)
    assert ParamSeq("geometric", limit=2, coef=1, ratio=0.5)(3) == pytest.approx(1.875)
    per = ParamSeq("periodic", values=(0.5, 1.5))
    assert list(per(np.arange(4))) == [0.5, 1.5, 0.5, 1.5]
    assert per.inf_from(7) == 0.5 and per.sup_from(7) == 1.5
    assert SQUARE_DEFICIT.deficit_summable(1.0)
    assert not ParamSeq("power", limit=1, coef=1, shift=1, power=1).deficit_summable(1.0)
    with pytest.raises(LawError):
        ParamSeq("weird")


def test_model_rejects_sure_extinction():
    with pytest.raises(LawError):
        const(FiniteSupport((1.0,)))
    with pytest.raises(LawError):
        BpveModel((FiniteSupport((1.0,)),), ConstantTail(SPLIT))


def test_law_at_tail_rules():
    m = BpveModel((Poisson(3),), PeriodicTail((Poisson(1), Poisson(2))))
    assert [m.law_at(n).lam for n in range(5)] == [3, 1, 2, 1, 2]
    c = BpveModel((), ClosedFormTail("poisson", (ParamSeq("geometric", limit=2, coef=1, ratio=0.5),)))
    assert c.law_at(1).lam == pytest.approx(1.5)
    mp = BpveModel((), ClosedFormTail("mixed_poisson", (ParamSeq.constant(1), ParamSeq.constant(3)), (0.5, 0.5)))
    assert mp.law_at(4).mean() == pytest.approx(2.0)


# -- block composition -----------------------------------------------------


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.5])
def test_compose_poisson_two_block(lam):
    m = const(Poisson(lam))
    assert compose_blocks(m, [0, 2], 0, 0.0) == pytest.approx(math.exp(lam * (math.exp(-lam) - 1)), abs=1e-14)


@pytest.mark.parametrize("a,m_len,t", [(0.3, 1, 0.2), (0.7, 4, 0.5), (0.95, 10, 0.0)])
def test_compose_bernoulli_affine(a, m_len, t):
    m = BpveModel.bernoulli(ParamSeq.constant(a))
    assert compose_blocks(m, [3, 3 + m_len], 0, t) == pytest.approx(1 - a**m_len + a**m_len * t, abs=1e-14)


def test_compose_order_innermost_first():
    m = BpveModel((FiniteSupport((0.5, 0.5)), Poisson(2.0)), ConstantTail(SPLIT))
    t = 0.3
    expected = Poisson(2.0).pgf(FiniteSupport((0.5, 0.5)).pgf(t))
    assert compose_blocks(m, [0, 2], 0, t) == pytest.approx(expected, abs=1e-15)


def test_compose_block_validation():
    with pytest.raises(ValueError):
        compose_blocks(const(SPLIT), [0, 2, 2], 0, 0.5)
    with pytest.raises(IndexError):
        compose_blocks(const(SPLIT), [0, 2], 1, 0.5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.floats(0.1, 3))
def test_compose_at_one(lengths, lam):
    m = BpveModel((Poisson(lam), SPLIT), PeriodicTail((Poisson(lam / 2 + 0.1), SPLIT)))
    bp = list(np.cumsum([0] + lengths))
    for i in range(len(lengths)):
        assert compose_blocks(m, bp, i, 1.0) == 1.0


# -- binary survival -------------------------------------------------------


def test_survival_binary_examples():
    r = survival_binary(ParamSeq.constant(1.0), 100)
    assert r.kind == "Survives" and r.partial_product == 1.0
    r = survival_binary(SQUARE_DEFICIT, 1000)
    assert r.kind == "Survives" and r.limit == 0.5 and r.limit_exact == "1/2"
    assert r.partial_product == pytest.approx(1002 / 2002, rel=1e-12)
    r = survival_binary(ParamSeq.constant(0.9), 50)
    assert r.kind == "Dies" and r.partial_product == pytest.approx(0.9**50)


@pytest.mark.parametrize("shift", [2, 3, 5, 10])
def test_telescoping_limits(shift):
    seq = ParamSeq("power", limit=1.0, coef=1.0, shift=shift, power=2.0)
    r = survival_binary(seq, 200_000)
    assert r.limit == pytest.approx((shift - 1) / shift, abs=1e-15)
    assert r.partial_product == pytest.approx(r.limit, abs=1e-4)


def test_survival_binary_bounds_bracket_long_product():
    seq = ParamSeq("power", limit=1.0, coef=0.5, shift=1.0, power=1.5)
    r = survival_binary(seq, 100)
    far = survival_binary(seq, 200_000)
    lo, hi = r.limit_bounds
    flo, fhi = far.limit_bounds
    # partial products decrease to the limit, so each sits above the lower bound
    assert r.kind == "Survives" and lo <= far.partial_product
    assert lo <= flo <= fhi <= hi + 1e-15 and fhi - flo < 1e-3 * (hi - lo)
    geo = survival_binary(ParamSeq("geometric", limit=1.0, coef=0.5, ratio=0.5), 30)
    lo, hi = geo.limit_bounds
    far = survival_binary(ParamSeq("geometric", limit=1.0, coef=0.5, ratio=0.5), 200).partial_product
    assert lo * (1 - 1e-12) <= far <= hi * (1 + 1e-12)


def test_survival_binary_harmonic_dies():
    r = survival_binary(ParamSeq("power", limit=1.0, coef=1.0, shift=2.0, power=1.0), 1000)
    assert r.kind == "Dies"


def test_survival_binary_unrecognized():
    assert survival_binary(lambda n: np.full(np.shape(n), 0.5), 10).kind == "Undecided"


# -- limsup criteria -------------------------------------------------------


def test_zero_one_cases():
    assert check_zero_one_survival(const(SPLIT)).kind == "Survives"
    r = check_zero_one_survival(const(FiniteSupport((0.4, 0.6))))
    assert r.kind == "Inconclusive" and r.limsup == pytest.approx(1.4)
    assert check_zero_one_survival(const(FiniteSupport((0.0, 1.0)))).kind == "Inconclusive"


def test_small_counts_cases():
    r = check_small_counts_survival(const(SPLIT), 1)
    assert r.kind == "Survives" and r.limsup == pytest.approx(0.4)
    r = check_small_counts_survival(const(Poisson(2)), 2)
    assert r.kind == "Survives" and r.limsup == pytest.approx(9 * math.exp(-2), abs=1e-14)
    q = 0.1
    assert check_small_counts_survival(const(FiniteSupport((1 - q, 0, q))), 1).kind == "Inconclusive"


def test_limsup_uses_tail_not_prefix():
    bad = FiniteSupport((0.9, 0.1))
    m = BpveModel((bad,) * 5, ConstantTail(SPLIT))
    assert check_zero_one_survival(m).kind == "Survives"
    periodic = BpveModel((), PeriodicTail((SPLIT, bad)))
    r = check_zero_one_survival(periodic)
    assert r.kind == "Inconclusive" and r.limsup == pytest.approx(1.9)


def test_limsup_closed_form_uses_limit_points():
    # bernoulli a_n -> 1: 2(1-a_n) + a_n -> 1, never below one
    m = BpveModel.bernoulli(SQUARE_DEFICIT)
    assert check_zero_one_survival(m).limsup == pytest.approx(1.0)
    pois = BpveModel((), ClosedFormTail("poisson", (ParamSeq("geometric", limit=3, coef=2, ratio=0.5),)))
    r = check_small_counts_survival(pois, 2)
    expected = sum((3 - k) * Poisson(3).pmf(k) for k in range(3))
    assert r.limsup == pytest.approx(expected) and r.kind == "Survives"


@settings(max_examples=80, deadline=None)
@given(finite_laws())
def test_example_equals_prop_k1(law):
    m = const(law)
    a, b = check_zero_one_survival(m), check_small_counts_survival(m, 1)
    assert (a.kind == "Survives") == (b.kind == "Survives")
    assert a.limsup == pytest.approx(b.limsup, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(finite_laws(7), st.integers(1, 4))
def test_small_counts_monotone_in_k0(law, k0):
    m = const(law)
    if check_small_counts_survival(m, k0).kind == "Survives":
        for k in range(k0, k0 + 4):
            assert check_small_counts_survival(m, k).kind == "Survives"


@settings(max_examples=80, deadline=None)
@given(finite_laws(7), st.integers(1, 5))
def test_small_counts_implies_supercritical(law, k0):
    if check_small_counts_survival(const(law), k0).kind == "Survives":
        assert law.mean() > 1 + 1e-9


# -- tail sums -------------------------------------------------------------


def test_tail_sum_examples():
    bern1 = FiniteSupport((0.0, 1.0))
    assert tail_sum_compare(SPLIT, bern1, 0.9, 1)
    assert not tail_sum_compare(FiniteSupport((0.6, 0.4)), FiniteSupport((0.01, 0.99)), 0.99, 1)
    law = FiniteSupport((0.1, 0.3, 0.4, 0.2))
    for t in (0.0, 0.5, 0.99, 1.0):
        assert tail_sum_compare(law, law, t, 50, tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(finite_laws(6), finite_laws(6), st.floats(0, 0.999), st.integers(0, 6))
def test_tail_sum_implies_pgf_order(mu, nu, t, k0):
    if tail_sum_compare(mu, nu, t, k0, tol=0.0):
        assert mu.pgf(t) <= nu.pgf(t) + 1e-12


@settings(max_examples=60, deadline=None)
@given(finite_laws(6), st.floats(0, 0.999))
def test_tail_sum_identity(law, t):
    i = np.arange(law.support_max + 1)
    series = float(np.sum(law.tail(i + 1) * t**i))
    assert law.pgf(t) == pytest.approx(1 + (t - 1) * series, abs=1e-12)


# -- germ comparison -------------------------------------------------------


def test_germ_compare_examples():
    r = germ_compare_bpve(const(SPLIT), const(SPLIT), 0.5)
    assert r.holds and r.worst_margin == 0.0
    r = germ_compare_bpve(const(SPLIT), BpveModel.bernoulli(SQUARE_DEFICIT), 0.9)
    assert r.holds and r.tail_exact
    r = germ_compare_bpve(const(FiniteSupport((0.9, 0.1))), BpveModel.bernoulli(ParamSeq.constant(0.99)), 0.0)
    assert not r.holds and r.witness["t"] == "1-"


def test_germ_compare_fails_below_threshold():
    # 0.2 + 0.8 t^2 <= t exactly on [1/4, 1]
    nu = BpveModel.bernoulli(ParamSeq.constant(1.0))
    assert germ_compare_bpve(const(SPLIT), nu, 0.26).holds
    r = germ_compare_bpve(const(SPLIT), nu, 0.2)
    assert not r.holds and r.witness["t"] < 0.25


def test_germ_compare_tail_envelope_detects_late_failure():
    # nu's Poisson rate climbs past mu's; only the tail envelope sees it
    nu = BpveModel((), ClosedFormTail("poisson", (ParamSeq("power", limit=3.0, coef=10.0, shift=10.0, power=1.0),)))
    r = germ_compare_bpve(const(Poisson(2.5)), nu, 0.5, horizon=20)
    assert not r.holds


def test_germ_compare_against_dense_oracle():
    mu = BpveModel((Poisson(3.0),), PeriodicTail((Poisson(2.2), MixedPoisson(((0.5, 1.8), (0.5, 3.0))))))
    nu = BpveModel((), ConstantTail(Poisson(2.0)))
    t = np.linspace(0.4, 1, 20_001)
    ok = all(np.all(mu.law_at(n).pgf(t) <= nu.law_at(n).pgf(t) + 1e-12) for n in range(4))
    assert germ_compare_bpve(mu, nu, 0.4).holds == ok


def test_germ_transfer_alive_frequency():
    mu = const(SPLIT)
    nu = BpveModel.bernoulli(SQUARE_DEFICIT)
    assert germ_compare_bpve(mu, nu, 0.9).holds and survival_binary(SQUARE_DEFICIT).kind == "Survives"
    h, reps = 60, 4000
    fm = simulate_bpve(mu, h, reps, make_rng(1, 0), cap=10**4)
    fn = simulate_bpve(nu, h, reps, make_rng(1, 1))
    sigma = math.sqrt(0.25 / reps)
    assert fm.frequency >= (1 - 0.9) * fn.frequency - 3 * sigma


# -- moment criterion ------------------------------------------------------


def test_moment_survival_supercritical_constant():
    law = FiniteSupport.from_dict({0: 0.25, 2: 0.75})  # m1 = 1.5, m2 = 3
    assert law.second_moment() == pytest.approx(3.0)
    r = check_moment_survival(const(law), 0, 40)
    assert r.kind == "Survives"
    assert r.running_inf == pytest.approx(1.5)
    assert r.partial_sum + r.tail_bound == pytest.approx(2.0, rel=1e-12)


def test_moment_survival_critical_constant():
    r = check_moment_survival(const(FiniteSupport.from_dict({0: 0.5, 2: 0.5})), 0, 100)
    assert r.kind == "Inconclusive" and r.series.startswith("diverges")
    assert r.partial_sum == pytest.approx(101.0)


def test_moment_survival_mean_to_one_not_summable():
    split = BpveModel((), ClosedFormTail("binary_split", (SQUARE_DEFICIT,)))
    r = check_moment_survival(split, 0, 500)
    assert r.kind == "Inconclusive" and r.series.startswith("diverges")
    assert r.running_inf > 0.49


def test_moment_survival_bernoulli_and_closed_forms():
    assert check_moment_survival(BpveModel.bernoulli(SQUARE_DEFICIT)).kind == "Survives"
    assert check_moment_survival(BpveModel.bernoulli(ParamSeq.constant(0.9))).kind == "Inconclusive"
    pois = BpveModel((), ClosedFormTail("poisson", (ParamSeq("power", limit=2.0, coef=1.5, shift=1.0, power=1.0),)))
    r = check_moment_survival(pois, 0, 50)
    assert r.kind == "Survives" and r.tail_bound is not None
    # a much longer horizon stays within the certified tail bound
    long = check_moment_survival(pois, 0, 5000)
    assert r.partial_sum <= long.partial_sum <= r.partial_sum + r.tail_bound + 1e-12


def test_moment_survival_periodic_product():
    # per-period mean product 0.8 * 1.5 = 1.2 > 1
    m = BpveModel((), PeriodicTail((Poisson(0.8), Poisson(1.5))))
    r = check_moment_survival(m, 0, 11)
    assert r.kind == "Survives"
    long = check_moment_survival(m, 0, 4001)
    assert long.partial_sum == pytest.approx(r.partial_sum + r.tail_bound, rel=1e-9)
    assert check_moment_survival(BpveModel((), PeriodicTail((Poisson(0.5), Poisson(1.5)))), 0, 10).kind == "Inconclusive"


# -- simulation ------------------------------------------------------------


def test_simulate_trivial():
    m = BpveModel((FiniteSupport((1.0,)),) * 0, ConstantTail(FiniteSupport((0.5, 0.5))))
    assert simulate_bpve(m, 0, 10, make_rng(0)).frequency == 1.0
    always = const(FiniteSupport((0, 0, 1)))
    assert simulate_bpve(always, 30, 100, make_rng(0), cap=1000).frequency == 1.0


def test_simulate_dead_prefix():
    m = BpveModel((FiniteSupport((0.999999, 0.000001)),), ConstantTail(SPLIT))
    assert simulate_bpve(m, 5, 200, make_rng(2)).frequency < 0.02


def test_simulate_binary_matches_product():
    m = BpveModel.bernoulli(SQUARE_DEFICIT)
    est = simulate_bpve(m, 200, 20_000, make_rng(5))
    exact = 202 / 402
    assert abs(est.frequency - exact) <= 4 * math.sqrt(0.25 / 20_000)
