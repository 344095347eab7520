import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doublecal.design import Design, SampleDraw, draw_srswor
from doublecal.frame import compute_totals
from doublecal.variance import (
    approx_variance,
    finalize_report,
    influence_empirical,
    influence_population,
    syg_pairwise,
    syg_variance,
)

from conftest import random_frame
from oracles import enumerated_ht_moments, fd_influence, srswor_samples


def test_approx_variance_small_case():
    v = approx_variance(np.array([1.0, 2.0, 3.0, 4.0]), Design.srswor(4, 2))
    assert v == pytest.approx(20.0 / 3.0, rel=1e-14)
    assert enumerated_ht_moments(np.array([1.0, 2.0, 3.0, 4.0]), 2)[1] == pytest.approx(20.0 / 3.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_b=st.integers(3, 9), data=st.data())
def test_approx_variance_is_exact_ht_variance(seed, n_b, data):
    n = data.draw(st.integers(1, n_b - 1))
    u = np.random.default_rng(seed).normal(size=n_b) * 5
    _, exact = enumerated_ht_moments(u, n)
    assert approx_variance(u, Design.srswor(n_b, n)) == pytest.approx(exact, rel=1e-10, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_b=st.integers(3, 40), data=st.data())
def test_srswor_reduction_matches_pairwise(seed, n_b, data):
    n = data.draw(st.integers(1, n_b - 1))
    u = np.random.default_rng(seed).normal(size=n_b)
    d = Design.srswor(n_b, n)
    pairwise = syg_pairwise(u, d.first_order(), d.second_order())
    assert approx_variance(u, d) == pytest.approx(pairwise, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("n_b,n", [(4, 2), (6, 3), (8, 2), (8, 3)])
def test_syg_unbiased_by_enumeration(n_b, n):
    u = np.random.default_rng(n_b * 10 + n).normal(3.0, 2.0, size=n_b)
    d = Design.srswor(n_b, n)
    mean = np.mean([syg_variance(u[s], d.probabilities(SampleDraw(s))) for s in srswor_samples(n_b, n)])
    assert mean == pytest.approx(approx_variance(u, d), rel=1e-10)


def test_syg_explicit_design_unbiased():
    # unequal-probability design on 4 units given by its sample distribution
    samples = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    p_s = np.array([0.3, 0.2, 0.05, 0.1, 0.15, 0.2])
    pi = np.zeros(4)
    joint = np.zeros((4, 4))
    for s, p in zip(samples, p_s):
        for j in s:
            pi[j] += p
            for h in s:
                joint[j, h] += p
    u = np.array([1.0, -2.0, 4.0, 0.5])
    design = Design.explicit(pi, joint)
    est = [syg_variance(u[list(s)], design.probabilities(SampleDraw(np.array(s)))) for s in samples]
    truth = np.dot(p_s, [(u[list(s)] / pi[list(s)]).sum() for s in samples])
    var = np.dot(p_s, [((u[list(s)] / pi[list(s)]).sum() - truth) ** 2 for s in samples])
    assert np.dot(p_s, est) == pytest.approx(var, rel=1e-10)
    assert approx_variance(u, design) == pytest.approx(var, rel=1e-10)


def test_influence_matches_finite_differences(rng):
    f = random_frame(rng, n_total=70, n_b=50, n_resp=30, k=2, m=2)
    t = compute_totals(f)
    rows = f.b_rows
    u = influence_population(f, t).values
    fd = fd_influence(np.ones(f.n_b), f.y[rows], f.x[rows], f.z[rows], f.r[rows], t.t_x_b, t.t_z)
    npt.assert_allclose(u, fd, rtol=1e-5, atol=1e-7 * np.abs(u).max())


def test_empirical_influence_matches_finite_differences(rng):
    f = random_frame(rng, n_total=120, n_b=100, n_resp=50)
    t = compute_totals(f)
    draw = draw_srswor(f.n_b, 40, rng)
    pi = np.full(40, 0.4)
    u_hat = influence_empirical(f, draw, pi, t).values
    rows = f.b_rows[draw.indices]
    fd = fd_influence(1.0 / pi, f.y[rows], f.x[rows], f.z[rows], f.r[rows], t.t_x_b, t.t_z)
    npt.assert_allclose(u_hat, fd, rtol=1e-5, atol=1e-7 * np.abs(u_hat).max())


def test_census_empirical_equals_population(rng):
    f = random_frame(rng)
    t = compute_totals(f)
    u = influence_population(f, t).values
    u_hat = influence_empirical(f, SampleDraw(np.arange(f.n_b)), np.ones(f.n_b), t).values
    npt.assert_allclose(u_hat, u, rtol=1e-12, atol=1e-12 * np.abs(u).max())
    assert approx_variance(u, Design.census(f.n_b)) == 0.0


def test_report_fields():
    rep = finalize_report(200.0, 25.0, 10)
    assert rep.std_error == 5.0 and rep.rrmse == 0.025
    assert (rep.ci_low, rep.ci_high) == (190.0, 210.0)
    assert finalize_report(0.0, 4.0).rrmse is None
    with pytest.raises(ArithmeticError):
        finalize_report(1.0, -1e-3)
