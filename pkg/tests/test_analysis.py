"""Tests for stationary solves, TV curves, spectra, and the checkers.

Power iteration and explicit matrix powers serve as the independent oracles
for the linear-solve and iterated-product paths respectively.
"""

import json

import numpy as np
import pytest

from blockgibbs import (
    Dims,
    Kernel,
    StateCodec,
    analyze,
    block_kernel,
    check_marginal_agreement,
    check_pistar_invariance,
    check_prop1,
    check_rate_equality,
    flatten_to_codec,
    marginal_z_kernel,
    ooo_kernel,
    pi_star,
    product_pmf,
    random_pmf,
    spectrum,
    stationary,
    tv,
    tv_curve,
)
from blockgibbs.kernels import InitialMeasure


def stationary_by_power_iteration(matrix, tol=1e-14, max_iter=200_000):
    v = np.full(matrix.shape[0], 1.0 / matrix.shape[0])
    for _ in range(max_iter):
        nxt = v @ matrix
        if np.abs(nxt - v).sum() < tol:
            return nxt
        v = nxt
    return v


def two_state_kernel(p: float) -> Kernel:
    codec = StateCodec(("Z",), (2,))
    return Kernel(codec, np.array([[1 - p, p], [p, 1 - p]]))


# ---------------------------------------------------------------------------
# stationary
# ---------------------------------------------------------------------------
def test_stationary_of_rank_one_kernel_is_its_row(product_222):
    k = block_kernel(product_222)
    np.testing.assert_allclose(
        stationary(k), flatten_to_codec(product_222, k.codec), atol=1e-13
    )


def test_stationary_matches_power_iteration(pmf_322):
    k = block_kernel(pmf_322)
    assert np.abs(stationary(k) - stationary_by_power_iteration(k.matrix)).sum() < 1e-10


def test_stationary_of_ooo_matches_pi_star_by_power_iteration(pmf_322):
    k = ooo_kernel(pmf_322)
    v = stationary(k)
    assert np.abs(v - stationary_by_power_iteration(k.matrix)).sum() < 1e-10
    assert np.abs(v - flatten_to_codec(pi_star(pmf_322), k.codec)).sum() < 1e-10


def test_stationary_rejects_reducible_kernel():
    k = Kernel(StateCodec(("Z",), (2,)), np.eye(2))
    with pytest.raises(ValueError, match="multiplicity"):
        stationary(k)


# ---------------------------------------------------------------------------
# tv_curve
# ---------------------------------------------------------------------------
def test_tv_curve_from_stationary_is_zero(pmf_322):
    k = block_kernel(pmf_322)
    v = stationary(k)
    assert tv_curve(k, v, v, 10).max() < 1e-13


def test_tv_curve_rank_one_hits_target_after_one_step(product_222):
    k = block_kernel(product_222)
    target = flatten_to_codec(product_222, k.codec)
    curve = tv_curve(k, 0, target, 5)
    assert curve[0] > 0.1
    assert curve[1:].max() < 1e-14


def test_tv_curve_init_forms_agree(pmf_322):
    k = ooo_kernel(pmf_322)
    target = flatten_to_codec(pi_star(pmf_322), k.codec)
    state = (1, 0, 2)
    flat = k.codec.encode(state)
    vec = np.zeros(k.codec.size)
    vec[flat] = 1.0
    measure = InitialMeasure(k.codec, vec)
    curves = [tv_curve(k, init, target, 8) for init in (state, flat, vec, measure)]
    for c in curves[1:]:
        np.testing.assert_array_equal(c, curves[0])


@pytest.mark.parametrize("index", [1, 2, 3, 7])
def test_tv_curves_are_nonincreasing(corpus, index):
    pmf = corpus[index]
    for factory, target_pmf in ((block_kernel, pmf), (ooo_kernel, pi_star(pmf))):
        k = factory(pmf)
        curve = tv_curve(k, 0, flatten_to_codec(target_pmf, k.codec), 60)
        assert (np.diff(curve) <= 1e-12).all()


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------
def test_spectrum_rank_one(product_222):
    s = spectrum(block_kernel(product_222))
    assert s.slem < 1e-12
    assert s.unit_multiplicity == 1


def test_spectrum_two_state_closed_form():
    # eigenvalues of [[1-p, p], [p, 1-p]] are 1 and 1 - 2p
    s = spectrum(two_state_kernel(0.3))
    assert s.slem == pytest.approx(0.4, abs=1e-14)
    np.testing.assert_allclose(s.moduli, [1.0, 0.4], atol=1e-14)


def test_slem_matches_tv_decay_exponent(corpus):
    # log-linear regression on the curve tail, for members with slem > 0.1
    checked = 0
    for pmf in corpus:
        k = block_kernel(pmf)
        slem = spectrum(k).slem
        if slem <= 0.1:
            continue
        target = flatten_to_codec(pmf, k.codec)
        start = int(np.argmax(tv_curve(k, 0, target, 1)))  # any fixed start works
        curve = tv_curve(k, start, target, 400)
        window = np.where((curve > 1e-10) & (curve < 1e-3))[0]
        slope = np.polyfit(window, np.log(curve[window]), 1)[0]
        assert abs(np.exp(slope) - slem) / slem < 0.05
        checked += 1
    assert checked > 10


def test_consecutive_tv_ratio_converges_to_slem(corpus):
    for pmf in corpus[:12]:
        k = block_kernel(pmf)
        slem = spectrum(k).slem
        if slem < 1e-3:
            continue
        target = flatten_to_codec(pmf, k.codec)
        curve = tv_curve(k, 0, target, 400)
        above = np.where(curve > 1e-10)[0]
        n = above[-1] - 1
        while curve[n + 1] <= 1e-10:
            n -= 1
        ratio = curve[n + 1] / curve[n]
        assert abs(ratio - slem) / slem < 0.01


# ---------------------------------------------------------------------------
# check_prop1
# ---------------------------------------------------------------------------
def test_prop1_product_pmf_all_zero(product_222):
    report = check_prop1(product_222, nmax=6)
    assert report.verdict
    # rank-one kernels: every term vanishes once its kernel power is >= 1
    assert np.nanmax(report.chain1[2:]) < 1e-14  # n >= 3
    assert report.chain2[:, 0].max() < 1e-14  # left term, n >= 1
    # at n = 1 the middle/right terms are distances of the start measure
    # itself (0-th kernel power), nonzero even here; from n = 2 they vanish
    assert report.chain2[1:, 1:].max() < 1e-14


def test_prop1_seeded_pmf_holds_and_matches_matrix_power_oracle():
    pmf = random_pmf(Dims(2, 2, 2), seed=4, floor=0.01)
    report = check_prop1(pmf, nmax=12)
    assert report.verdict
    assert report.max_violation <= report.tol
    assert report.violations == []

    # worst-case block-sweep distance at n = 5 against an explicit power
    k = block_kernel(pmf)
    target = flatten_to_codec(pmf, k.codec)
    p5 = np.linalg.matrix_power(k.matrix, 5)
    want = max(tv(row, target) for row in p5)
    assert report.chain1[4, 0] == pytest.approx(want, abs=1e-12)

    # worst-case z-marginal distance at n = 4 (the n = 5 middle term)
    kz = marginal_z_kernel(pmf)
    tz = flatten_to_codec(pmf, kz.codec)
    q4 = np.linalg.matrix_power(kz.matrix, 4)
    assert report.chain1[4, 1] == pytest.approx(
        max(tv(row, tz) for row in q4), abs=1e-12
    )


def test_prop1_anti_example_z_terms_vanish(anti_pmf):
    report = check_prop1(anti_pmf, nmax=8)
    assert report.verdict
    assert np.nanmax(report.chain1[:, 1]) < 1e-15  # one-point Z marginal


def test_prop1_reports_n2_without_verdict(pmf_322):
    report = check_prop1(pmf_322, nmax=5)
    assert report.chain1_ok[0] is None and report.chain1_ok[1] is None
    assert not np.isnan(report.chain1[1, 2])  # n = 2 value still reported
    assert np.isnan(report.chain1[0, 2])  # n = 1 right term undefined
    assert all(isinstance(ok, bool) for ok in report.chain2_ok)


def test_prop1_requires_nmax_three(pmf_322):
    with pytest.raises(ValueError):
        check_prop1(pmf_322, nmax=2)


# ---------------------------------------------------------------------------
# check_rate_equality
# ---------------------------------------------------------------------------
def test_rate_equality_product_all_slems_zero(product_222):
    report = check_rate_equality(product_222)
    assert report.verdict
    assert all(s.slem < 1e-12 for s in report.spectra.values())


def test_rate_equality_seeded(pmf_322):
    report = check_rate_equality(pmf_322)
    assert report.verdict
    assert report.multiset_gap < 1e-8
    assert report.slem_gap < 1e-8
    assert all(s.unit_multiplicity == 1 for s in report.spectra.values())
    assert all(s.slem < 1 for s in report.spectra.values())


def test_rate_equality_single_z(anti_pmf):
    report = check_rate_equality(anti_pmf)
    assert report.verdict
    assert report.spectra["block"].slem < 1e-12
    assert report.spectra["marginal_z"].slem < 1e-12
    assert report.spectra["ooo"].slem == pytest.approx(0.0, abs=1e-8)


# ---------------------------------------------------------------------------
# invariance and marginal agreement
# ---------------------------------------------------------------------------
def test_invariance_product(product_222):
    r_star, r_pi = check_pistar_invariance(product_222)
    assert r_star < 1e-14
    assert r_pi < 1e-14


def test_invariance_anti_example(anti_pmf):
    r_star, r_pi = check_pistar_invariance(anti_pmf)
    assert r_star < 1e-12
    assert r_pi > 0.1


@pytest.mark.parametrize("index", [0, 1, 2, 3, 10])
def test_invariance_corpus(corpus, index):
    r_star, _ = check_pistar_invariance(corpus[index])
    assert r_star <= 1e-12


def test_marginal_agreement_tables(anti_pmf, product_222, pmf_322):
    anti = check_marginal_agreement(anti_pmf)
    assert anti["XY"] == pytest.approx(0.3, abs=1e-12)
    for key in ("X", "Y", "Z", "XZ", "YZ"):
        assert anti[key] < 1e-15

    assert max(check_marginal_agreement(product_222).values()) < 1e-14

    seeded = check_marginal_agreement(pmf_322)
    assert seeded["XY"] > 1e-6
    assert max(seeded[k] for k in ("X", "Y", "Z", "XZ", "YZ")) <= 1e-14


# ---------------------------------------------------------------------------
# aggregated report
# ---------------------------------------------------------------------------
def test_analyze_report_serializes(pmf_322):
    report = analyze(pmf_322, nmax=10)
    doc = report.to_json_dict()
    text = json.dumps(doc)
    assert "NaN" not in text
    assert doc["prop1"]["verdict"] is True
    assert doc["rates"]["verdict"] is True
    assert max(report.stationary_residuals.values()) <= 1e-12
    assert max(report.stationary_target_gap.values()) <= 1e-10
