import numpy as np
import pytest

from biharm import (
    InvalidParams,
    NoPcValue,
    ProblemParams,
    compute_ladder,
    compute_pc,
    compute_spectrum,
    f_quartic,
    ladder_length_formula,
    parity_boundary_check,
    pc_defect,
    q4_eval,
    rk_eval,
    tail_limit,
)
from biharm.spectrum import eigen_poly_eval, lambda_star


def test_pc_examples():
    with pytest.raises(NoPcValue):
        compute_pc(12)
    pc = compute_pc(13)
    assert pc > 17.0 / 9.0
    # defining equality restated through the eigenvalue polynomial
    params = ProblemParams(13, pc)
    assert abs(eigen_poly_eval(params, lambda_star(params))) < 1e-8 * (
        1.0 + abs(pc * q4_eval(13, params.m))
    )
    # independent confirmation: the spectrum there carries a double root
    assert compute_spectrum(params).degenerate


def test_pc_regression_values():
    # frozen solver outputs (regression fixtures)
    assert compute_pc(13) == pytest.approx(28.1723798198671, rel=1e-12)
    assert compute_pc(15) == pytest.approx(5.732463882336733, rel=1e-12)
    assert compute_pc(20) == pytest.approx(2.484541127242273, rel=1e-12)


def test_rk_at_one():
    for n in (13, 20, 41):
        for k in (1, 2, 5):
            expected = 256.0 * (((k - 1.0) / (k + 1.0)) ** 4 - 1.0)
            assert rk_eval(n, k, 1.0) == pytest.approx(expected, rel=1e-14)
            assert rk_eval(n, k, 1.0) < 0.0


def test_rk_at_minus_one():
    for n in (13, 20, 41):
        for k in (1, 2, 5, n):
            expected = 16.0 * q4_eval(n, n / (k + 1.0) - 2.0)
            assert rk_eval(n, k, -1.0) == pytest.approx(expected, rel=1e-12, abs=1e-9)


def test_rk_at_n_over_n_minus_4():
    for n in (13, 20, 41):
        for k in (1, 2, 5):
            p = n / (n - 4.0)
            expected = (4.0 / (n - 4.0)) ** 4 * q4_eval(n, k * (n - 4.0) / (k + 1.0))
            assert rk_eval(n, k, p) == pytest.approx(expected, rel=1e-10)
            assert rk_eval(n, k, p) > 0.0


def test_rk_vectorized_matches_scalar():
    ps = np.array([1.0, -1.0, 2.5, 1e6])
    vals = rk_eval(13, 2, ps)
    for p, v in zip(ps, vals):
        assert v == rk_eval(13, 2, float(p))


def test_tail_limit_hand_values():
    # Q4(4.5) - 8*11*9 at n=13, k=1
    assert tail_limit(13, 1) == pytest.approx(63.5625)
    # Q4(3) = 3*5*(-8)*(-6) = 720 at n=13, so k=2 gives 720 - 792
    assert tail_limit(13, 2) == pytest.approx(-72.0)
    # (n-4)/(k+1) = n-4 at k=0 is outside the domain; nearest in-domain claim:
    assert tail_limit(13, 1) > 0.0 > tail_limit(13, 2)


def test_tail_limit_sign_matches_f_quartic():
    for n in range(13, 41):
        for k in range(1, n // 2):
            t = tail_limit(n, k)
            f = f_quartic(n, float(k))
            assert np.sign(t) == np.sign(f)


def test_tail_limit_is_rk_limit():
    p = 1e8
    for n in (13, 22, 40):
        for k in (1, 2, 3, 7):
            t = tail_limit(n, k)
            if t == 0.0:
                continue
            assert abs(rk_eval(n, k, p) / p**4 - t) < 1e-3 * abs(t)


def test_f_quartic_closed_forms():
    for n in range(13, 61):
        assert f_quartic(n, -1.0) == pytest.approx(2.0 * (n - 4.0) ** 3, rel=1e-12)
        assert f_quartic(n, 1.0) == pytest.approx(
            2.0 * n**3 - 8.0 * n**2 - 256.0 * n + 512.0, rel=1e-10
        )
        v5 = 2.0 * n**4 - 60.0 * n**3 + 608.0 * n**2 - 2336.0 * n + 2432.0
        v4 = -(n**4) + 18.0 * n**3 - 124.0 * n**2 + 416.0 * n - 608.0
        assert f_quartic(n, n / 2.0 - 5.0) == pytest.approx(v5, rel=1e-10)
        assert f_quartic(n, n / 2.0 - 4.0) == pytest.approx(v4, rel=1e-10)
        assert v5 > 0.0 > v4


def test_f_sign_structure():
    for n in range(13, 61):
        assert f_quartic(n, 1.0 - n / 2.0) < 0.0
        assert f_quartic(n, -1.0) > 0.0
        assert f_quartic(n, 0.0) < 0.0
        assert f_quartic(n, 1.0) > 0.0


def test_ladder_length_formula():
    assert ladder_length_formula(13) == 1
    assert ladder_length_formula(19) == 4
    assert ladder_length_formula(20) == 5
    with pytest.raises(InvalidParams):
        ladder_length_formula(12)


def test_ladder_structure():
    for n in (13, 15, 20, 37, 60):
        lad = compute_ladder(n)
        assert lad.N == ladder_length_formula(n)
        assert lad.rungs[0] == lad.p_c
        assert all(a < b for a, b in zip(lad.rungs, lad.rungs[1:]))
        assert len(lad.tail_limits) == lad.N + 1
        assert all(t > 0.0 for t in lad.tail_limits[1:-1])
        assert lad.tail_limits[-1] < 0.0


def test_ladder_rung_relation():
    for n in (14, 15, 20, 31):
        lad = compute_ladder(n)
        for k, p_k in enumerate(lad.rungs, start=1):
            assert abs(rk_eval(n, k, p_k)) < 1e-8 * p_k**4
            if k >= 2:
                spec = compute_spectrum(ProblemParams(n, p_k))
                l2, l3 = spec.lambdas[1], spec.lambdas[2]
                assert abs(l2 - k * l3) < 1e-6 * abs(l3)
            # R_k is negative below its own rung, in particular at p_c
            if k >= 2:
                assert rk_eval(n, k, lad.p_c) < 0.0


def test_rk_root_count_above_pc():
    for n in (13, 17, 25, 40):
        lad = compute_ladder(n)
        grid = np.geomspace(lad.p_c * (1 + 1e-9), 1e6, 10_000)
        for k in range(2, lad.N + 1):
            if tail_limit(n, k) <= 0.0:
                continue
            vals = rk_eval(n, k, grid)
            crossings = int(np.sum(np.sign(vals[:-1]) != np.sign(vals[1:])))
            assert crossings == 1, (n, k)


def test_parity_boundary():
    pb = parity_boundary_check(13)
    assert pb.k == 2
    assert pb.factored_value == pytest.approx(6.0 * (2197.0 - 5577.0 + 4056.0 - 892.0))
    assert pb.factored_value == pytest.approx(-1296.0)
    assert not pb.positive
    assert parity_boundary_check(21).positive
    for n in range(13, 62, 2):
        pb = parity_boundary_check(n)
        assert pb.rel_diff <= 1e-8
        assert pb.positive == (n >= 20)
    with pytest.raises(InvalidParams):
        parity_boundary_check(14)


def test_limit_ap_richardson():
    for a in (1.0, 2.0, 4.0):
        vals = [(10.0**-j) ** 4 * q4_eval(13, a / 10.0**-j) for j in range(2, 7)]
        rich = (10.0 * vals[-1] - vals[-2]) / 9.0
        assert abs(rich - a**4) <= 1e-4 * a**4


def test_pc_defect_signs():
    for n in (13, 25, 60):
        pc = compute_pc(n)
        assert pc_defect(n, pc * 0.9) > 0.0 or pc * 0.9 < (n + 4) / (n - 4)
        assert pc_defect(n, pc * 1.5) < 0.0
