from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from relgs import potentials as pt
from relgs.potentials import PowerLaw, TabulatedRadial, Yukawa
from relgs.spectral import gaussian, make_grid
from relgs.verify import hartree_term


def _gaussian_parseval_constant(N, alpha):
    # int |y|^-a e^{-|y|^2/2} dy = (2 pi)^{-N/2} c int |k|^{a-N} e^{-|k|^2/2} dk
    S = pt.sphere_area(N)
    lhs = S * integrate.quad(lambda r: r ** (N - 1 - alpha) * math.exp(-r * r / 2), 0, np.inf)[0]
    rad = S * integrate.quad(lambda k: k ** (alpha - 1) * math.exp(-k * k / 2), 0, np.inf)[0]
    return lhs * (2 * math.pi) ** (N / 2) / rad


@pytest.mark.parametrize("N, alpha", [(2, 0.5), (2, 1.0), (2, 1.5), (3, 1.0), (3, 2.0), (4, 1.3)])
def test_riesz_constant_against_quadrature(N, alpha):
    assert pt.riesz_constant(N, alpha) == pytest.approx(_gaussian_parseval_constant(N, alpha), rel=1e-9)


def test_riesz_constant_coulomb():
    assert pt.riesz_constant(3, 1.0) == pytest.approx(4 * math.pi, rel=1e-14)
    assert pt.riesz_constant(2, 1.0) == pytest.approx(2 * math.pi, rel=1e-14)


def test_sphere_and_ball():
    assert pt.sphere_area(2) == pytest.approx(2 * math.pi)
    assert pt.sphere_area(3) == pytest.approx(4 * math.pi)
    assert pt.ball_volume(3, 2.0) == pytest.approx(4 / 3 * math.pi * 8)


def test_powerlaw_symbol_and_zero_mode():
    g = make_grid(3, 4.0, 16)
    sym = pt.symbol_on_grid(PowerLaw(1.0), g)
    assert sym.zero_mode == pytest.approx(2 * math.pi * 16.0)
    k = g.kabs_r.ravel()[1:5]
    assert np.allclose(sym.values_r.ravel()[1:5], 4 * math.pi / k**2, rtol=1e-14)
    with pytest.raises(ValueError):
        pt.symbol_on_grid(PowerLaw(3.0), g)


def test_potential_validation():
    with pytest.raises(ValueError):
        PowerLaw(0.0)
    with pytest.raises(ValueError):
        Yukawa(-1.0)
    with pytest.raises(ValueError, match="decay"):
        TabulatedRadial((0.0, 1.0, 2.0), (1.0, 0.5, 0.5))
    with pytest.raises(ValueError):
        TabulatedRadial((0.0, 2.0, 1.0), (1.0, 0.5, 0.0))
    with pytest.raises(ValueError):
        TabulatedRadial((0.0, 1.0), (-1.0, 0.0))


def test_coulomb_gaussian_box_trend():
    # w = exp(-|y|^2/2): D = Q^2 sqrt(2/pi), Q = pi^{3/2}; periodic box error ~ 1/L
    exact = math.pi**3 * math.sqrt(2 / math.pi)
    d = [hartree_term(PowerLaw(1.0), gaussian(make_grid(3, L, n), 1.0)) for L, n in ((8.0, 64), (16.0, 128))]
    e1, e2 = (exact - d[0]) / exact, (exact - d[1]) / exact
    assert 0 < e2 < e1
    assert e1 / e2 == pytest.approx(2.0, rel=0.1)
    assert 2 * d[1] - d[0] == pytest.approx(exact, rel=5e-3)


def test_yukawa_gaussian_energy():
    mu, s = 1.0, 1.0
    # Z ~ N(0, s^2 I_3) is the difference of two independent points of rho = w^2
    dens = lambda r: 4 * math.pi * r * r * (2 * math.pi * s * s) ** -1.5 * math.exp(-r * r / (2 * s * s))
    ez = integrate.quad(lambda r: dens(r) * math.exp(-mu * r) / r, 0, np.inf)[0]
    exact = math.pi**3 * s**6 * ez
    D = hartree_term(Yukawa(mu), gaussian(make_grid(3, 8.0, 64), s))
    assert D == pytest.approx(exact, rel=1e-6)


def test_sampled_symbol_matches_direct_dft():
    g = make_grid(2, 3.0, 8)
    W = TabulatedRadial((0.0, 1.0, 2.0, 3.0), (2.0, 1.0, 0.3, 0.0))
    sym = pt.symbol_on_grid(W, g)
    kern = np.where(g.radius <= g.L, W(g.radius), 0.0)
    kx = 2 * np.pi * np.fft.fftfreq(g.n, d=g.h)
    ky = 2 * np.pi * np.fft.rfftfreq(g.n, d=g.h)
    X, Y = g.coords
    direct = np.array([[g.cell_volume * np.sum(kern * np.cos(a * X + b * Y)) for b in ky] for a in kx])
    assert np.allclose(sym.values_r, direct, atol=1e-12)
    assert np.allclose(sym.full()[:, : g.n // 2 + 1], sym.values_r, atol=1e-12)


def test_load_tabulated(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("# comment\nradius,value\n0,1\n1,0.5\n2,0\n")
    W = pt.load_tabulated(p, q=4.0)
    assert W.radii == (0.0, 1.0, 2.0) and W.q == 4.0
    assert float(W(0.5)) == pytest.approx(0.75)
    assert float(W(5.0)) == 0.0
    assert W.nonincreasing


def test_weak_norm_coulomb_closed_forms():
    # sup over balls of |B|^{-1/r} int_B 1/|y| is attained at every radius
    assert pt.weak_lq_norm(PowerLaw(1.0), 3.0, 3) == pytest.approx(
        2 * math.pi * (4 * math.pi / 3) ** (-2 / 3), rel=1e-10
    )
    assert pt.weak_lq_norm(PowerLaw(1.0), 2.0, 2) == pytest.approx(2 * math.sqrt(math.pi), rel=1e-10)
    assert pt.weak_lq_norm(PowerLaw(1.0), 4.0, 3) == math.inf
    with pytest.raises(ValueError):
        pt.weak_lq_norm(PowerLaw(1.0), 1.0, 3)


@given(st.floats(0.2, 0.9))
def test_weak_norm_powerlaw_scales(alpha):
    N = 2
    q = N / alpha
    R = 1.7
    expected = pt.ball_volume(N, R) ** (-(1 - 1 / q)) * pt.sphere_area(N) * R ** (N - alpha) / (N - alpha)
    assert pt.weak_lq_norm(PowerLaw(alpha), q, N) == pytest.approx(expected, rel=1e-9)


def test_weak_norm_yukawa_below_coulomb():
    wy = pt.weak_lq_norm(Yukawa(1.0), 3.0, 3)
    wc = pt.weak_lq_norm(PowerLaw(1.0), 3.0, 3)
    assert 0.9 * wc < wy < wc


def test_weak_norm_non_monotone_warns():
    W = TabulatedRadial((0.0, 1.0, 2.0, 3.0), (0.0, 1.0, 0.5, 0.0))
    with pytest.warns(pt.LowerBoundWarning):
        val = pt.weak_lq_norm(W, 3.0, 3)
    assert val > 0


def test_weak_norm_ball_of_step():
    # W = 1 on the unit ball: sup_R |B_R|^{-1/r} min(|B_R|, |B_1|) peaks at R = 1
    W = TabulatedRadial((0.0, 1.0, 1.0 + 1e-9), (1.0, 1.0, 0.0))
    q = 3.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        val = pt.weak_lq_norm(W, q, 3)
    assert val == pytest.approx(pt.ball_volume(3, 1.0) ** (1 / q), rel=1e-6)


@given(st.floats(0.1, 3.0), st.floats(0.05, 0.95), st.floats(1e-3, 30.0))
def test_powerlaw_scaling_holds(alpha, lam, r):
    rep = pt.check_scaling_hypothesis(PowerLaw(alpha), alpha, [lam], [r])
    assert rep.holds


def test_yukawa_scaling_fails_at_large_radius():
    rep = pt.check_scaling_hypothesis(Yukawa(1.0), 1.0, [0.5], [0.1, 1.0, 10.0])
    assert not rep.holds
    assert rep.worst_sample == (0.5, 10.0)


def test_capped_coulomb_scaling_holds():
    # W = min(1, 1/r), truncated far beyond the sampled r / lam
    r = np.concatenate([[0.0], np.geomspace(1.0, 400.0, 2000)])
    W = TabulatedRadial(tuple(r), tuple(np.minimum(1.0, 1.0 / np.maximum(r, 1.0))), tail_tol=1.0)
    rep = pt.check_scaling_hypothesis(W, 1.0, np.linspace(0.1, 0.9, 9), np.geomspace(0.01, 30, 50), tol=1e-4)
    assert rep.holds


def test_scaling_rejects_bad_lambda():
    with pytest.raises(ValueError):
        pt.check_scaling_hypothesis(PowerLaw(1.0), 1.0, [1.5], [1.0])
