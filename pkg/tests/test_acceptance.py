"""Acceptance suite: one test group per criterion.

Run with ``pytest tests/test_acceptance.py`` (or execute this file); the
terminal summary prints one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import json
import math
import sys
import time

import numpy as np
import pytest

from relgs import cli
from relgs import halfspace as hs
from relgs.checks import CheckContext, check_gradient, check_trace
from relgs.hamiltonian import Problem, apply_T_minus_m, energy, rel_diff, stationarity_residual
from relgs.minimizer import (
    dilation_energies,
    initial_guess,
    scan_mass,
    solve,
    subadditivity_check,
)
from relgs.potentials import PowerLaw
from relgs.spectral import Field, irfftn, lp_norm, make_grid, rfftn, set_strict_deterministic
from relgs.verify import (
    coercivity_threshold,
    decay_and_symmetry_diagnostics,
    field_corpus,
    kinetic_energy,
    rearrange,
    riesz_check,
)

crit = pytest.mark.criterion


def _band_limited(g, rng, count):
    # spectra supported on |k| <= k_max / 2, so products stay resolved
    out = []
    kmax = math.pi * g.n / (2 * g.L)
    mask = g.ksq_r <= (kmax / 2) ** 2
    for _ in range(count):
        spec = rfftn(rng.standard_normal(g.shape)) * mask
        out.append(Field(g, irfftn(spec, g.shape)))
    return out


def _newton(M):
    return Problem(N=3, m=1.0, eta=0.0, sigma=1.0, p=3.0, W=PowerLaw(1.0), M=M)


def _soliton2d(M=1.0):
    return Problem(N=2, m=1.0, eta=1.0, sigma=1.0, p=3.0, W=PowerLaw(0.5), M=M)


# -- 1 ----------------------------------------------------------------------------------

@crit(1, "spectral identities")
def test_c1_spectral_identities():
    t0 = time.perf_counter()
    g = make_grid(2, 6.0, 64)
    rng = np.random.default_rng(1)
    worst = 0.0
    for m in (0.0, 0.5, 1.0, 3.0):
        for w in _band_limited(g, rng, 10):
            tt = hs.apply_T(hs.apply_T(w, m), m).values
            ref = irfftn(w.rspec * (g.ksq_r + m * m), g.shape)
            worst = max(worst, np.linalg.norm(tt - ref) / np.linalg.norm(ref))
    # eigenrelations on plane waves: (T - m) e_k = (sqrt(|k|^2 + m^2) - m) e_k
    pb = Problem(N=2, m=0.7, eta=0.0, sigma=1.0, p=3.5, W=PowerLaw(1.0), M=1.0)
    X, Y = g.coords
    for jx, jy in [(1, 0), (3, 2), (7, -5), (15, 15)]:
        kx, ky = math.pi * jx / g.L, math.pi * jy / g.L
        w = Field(g, np.cos(kx * X + ky * Y))
        lam = math.sqrt(kx * kx + ky * ky + 0.49) - 0.7
        out = apply_T_minus_m(pb, w).values
        worst = max(worst, np.linalg.norm(out - lam * w.values) / (lam * np.linalg.norm(w.values)))
    elapsed = time.perf_counter() - t0
    print(f"criterion 1: worst rel err {worst:.3g}, {elapsed:.3f} s")
    assert worst <= 1e-11
    assert elapsed < 1.0


# -- 2 ----------------------------------------------------------------------------------

@crit(2, "extension identities")
@pytest.mark.parametrize("N, L, n", [(2, 6.0, 64), (3, 5.0, 24)])
def test_c2_extension(N, L, n):
    g = make_grid(N, L, n)
    pb = Problem(N=N, m=1.0, eta=0.5, sigma=1.0, p=3.5 if N == 2 else 3.0, W=PowerLaw(1.0), M=1.0)
    worst = 0.0
    for w in field_corpus(g, 50, seed=21, signed=True):
        q = hs.halfspace_norms(hs.extend(w, pb.m)).quadratic_part
        worst = max(worst, rel_diff(q, energy(pb, w).kinetic))
    violations = 0
    cs = pb.m * np.geomspace(1e-2, 1e2, 41)
    for w in field_corpus(g, 20, seed=22, signed=True):
        h1 = hs.halfspace_norms(hs.extend(w, pb.m)).h1_sq
        violations += sum(h1 > hs.competitor_h1_sq(w, pb.m, c) * (1 + 1e-14) for c in cs)
    print(f"criterion 2 (N={N}): worst rel diff {worst:.3g}, competitor violations {violations}")
    assert worst <= 1e-12
    assert violations == 0


# -- 3 ----------------------------------------------------------------------------------

@crit(3, "gradient correctness")
@pytest.mark.parametrize(
    "pb, grid",
    [
        (_soliton2d(), (2, 8.0, 32)),
        (Problem(N=2, m=1.0, eta=0.0, sigma=1.0, p=3.5, W=PowerLaw(1.0), M=1.0), (2, 8.0, 32)),
        (_newton(2.0), (3, 6.0, 16)),
        (Problem(N=3, m=0.0, eta=2.0, sigma=0.5, p=2.8, W=PowerLaw(0.5), M=1.0), (3, 6.0, 16)),
    ],
    ids=["2d-eta1", "2d-eta0", "3d-eta0", "3d-eta2-m0"],
)
def test_c3_gradient(pb, grid):
    rep = check_gradient(CheckContext(pb, make_grid(*grid), corpus_size=20, seed=3))
    print(f"criterion 3: worst margin {rep.worst_margin:.3g} over {rep.n_instances} pairs")
    assert rep.n_instances == 20
    assert rep.passed


# -- 4 ----------------------------------------------------------------------------------

@crit(4, "trace inequality and quadratic positivity")
@pytest.mark.parametrize("N, L, n", [(2, 6.0, 64), (3, 5.0, 16)])
def test_c4_trace(N, L, n):
    pb = Problem(N=N, m=1.0, eta=0.5, sigma=1.0, p=3.5 if N == 2 else 3.0, W=PowerLaw(1.0), M=1.0)
    rep = check_trace(CheckContext(pb, make_grid(N, L, n), corpus_size=100, seed=4))
    print(f"criterion 4 (N={N}): worst margin {rep.worst_margin:.3g}, p={rep.details['p']}, "
          f"unresolved={rep.details['unresolved']}")
    assert rep.n_instances == 100
    assert rep.details["p"] == [2.0, 2.5, 2 * N / (N - 1)]
    assert rep.details["unresolved"] == 0
    assert rep.passed


# -- 5 and 6 ------------------------------------------------------------------------------

INSTANCES = {
    "2d-alpha0.5": (_soliton2d(), (2, 20.0, 64), 4.0),
    "3d-newton": (_newton(2.0), (3, 8.0, 48), None),
    "3d-alpha0.5": (Problem(N=3, m=1.0, eta=1.0, sigma=1.0, p=2.8, W=PowerLaw(0.5), M=2.0), (3, 8.0, 48), None),
}


@pytest.fixture(scope="module")
def solved():
    out = {}
    for key, (pb, grid, width) in INSTANCES.items():
        g = make_grid(*grid)
        t0 = time.perf_counter()
        w0 = initial_guess(pb, g, width=width)
        rep = solve(pb, w0)
        out[key] = (pb, w0, rep, time.perf_counter() - t0)
    return out


@crit(5, "negativity of the infimum")
@pytest.mark.parametrize("key", list(INSTANCES))
def test_c5_negative_infimum(solved, key):
    pb, w0, rep, elapsed = solved[key]
    lams = np.geomspace(1e-3, 0.999, 80)
    t, _ = dilation_energies(pb, w0, lams, family="separable")
    print(f"criterion 5 ({key}): min t = {t.min():.4g} at lambda = {lams[np.argmin(t)]:.3g}; "
          f"solve {rep.status}, I = {rep.I_value:.8g}, {elapsed:.2f} s")
    assert np.any(t < 0)
    assert rep.converged and rep.I_value < 0
    assert elapsed < 120


@crit(6, "Euler-Lagrange equation and positive multiplier")
@pytest.mark.parametrize("key", list(INSTANCES))
def test_c6_euler_lagrange(solved, key):
    pb, _, rep, _ = solved[key]
    assert rep.converged
    res = stationarity_residual(pb, rep.w)
    print(f"criterion 6 ({key}): residual {res:.3g} (tol {rep.tol_res:.3g}), mu = {rep.mu:.8g}, "
          f"mu rel diff {rel_diff(rep.mu, rep.mu_alt):.3g}")
    assert res <= 10 * rep.tol_res
    assert pb.p <= 4 and rep.mu > 0
    assert rel_diff(rep.mu, rep.mu_alt) <= 1e-8


# -- 7 ----------------------------------------------------------------------------------

@crit(7, "subadditivity and concavity")
def test_c7_subadditivity():
    g = make_grid(2, 40.0, 128)
    masses = (1.0, 1.5, 2.0, 2.5, 3.0)
    pairs = [(2.0, 1.0), (2.5, 1.0), (2.5, 1.5), (3.0, 1.0), (3.0, 1.5), (3.0, 2.0)]
    rep = subadditivity_check(_soliton2d(), g, pairs, mass_grid=masses, init_width=4.0)
    for row in rep.pairs + rep.scaling + rep.concavity:
        print("criterion 7:", {k: (round(v, 8) if isinstance(v, float) else v) for k, v in row.items()})
    assert not rep.skipped
    assert len(rep.concavity) == 3
    for row in rep.pairs + rep.scaling:
        assert row["gap"] > row["margin"] > 0
    assert rep.passed


# -- 8 ----------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def scans():
    out = {}
    t0 = time.perf_counter()
    for key, (L, n) in {"base": (8.0, 48), "fine": (8.0, 64), "wide": (12.0, 72)}.items():
        out[key] = scan_mass(_newton(1.0), make_grid(3, L, n), 1.6, 3.2)
        print(f"criterion 8 scan {key} (L={L}, n={n}): bracket {out[key].bracket}")
    out["elapsed"] = time.perf_counter() - t0
    return out


@pytest.mark.slow
@crit(8, "mass-critical scan")
def test_c8_bracket_width(scans):
    for key in ("base", "fine", "wide"):
        assert scans[key].relative_width <= 0.05
    assert scans["elapsed"] <= 30 * 60


@pytest.mark.slow
@crit(8, "mass-critical scan")
@pytest.mark.parametrize("other", ["fine", "wide"])
def test_c8_bracket_stability(scans, other):
    a, b = scans["base"].midpoint, scans[other].midpoint
    print(f"criterion 8: midpoint base {a:.4g}, {other} {b:.4g}, shift {abs(b - a) / a:.3g}")
    assert abs(b - a) / a <= 0.10


@pytest.mark.slow
@crit(8, "mass-critical scan")
@pytest.mark.parametrize("key", ["base", "fine", "wide"])
def test_c8_coercivity_sign(scans, key):
    res = scans[key]
    lo, hi = res.bracket
    by_m = {e.M: e for e in res.entries}
    for M, expect in ((lo, True), (hi, False)):
        e = by_m[M]
        rep = coercivity_threshold(_newton(M), [e.report.w])
        print(f"criterion 8 ({key}): M={M:.4g} {e.classification}, threshold {rep.M_threshold:.4g}")
        assert rep.coercive is expect
        assert (e.classification == "subcritical") is expect


# -- 9 ----------------------------------------------------------------------------------

@pytest.mark.slow
@crit(9, "symmetry and decay")
@pytest.mark.parametrize(
    "pb, grids, width",
    [
        (_newton(2.0), ((3, 8.0, 48), (3, 12.0, 72)), None),
        (_soliton2d(), ((2, 40.0, 128), (2, 60.0, 192)), 4.0),
    ],
    ids=["3d-newton", "2d-alpha0.5"],
)
def test_c9_symmetry_decay(pb, grids, width):
    slopes = []
    for grid in grids:
        g = make_grid(*grid)
        rep = solve(pb, initial_guess(pb, g, width=width))
        assert rep.converged
        d = decay_and_symmetry_diagnostics(rep.w, pb.m, rep.mu)
        print(f"criterion 9 (L={g.L}, n={g.n}): angular defect {d.angular_defect:.3g}, "
              f"monotonicity {d.monotonicity_score}, tail slope {d.tail_slope:.4g}")
        assert d.angular_defect <= 1e-3
        assert d.monotonicity_score == 1.0
        assert d.tail_slope < 0 and d.slope_reliable
        slopes.append(d.tail_slope)
    assert abs(slopes[1] - slopes[0]) / abs(slopes[0]) <= 0.15


# -- 10 ---------------------------------------------------------------------------------

@crit(10, "rearrangement suite")
def test_c10_multiset_identities():
    g = make_grid(2, 10.0, 256)
    rng = np.random.default_rng(10)
    fields = field_corpus(g, 25, seed=10, signed=True) + [Field(g, rng.standard_normal(g.shape)) for _ in range(25)]
    for f in fields:
        fs = rearrange(f)
        a = Field(g, np.abs(f.values))
        assert np.array_equal(np.sort(a.values.ravel()), np.sort(fs.values.ravel()))
        assert np.array_equal(rearrange(fs).values, fs.values)
        for p in (1.0, 2.0, 3.0, 4.0, np.inf):
            assert lp_norm(fs, p) == lp_norm(a, p)


@crit(10, "rearrangement suite")
def test_c10_riesz():
    rep = riesz_check(PowerLaw(1.0), field_corpus(make_grid(2, 10.0, 1024), 50, seed=11))
    print(f"criterion 10: Riesz worst margin {rep.worst_margin:.3g} over {rep.n_instances} fields")
    assert rep.n_instances == 50
    assert rep.worst_margin >= -1e-6


@crit(10, "rearrangement suite")
def test_c10_kinetic_defect_refinement():
    defects = []
    for n in (128, 256, 512, 1024):
        corpus = field_corpus(make_grid(2, 10.0, n), 20, seed=12)
        d = max(max(kinetic_energy(1.0, rearrange(f)) / kinetic_energy(1.0, f) - 1.0, 0.0) for f in corpus)
        defects.append(d)
    print(f"criterion 10: kinetic defects over n = 128..1024: {[f'{d:.3g}' for d in defects]}")
    assert all(b < a for a, b in zip(defects, defects[1:]))


# -- 11 ---------------------------------------------------------------------------------

@crit(11, "determinism")
def test_c11_solve_reproducible():
    set_strict_deterministic(True)
    try:
        pb = _soliton2d()
        g = make_grid(2, 40.0, 128)
        runs = [solve(pb, initial_guess(pb, g, width=4.0), seed=0) for _ in range(2)]
    finally:
        set_strict_deterministic(False)
    a, b = (json.dumps(r.to_dict(), sort_keys=True) for r in runs)
    assert a == b
    assert runs[0].w.values.tobytes() == runs[1].w.values.tobytes()


@crit(11, "determinism")
def test_c11_scan_csv_reproducible(tmp_path):
    text = """
[problem]
N = 3
eta = 0.0
p = 3.0
[potential]
kind = power
alpha = 1.0
[grid]
L = 8.0
n = 32
[scan]
M_lo = 1.6
M_hi = 3.2
[output]
dir = {out}
[run]
strict_deterministic = true
"""
    cfg = tmp_path / "scan.ini"
    cfg.write_text(text.format(out=tmp_path / "out"))
    blobs = []
    for _ in range(2):
        assert cli.main(["scan-mass", str(cfg)]) == cli.EXIT_OK
        blobs.append(next((tmp_path / "out").glob("scan-*[0-9a-f].csv")).read_bytes())
    assert blobs[0] == blobs[1]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
