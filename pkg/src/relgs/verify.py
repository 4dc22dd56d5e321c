"""Numerical checks of the functional inequalities and symmetry properties.

Constants that are left unspecified in the analysis are never assumed: each
inequality check fits the smallest constant over a corpus of fields and, when
a refined corpus is supplied, requires the fit to be stable within a factor 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import Problem, energy, kinetic_symbol_sq
from .potentials import symbol_on_grid, weak_lq_norm
from .spectral import Field, Grid, lp_norm, mass, spectral_quadratic


@dataclass
class VerificationReport:
    check: str
    n_instances: int
    worst_margin: float | None
    fitted_C: float | None
    passed: bool
    details: dict = field(default_factory=dict)
    worst_instance: object = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "n_instances": self.n_instances,
            "worst_margin": _finite_or_none(self.worst_margin),
            "fitted_C": _finite_or_none(self.fitted_C),
            "pass": bool(self.passed),
        }


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _stability_margin(c1: float, c2: float) -> float:
    """``log 2 - |log(c2/c1)|``: nonnegative iff the constants agree within 2x."""
    if not (c1 > 0 and c2 > 0):
        return -math.inf
    return math.log(2.0) - abs(math.log(c2 / c1))


def hartree_term(W, w: Field) -> float:
    sym = symbol_on_grid(W, w.grid)
    rho = w.values * w.values
    return float(np.sum(sym.convolve(rho) * rho)) * w.grid.cell_volume


# -- weak Young ---------------------------------------------------------------

def weak_young_check(W, q: float, corpus, p: float = None, r: float = None, refined_corpus=None):
    """Fit C in ``int f (W * h) <= C |W|_{q,w} |f|_p |h|_r`` over pairs ``(f, h)``.

    Exponents default to the symmetric choice ``p = r = 2q / (2q - 1)``.
    """
    if p is None and r is None:
        p = r = 2.0 * q / (2.0 * q - 1.0)
    elif r is None:
        r = 1.0 / (2.0 - 1.0 / q - 1.0 / p)
    elif p is None:
        p = 1.0 / (2.0 - 1.0 / q - 1.0 / r)
    for e in (p, q, r):
        if not 1 < e < math.inf:
            raise ValueError(f"weak Young exponents must lie in (1, inf), got p={p}, q={q}, r={r}")
    if abs(1 / q + 1 / p + 1 / r - 2) > 1e-12:
        raise ValueError("exponents must satisfy 1/q + 1/p + 1/r = 2")

    def fit(pairs):
        best, worst_i, ratios = 0.0, None, []
        for i, (f, h) in enumerate(pairs):
            N = f.grid.N
            wn = weak_lq_norm(W, q, N)
            sym = symbol_on_grid(W, f.grid)
            lhs = float(np.sum(f.values * sym.convolve(h.values))) * f.grid.cell_volume
            rhs = wn * lp_norm(f, p) * lp_norm(h, r)
            ratio = lhs / rhs if rhs > 0 else 0.0
            ratios.append(ratio)
            if ratio > best:
                best, worst_i = ratio, i
        return best, worst_i, ratios

    corpus = list(corpus)
    C, wi, ratios = fit(corpus)
    details = {"p": p, "q": q, "r": r, "ratios": ratios}
    margin = None
    passed = math.isfinite(C)
    if refined_corpus is not None:
        C2, _, ratios2 = fit(list(refined_corpus))
        details["fitted_C_refined"] = C2
        margin = _stability_margin(C, C2)
        passed = passed and margin >= 0
    worst = corpus[wi][0] if wi is not None else None
    return VerificationReport("weak-young", len(corpus), margin, C, passed, details, worst)


# -- convolution estimates ----------------------------------------------------

def conv_exponents(p: float, q: float) -> tuple[float, float]:
    """Exponents ``(4 - e, e)`` of |w|_2 and |w|_p with ``e = 2p / (q (p - 2))``."""
    e = 2.0 * p / (q * (p - 2.0))
    a, b = 4.0 - e, e
    assert abs(a + b - 4.0) < 1e-14
    return a, b


def conv_estimate_ratio(pb: Problem, w: Field, weak_norm: float = None) -> float:
    """``D / (|W|_{q,w} |w|_2^(4-e) |w|_p^e)``; critical case uses ``M |w|_{2#}^2``."""
    wn = weak_lq_norm(pb.W, pb.q, pb.N) if weak_norm is None else weak_norm
    D = energy(pb, w).hartree
    if pb.q == pb.N:
        rhs = wn * mass(w) * lp_norm(w, pb.critical_exponent) ** 2
    else:
        a, b = conv_exponents(pb.p, pb.q)
        rhs = wn * lp_norm(w, 2.0) ** a * lp_norm(w, pb.p) ** b
    return D / rhs


def conv_estimate_check(pb: Problem, corpus, refined_corpus=None) -> VerificationReport:
    wn = weak_lq_norm(pb.W, pb.q, pb.N)
    corpus = list(corpus)
    ratios = [conv_estimate_ratio(pb, w, wn) for w in corpus]
    i = int(np.argmax(ratios))
    C = ratios[i]
    details = {"weak_norm": wn, "ratios": ratios, "critical": pb.q == pb.N}
    margin = None
    passed = bool(np.isfinite(C))
    if refined_corpus is not None:
        C2 = max(conv_estimate_ratio(pb, w, wn) for w in refined_corpus)
        details["fitted_C_refined"] = C2
        margin = _stability_margin(C, C2)
        passed = passed and margin >= 0
    return VerificationReport("conv-estimate", len(corpus), margin, C, passed, details, corpus[i])


def half_laplacian_form(w: Field) -> float:
    """``<w, |grad| w>``."""
    return spectral_quadratic(w, w.grid.kabs_r)


@dataclass
class CoercivityReport:
    coercive: bool
    M: float
    M_threshold: float
    M_threshold_composite: float
    fitted_C: float | None
    trace_constant: float | None
    weak_norm: float
    reason: str


def coercivity_threshold(pb: Problem, corpus=()) -> CoercivityReport:
    """Smallness condition on the mass under which the energy is coercive.

    With ``K >= <w,|grad|w> - m M`` the energy obeys

        E >= <w,|grad|w> (1/2 - sigma C' M / 4) - m M / 2,
        D <= C' M <w,|grad|w>,

    so it is bounded below and coercive when ``M < 2 / (sigma C')``.  ``C'``
    is fitted directly over the corpus; the composite threshold instead uses
    the product of the fitted convolution constant, the weak norm of W and the
    fitted trace-Sobolev constant ``|w|_{2#}^2 <= S <w,|grad|w>``, and is never
    larger.
    """
    wn = weak_lq_norm(pb.W, pb.q, pb.N)
    if pb.eta > 0 or pb.q > pb.N:
        why = "eta > 0" if pb.eta > 0 else f"q = {pb.q:g} > N: exponent 2N/q < 2"
        return CoercivityReport(True, pb.M, math.inf, math.inf, None, None, wn, why)
    corpus = list(corpus)
    if not corpus:
        raise ValueError("critical case needs a corpus of fields to fit constants")
    c_direct = c_conv = s_trace = 0.0
    for w in corpus:
        M = mass(w)
        hl = half_laplacian_form(w)
        D = energy(pb, w).hartree
        c_direct = max(c_direct, D / (M * hl))
        l2s = lp_norm(w, pb.critical_exponent) ** 2
        c_conv = max(c_conv, D / (wn * M * l2s))
        s_trace = max(s_trace, l2s / hl)
    thr = 2.0 / (pb.sigma * c_direct)
    thr_c = 2.0 / (pb.sigma * c_conv * wn * s_trace)
    coercive = pb.M < thr
    why = f"M {'<' if coercive else '>='} 2/(sigma C') = {thr:.6g}"
    return CoercivityReport(coercive, pb.M, thr, thr_c, c_direct, s_trace, wn, why)


# -- rearrangement --------------------------------------------------------------

def _cell_order(g: Grid) -> np.ndarray:
    # stable sort on exact integer radii: ties broken by flat (lexicographic) index
    return np.argsort(g.index_r2.ravel(), kind="stable")


def rearrange(f: Field) -> Field:
    """Discrete symmetric decreasing rearrangement about the origin cell.

    The multiset of values is kept; the largest values go to the cells
    closest to the origin.
    """
    g = f.grid
    vals = np.abs(f.values).ravel()
    out = np.empty_like(vals)
    out[_cell_order(g)] = np.sort(vals)[::-1]
    return Field(g, out.reshape(g.shape))


def kinetic_energy(m: float, w: Field) -> float:
    return spectral_quadratic(w, kinetic_symbol_sq(m, w.grid.ksq_r))


def rearrangement_check(corpus, m: float, ps=(1.0, 2.0, 3.0, 4.0), tol_kinetic: float = 1e-3):
    """Exact multiset identities plus the kinetic-energy decrease (with tolerance)."""
    corpus = list(corpus)
    worst_k, worst_i = math.inf, None
    exact = True
    for i, f in enumerate(corpus):
        fs = rearrange(f)
        a = np.sort(np.abs(f.values).ravel())
        if not np.array_equal(a, np.sort(fs.values.ravel())):
            exact = False
        if not np.array_equal(rearrange(fs).values, fs.values):
            exact = False
        for p in ps:
            if lp_norm(fs, p) != lp_norm(Field(f.grid, np.abs(f.values)), p):
                exact = False
        k0, k1 = kinetic_energy(m, f), kinetic_energy(m, fs)
        margin = (k0 * (1 + tol_kinetic) - k1) / k0 if k0 > 0 else 0.0
        if margin < worst_k:
            worst_k, worst_i = margin, i
    passed = exact and worst_k >= 0
    det = {"multiset_exact": exact}
    return VerificationReport(
        "rearrangement", len(corpus), worst_k, None, passed, det,
        corpus[worst_i] if worst_i is not None else None,
    )


def riesz_check(W, corpus, tol: float = 1e-6) -> VerificationReport:
    """``D(w*) >= D(w) - tol |D(w)|`` for a radial nonincreasing kernel."""
    if not getattr(W, "nonincreasing", True):
        raise ValueError("Riesz check needs a radially nonincreasing kernel")
    corpus = list(corpus)
    worst, worst_i = math.inf, None
    for i, w in enumerate(corpus):
        d0 = hartree_term(W, w)
        d1 = hartree_term(W, rearrange(w))
        margin = (d1 - d0) / abs(d0) if d0 != 0 else d1 - d0
        if margin < worst:
            worst, worst_i = margin, i
    return VerificationReport(
        "riesz", len(corpus), worst, None, worst >= -tol, {},
        corpus[worst_i] if worst_i is not None else None,
    )


# -- decay and symmetry ---------------------------------------------------------

@dataclass
class RadialProfile:
    radius: np.ndarray
    average: np.ndarray
    count: np.ndarray


def radial_profile(w: Field) -> RadialProfile:
    """Averages over exact-radius classes (cells sharing |y| exactly)."""
    g = w.grid
    r2 = g.index_r2.ravel()
    keys, inv = np.unique(r2, return_inverse=True)
    cnt = np.bincount(inv)
    avg = np.bincount(inv, weights=w.values.ravel()) / cnt
    return RadialProfile(g.h * np.sqrt(keys.astype(float)), avg, cnt)


def shell_profile(w: Field, width: float = None) -> RadialProfile:
    """Averages over shells ``k width <= |y| < (k + 1) width``; ``width`` defaults to ``h``.

    Empty shells are dropped; ``radius`` is the mean radius of each shell.
    """
    g = w.grid
    width = g.h if width is None else float(width)
    r = g.h * np.sqrt(g.index_r2.ravel().astype(float))
    idx = np.floor(r / width + 1e-12).astype(np.int64)
    cnt = np.bincount(idx)
    keep = cnt > 0
    rad = np.bincount(idx, weights=r)[keep] / cnt[keep]
    avg = np.bincount(idx, weights=w.values.ravel())[keep] / cnt[keep]
    return RadialProfile(rad, avg, cnt[keep])


def radialize(w: Field) -> Field:
    g = w.grid
    r2 = g.index_r2.ravel()
    _, inv = np.unique(r2, return_inverse=True)
    avg = np.bincount(inv, weights=w.values.ravel()) / np.bincount(inv)
    return Field(g, avg[inv].reshape(g.shape))


@dataclass
class DecayDiagnostics:
    tail_slope: float
    slope_reliable: bool
    monotonicity_score: float
    angular_defect: float
    predicted_rate: float | None

    def as_dict(self) -> dict:
        return {
            "tail_slope": _finite_or_none(self.tail_slope),
            "slope_reliable": self.slope_reliable,
            "monotonicity_score": self.monotonicity_score,
            "angular_defect": self.angular_defect,
            "predicted_rate": _finite_or_none(self.predicted_rate),
        }


def decay_and_symmetry_diagnostics(
    w: Field, m: float = None, mu: float = None, window=(0.25, 0.5), shell_tol: float = 1e-9
) -> DecayDiagnostics:
    """Tail slope of ``log w(r)``, radial monotonicity and angular defect.

    The slope is fitted over ``r in [L/4, L/2]`` on width-``h`` shell
    averages.  Monotonicity is scored on shells with ``r <= L/2`` whose
    averages sit above the noise floor; increases below ``shell_tol * max``
    are tolerated.  ``predicted_rate`` is ``sqrt(2 m mu - mu^2)``, the decay
    rate of the linearised equation, when ``0 < mu < 2m``.
    """
    g = w.grid
    prof = shell_profile(w)
    top = float(np.max(np.abs(w.values)))
    floor = 1e-13 * top
    lo, hi = window[0] * g.L, window[1] * g.L
    sel = (prof.radius >= lo) & (prof.radius <= hi) & (prof.average > floor)
    if np.count_nonzero(sel) >= 3:
        slope = float(np.polyfit(prof.radius[sel], np.log(prof.average[sel]), 1)[0])
        reliable = bool(np.all(prof.average[(prof.radius >= lo) & (prof.radius <= hi)] > floor))
    else:
        slope, reliable = math.nan, False
    inner_sel = (prof.radius <= hi) & (prof.average > 1e-12 * top)
    a = prof.average[inner_sel]
    if a.size >= 2:
        steps = np.diff(a)
        score = float(np.mean(steps <= shell_tol * top))
    else:
        score = 1.0
    nrm = math.sqrt(mass(w))
    defect = math.sqrt(mass(w - radialize(w))) / nrm if nrm > 0 else 0.0
    rate = None
    if m is not None and mu is not None and 0 < mu < 2 * m:
        rate = math.sqrt(2 * m * mu - mu * mu)
    return DecayDiagnostics(slope, reliable, score, defect, rate)


# -- corpora ----------------------------------------------------------------------

@dataclass(frozen=True)
class Bump:
    amplitude: float
    center: tuple
    width: float


def random_bumps(rng: np.random.Generator, N: int, L: float, max_bumps: int = 3,
                 signed: bool = False, min_width: float = None) -> list:
    """Grid-independent parameters of a sum of Gaussian bumps inside ``[-L/2, L/2]^N``."""
    lo = L / 12 if min_width is None else min_width
    out = []
    for _ in range(int(rng.integers(1, max_bumps + 1))):
        a = float(rng.uniform(0.5, 1.5))
        if signed and rng.random() < 0.4:
            a = -a
        c = tuple(float(x) for x in rng.uniform(-L / 2, L / 2, N))
        s = float(rng.uniform(lo, L / 6))
        out.append(Bump(a, c, s))
    return out


def render(g: Grid, bumps) -> Field:
    vals = np.zeros(g.shape)
    for b in bumps:
        r2 = sum((x - c) ** 2 for x, c in zip(g.coords, b.center))
        vals += b.amplitude * np.exp(-r2 / (2.0 * b.width**2))
    return Field(g, vals)


def field_corpus(g: Grid, count: int, seed: int = 0, signed: bool = False,
                 min_width: float = None) -> list:
    """``count`` fields from a seeded generator; the same seed and ``L`` give
    the same underlying functions at every resolution."""
    rng = np.random.default_rng(seed)
    return [
        render(g, random_bumps(rng, g.N, g.L, signed=signed, min_width=min_width))
        for _ in range(count)
    ]
