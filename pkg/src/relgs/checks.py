"""Named verification checks dispatched by ``relgs verify``.

Each check takes a problem, a grid and corpus settings and returns a
:class:`~relgs.verify.VerificationReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import halfspace as hs
from .hamiltonian import Problem, energy, energy_and_gradient, rel_diff
from .minimizer import SolveOptions, initial_guess, solve
from .potentials import PowerLaw, check_scaling_hypothesis as scaling_hypothesis
from .spectral import Grid, inner, irfftn, make_grid, mass
from .verify import (
    VerificationReport,
    coercivity_threshold,
    conv_estimate_check,
    decay_and_symmetry_diagnostics,
    field_corpus,
    rearrangement_check,
    riesz_check,
    weak_young_check,
)


@dataclass
class CheckContext:
    pb: Problem
    grid: Grid
    corpus_size: int = 20
    seed: int = 0
    solve_options: SolveOptions = None
    init_width: float = None

    def corpus(self, signed: bool = False, grid: Grid = None) -> list:
        return field_corpus(grid or self.grid, self.corpus_size, self.seed, signed=signed)

    def refined(self) -> Grid:
        g = self.grid
        return make_grid(g.N, g.L, 2 * g.n)


def _worst(margins, tol=0.0):
    i = int(np.argmin(margins))
    return float(margins[i]), i, margins[i] >= -tol


def check_t_squared(ctx: CheckContext, tol: float = 1e-11) -> VerificationReport:
    """``T(T w) = (-Lap + m^2) w`` on band-limited fields."""
    m = ctx.pb.m
    margins = []
    corpus = ctx.corpus(signed=True)
    for w in corpus:
        tt = hs.apply_T(hs.apply_T(w, m), m).values
        ref = irfftn(w.rspec * (w.grid.ksq_r + m * m), w.grid.shape)
        err = float(np.linalg.norm(tt - ref) / np.linalg.norm(ref))
        margins.append(tol - err)
    worst, i, ok = _worst(margins)
    return VerificationReport("T-squared", len(corpus), worst, None, ok, {"tol": tol}, corpus[i])


def check_extension(ctx: CheckContext, tol: float = 1e-12) -> VerificationReport:
    """Quadratic part of the extension equals K; the extension beats ``exp(-c x) w``."""
    pb = ctx.pb
    if not pb.m > 0:
        return VerificationReport("extension", 0, None, None, True, {"skipped": "needs m > 0"})
    corpus = ctx.corpus(signed=True)
    margins, violations = [], 0
    cs = pb.m * np.geomspace(0.1, 10.0, 21)
    for w in corpus:
        ef = hs.extend(w, pb.m)
        nrm = hs.halfspace_norms(ef)
        K = energy(pb, w).kinetic
        margins.append(tol - rel_diff(nrm.quadratic_part, K))
        for c in cs:
            if nrm.h1_sq > hs.competitor_h1_sq(w, pb.m, c) * (1 + 1e-14):
                violations += 1
    worst, i, ok = _worst(margins)
    return VerificationReport(
        "extension", len(corpus), worst, None, ok and violations == 0,
        {"tol": tol, "competitor_violations": violations}, corpus[i],
    )


def check_trace(ctx: CheckContext, tol: float = 1e-6) -> VerificationReport:
    """Trace inequality for ``p in {2, 2.5, 2N/(N-1)}`` and quadratic positivity."""
    pb = ctx.pb
    if not pb.m > 0:
        return VerificationReport("trace", 0, None, None, True, {"skipped": "needs m > 0"})
    corpus = ctx.corpus(signed=True)
    ps = (2.0, 2.5, pb.critical_exponent)
    margins, unresolved = [], 0
    owner = []
    for i, w in enumerate(corpus):
        ef = hs.extend(w, pb.m)
        x, wt = hs.default_x_quadrature(ef, pb.m)
        for p in ps:
            rep = hs.trace_inequality_check(ef, p, x, wt, tol)
            unresolved += not rep.resolved
            margins.append(rep.margin)
            owner.append(i)
        margins.append(hs.quadratic_positivity_margin(ef))
        owner.append(i)
    worst, j, ok = _worst(margins, tol)
    return VerificationReport(
        "trace", len(corpus), worst, None, ok,
        {"tol": tol, "p": list(ps), "unresolved": unresolved}, corpus[owner[j]],
    )


def check_gradient(ctx: CheckContext, tol: float = 1e-6) -> VerificationReport:
    """Central finite differences of the energy against ``<gradient, z>``."""
    pb = ctx.pb
    ws = ctx.corpus(signed=True)
    zs = field_corpus(ctx.grid, len(ws), ctx.seed + 7, signed=True)
    margins = []
    for w, z in zip(ws, zs):
        _, gr = energy_and_gradient(pb, w)
        exact = inner(gr, z)
        eps = 1e-5 * math.sqrt(mass(w) / mass(z))
        ep = energy(pb, w + z * eps).total
        em = energy(pb, w - z * eps).total
        fd = (ep - em) / (2 * eps)
        scale = max(abs(exact), 1e-12 * math.sqrt(mass(gr) * mass(z)))
        margins.append(tol - abs(fd - exact) / scale)
    worst, i, ok = _worst(margins)
    return VerificationReport("gradient", len(ws), worst, None, ok, {"tol": tol}, ws[i])


def check_weak_young(ctx: CheckContext) -> VerificationReport:
    pb = ctx.pb
    if not math.isfinite(pb.q) or pb.q <= 1:
        return VerificationReport("weak-young", 0, None, None, True, {"skipped": f"q = {pb.q}"})
    fine = ctx.refined()
    a, b = ctx.corpus(), field_corpus(ctx.grid, ctx.corpus_size, ctx.seed + 3)
    af, bf = ctx.corpus(grid=fine), field_corpus(fine, ctx.corpus_size, ctx.seed + 3)
    return weak_young_check(pb.W, pb.q, list(zip(a, b)), refined_corpus=list(zip(af, bf)))


def check_conv_estimate(ctx: CheckContext) -> VerificationReport:
    if not math.isfinite(ctx.pb.q):
        return VerificationReport("conv-estimate", 0, None, None, True, {"skipped": "q = inf"})
    return conv_estimate_check(ctx.pb, ctx.corpus(), ctx.corpus(grid=ctx.refined()))


def check_coercivity(ctx: CheckContext) -> VerificationReport:
    """Signed margin ``(M_threshold - M) / M_threshold`` of the smallness condition."""
    pb = ctx.pb
    corpus = ctx.corpus() if pb.eta == 0 and pb.q == pb.N else ()
    rep = coercivity_threshold(pb, corpus)
    thr = rep.M_threshold
    margin = 1.0 if math.isinf(thr) else (thr - pb.M) / thr
    det = {"M": pb.M, "M_threshold": thr if math.isfinite(thr) else None,
           "M_threshold_composite": rep.M_threshold_composite if math.isfinite(rep.M_threshold_composite) else None,
           "reason": rep.reason}
    return VerificationReport("coercivity", len(corpus), margin, rep.fitted_C, rep.coercive, det)


def check_rearrangement(ctx: CheckContext) -> VerificationReport:
    return rearrangement_check(ctx.corpus(), ctx.pb.m)


def check_riesz(ctx: CheckContext) -> VerificationReport:
    W = ctx.pb.W
    if not getattr(W, "nonincreasing", True):
        return VerificationReport("riesz", 0, None, None, True, {"skipped": "kernel not nonincreasing"})
    return riesz_check(W, ctx.corpus())


def check_scaling(ctx: CheckContext) -> VerificationReport:
    """``W(r / lam) >= lam^alpha W(r)`` with ``alpha = N / q``."""
    pb = ctx.pb
    alpha = pb.W.alpha if isinstance(pb.W, PowerLaw) else (pb.N / pb.q if math.isfinite(pb.q) else 0.0)
    lams = np.linspace(0.05, 0.95, 19)
    radii = np.geomspace(1e-3, ctx.grid.L * math.sqrt(pb.N), 60)
    rep = scaling_hypothesis(pb.W, alpha, lams, radii)
    det = {"alpha": alpha, "violations": len(rep.violations), "worst_sample": rep.worst_sample}
    return VerificationReport("scaling-hypothesis", rep.n_samples, rep.worst_margin, None, rep.holds, det)


def check_decay(ctx: CheckContext) -> VerificationReport:
    """Solve, then require angular defect <= 1e-3, monotonicity 1 and a negative tail slope."""
    pb = ctx.pb
    rep = solve(pb, initial_guess(pb, ctx.grid, width=ctx.init_width), ctx.solve_options)
    if not rep.converged:
        return VerificationReport("decay", 1, None, None, False, {"status": rep.status}, rep.w)
    d = decay_and_symmetry_diagnostics(rep.w, pb.m, rep.mu)
    margins = [1e-3 - d.angular_defect, d.monotonicity_score - 1.0]
    if getattr(pb.W, "nonincreasing", True):
        margins.append(-d.tail_slope if math.isfinite(d.tail_slope) else -math.inf)
    worst = min(margins)
    return VerificationReport("decay", 1, worst, None, worst >= 0, d.as_dict(), rep.w)


CHECKS = {
    "T-squared": check_t_squared,
    "extension": check_extension,
    "trace": check_trace,
    "gradient": check_gradient,
    "weak-young": check_weak_young,
    "conv-estimate": check_conv_estimate,
    "coercivity": check_coercivity,
    "rearrangement": check_rearrangement,
    "riesz": check_riesz,
    "scaling-hypothesis": check_scaling,
    "decay": check_decay,
}

EXTENSION_CHECKS = ("T-squared", "extension", "trace")


def run_check(name: str, ctx: CheckContext) -> VerificationReport:
    try:
        fn = CHECKS[name]
    except KeyError:
        raise KeyError(f"unknown check {name!r}; known: {', '.join(CHECKS)}") from None
    return fn(ctx)
