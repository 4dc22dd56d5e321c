"""Pseudo-spectral ground states of the pseudo-relativistic Hartree equation."""

from .hamiltonian import EnergyBreakdown, Problem, ProblemError, energy, gradient, lagrange_multiplier
from .minimizer import SolveOptions, SolveReport, dilation_probe, initial_guess, scan_mass, solve
from .potentials import PowerLaw, TabulatedRadial, Yukawa, weak_lq_norm
from .spectral import Field, Grid, make_grid, mass, rescale_mass

__version__ = "0.1.0"

__all__ = [
    "EnergyBreakdown",
    "Field",
    "Grid",
    "PowerLaw",
    "Problem",
    "ProblemError",
    "SolveOptions",
    "SolveReport",
    "TabulatedRadial",
    "Yukawa",
    "dilation_probe",
    "energy",
    "gradient",
    "initial_guess",
    "lagrange_multiplier",
    "make_grid",
    "mass",
    "rescale_mass",
    "scan_mass",
    "solve",
    "weak_lq_norm",
]
