"""Spectral simulator and inequality lab for the density-matrix NLS of fermions near the Fermi sea."""
__version__ = "0.1.0"

from .grid import GridSpec, build_grid  # noqa: E402
from .kernel import KernelOperator, density, ensemble, fermi_sea, make_perturbation  # noqa: E402
from .dynamics import SolverError, Trajectory, evolve_rk4, picard_solve  # noqa: E402

__all__ = ["GridSpec", "build_grid", "KernelOperator", "density", "ensemble", "fermi_sea",
           "make_perturbation", "SolverError", "Trajectory", "evolve_rk4", "picard_solve"]
