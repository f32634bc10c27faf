"""vortexlab: desk-scale diagnostics for 3D incompressible Navier-Stokes fields.

A pseudo-spectral periodic solver plus the measurable constructions built on
top of it: Lorentz norms on space-time samples, flow-adapted maximal
functions over skewed cylinders, localized vorticity variables and their
source terms, trajectory-centered rescaling, and level-set truncation
energies.
"""

__version__ = "0.1.0"

from .grid import GridField, GridSpec, SpectralField  # noqa: F401
