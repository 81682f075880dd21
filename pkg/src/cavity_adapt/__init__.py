"""Adaptive multifrequency self-ordering of scatterers in a lossy cavity.

Dimensionless units throughout: hbar = 1 and the fundamental wavenumber
k = 1, so the fundamental wavelength is 2*pi and the particle mass is
m = 1/(2*omega_R). Rates (kappa, U0, delta_c, eta, friction) and inverse
times share one scale declared per configuration.
"""

from cavity_adapt.model import (
    ConfigError,
    Equilibrium,
    IlluminationPattern,
    SystemParams,
    SystemState,
    Trajectory,
    build_system,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Equilibrium",
    "IlluminationPattern",
    "SystemParams",
    "SystemState",
    "Trajectory",
    "build_system",
    "__version__",
]
