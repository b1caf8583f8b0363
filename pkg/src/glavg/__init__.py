"""Spectral Galerkin simulator for a slow-fast stochastic Ginzburg-Landau
system driven by cylindrical symmetric alpha-stable noise, with ergodic
drift averaging, block-freezing diagnostics and Monte-Carlo convergence
studies."""

__version__ = "0.1.0"

from .basis import (  # noqa: F401
    PhysicalGrid,
    SpectralField,
    apply_N,
    eigenvalues,
    from_physical,
    semigroup_apply,
    sobolev_norm,
    to_physical,
)
from .config import SystemConfig, parse_config  # noqa: F401
from .couplings import make_coupling  # noqa: F401
from .sim import simulate_pair, khasminskii_pair, stopping_time  # noqa: F401
from .stable import (  # noqa: F401
    NoiseSpectrum,
    RngStream,
    convolution_step,
    sample_sas,
    validate_spectrum,
)
