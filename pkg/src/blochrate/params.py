"""Physical parameters of a driven two-level atom and their closed-form algebra.

Rates are expressed in units where time is measured in 1/A (the spontaneous
decay rate), so A=1 in typical runs and SI enters only through DipoleParams.
The field is resonant with the atomic transition; detuned spectra are handled
by the tabulated-spectrum path in the analysis module.

Symbols used throughout the package:

    a           spontaneous inversion decay rate (> 0)
    gamma_dc    dephasing collision rate (>= 0)
    delta       FWHM of the Lorentzian light spectrum; also the phase
                diffusion coefficient of the stochastic field model
    omega0      Rabi frequency magnitude (>= 0)
    gamma_perp  coherence decay rate, a/2 + gamma_dc
    gamma_eff   effective coherence decay under broadband driving,
                gamma_perp + delta/2
    zeta        overlap of the light spectrum with the atomic lineshape,
                delta/(delta + 2*gamma_perp) for the resonant Lorentzian
    bw21        stimulated rate coefficient, omega0**2/delta
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import constants


class CoherentLimitError(ValueError):
    """Raised when a quantity undefined at delta=0 (coherent light) is requested."""


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class SystemParams:
    """Rates defining one simulation scenario. Immutable; shared freely across workers."""

    a: float
    delta: float
    omega0: float
    gamma_dc: float = 0.0

    def __post_init__(self) -> None:
        for name in ("a", "delta", "omega0", "gamma_dc"):
            _require_finite(name, getattr(self, name))
        if self.a <= 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.delta < 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")
        if self.omega0 < 0:
            raise ValueError(f"omega0 must be non-negative, got {self.omega0}")
        if self.gamma_dc < 0:
            raise ValueError(f"gamma_dc must be non-negative, got {self.gamma_dc}")

    @property
    def gamma_perp(self) -> float:
        return 0.5 * self.a + self.gamma_dc

    @property
    def gamma_eff(self) -> float:
        return self.gamma_perp + 0.5 * self.delta

    @property
    def zeta(self) -> float:
        """Spectral overlap coefficient in [0, 1); 0 in the coherent limit."""
        return self.delta / (self.delta + 2.0 * self.gamma_perp)

    @property
    def bw21(self) -> float:
        """Stimulated rate coefficient omega0**2/delta. Undefined for coherent light."""
        if self.delta == 0:
            raise CoherentLimitError(
                "bw21 is undefined in the coherent limit (delta=0); "
                "work with omega0 directly"
            )
        return self.omega0 ** 2 / self.delta

    @property
    def zeta_bw21(self) -> float:
        # zeta*bw21 written in its cancelled form: finite for every delta >= 0.
        return self.omega0 ** 2 / (self.delta + 2.0 * self.gamma_perp)


@dataclass(frozen=True)
class DerivedParams:
    """Snapshot of every derived rate, as returned by derive()."""

    gamma_perp: float
    gamma_eff: float
    zeta: float
    bw21: float
    zeta_bw21: float


def derive(params: SystemParams) -> DerivedParams:
    """Evaluate all derived quantities of ``params`` at once.

    Raises CoherentLimitError when delta=0, where bw21 does not exist;
    callers in that regime should use omega0 directly.
    """
    return DerivedParams(
        gamma_perp=params.gamma_perp,
        gamma_eff=params.gamma_eff,
        zeta=params.zeta,
        bw21=params.bw21,
        zeta_bw21=params.zeta_bw21,
    )


@dataclass(frozen=True)
class DipoleParams:
    """SI-side description of the transition: dipole moment and Bohr frequency.

    mu is the transition dipole magnitude in C*m, omega21 the transition
    angular frequency in rad/s. Only the conversion helpers below use SI.
    """

    mu: float
    omega21: float

    def __post_init__(self) -> None:
        _require_finite("mu", self.mu)
        _require_finite("omega21", self.omega21)
        if self.mu < 0:
            raise ValueError(f"mu must be non-negative, got {self.mu}")
        if self.omega21 <= 0:
            raise ValueError(f"omega21 must be positive, got {self.omega21}")


def einstein_b(d: DipoleParams) -> float:
    """Stimulated-emission coefficient pi*mu**2 / (3*hbar**2*epsilon_0)."""
    return math.pi * d.mu ** 2 / (3.0 * constants.hbar ** 2 * constants.epsilon_0)
