"""Domain types, linear material laws and the Kirchhoff transform pair."""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import NonPhysicalResult, OutOfRange
from .units import MIL, ZERO_CELSIUS

STEFAN_BOLTZMANN = 5.670374419e-8


@dataclass(frozen=True)
class PhysicalConstants:
    sigma: float = STEFAN_BOLTZMANN

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class WireSpec:
    """Geometry and temperature-dependent material data of one bondwire.

    Conductivity and resistivity follow linear laws in the temperature rise
    above ambient, ``k0 * (1 + alpha_kappa * dT)`` and
    ``rho_e0 * (1 + alpha_rho * dT)``.
    """

    length: float
    diameter: float
    kappa0: float
    alpha_kappa: float
    rho_e0: float
    alpha_rho: float
    mass_density: float
    specific_heat: float
    emissivity: float
    material: str = ""

    def __post_init__(self):
        for name in ("length", "diameter", "kappa0", "rho_e0", "mass_density", "specific_heat"):
            if not getattr(self, name) > 0:
                raise ValueError(f"WireSpec.{name} must be positive")
        if not 0 < self.emissivity <= 1:
            raise ValueError("WireSpec.emissivity must lie in (0, 1]")
        if self.alpha_rho < 0:
            raise ValueError("WireSpec.alpha_rho must be >= 0")
        if self.alpha_kappa > 0:
            raise ValueError("WireSpec.alpha_kappa must be <= 0")

    @property
    def area(self):
        return math.pi * self.diameter**2 / 4.0

    @property
    def perimeter(self):
        return math.pi * self.diameter

    @property
    def heat_capacity(self):
        """Volumetric heat capacity rho_w * c_w in J/(m^3 K)."""
        return self.mass_density * self.specific_heat

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class WireGeometryDerived:
    area: float
    perimeter: float

    @classmethod
    def of(cls, wire):
        return cls(wire.area, wire.perimeter)


@dataclass(frozen=True)
class CompoundSpec:
    width: float
    height: float
    kappa: float
    specific_heat: float
    density: float

    def __post_init__(self):
        for name in ("width", "height", "kappa", "specific_heat", "density"):
            if not getattr(self, name) > 0:
                raise ValueError(f"CompoundSpec.{name} must be positive")

    @property
    def heat_capacity(self):
        return self.density * self.specific_heat

    @property
    def diffusivity(self):
        return self.kappa / self.heat_capacity


@dataclass(frozen=True)
class BoundarySet:
    """Chip, lead, die-attach and ambient temperatures (K) plus h_c."""

    T_ch: float
    T_ld: float
    T_d: float
    T_0: float
    h_c: float

    def __post_init__(self):
        for name in ("T_ch", "T_ld", "T_d", "T_0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"BoundarySet.{name} must be > 0 K")
        if not self.h_c > 0:
            raise ValueError("BoundarySet.h_c must be positive")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class Drive:
    current: float
    duration: float

    def __post_init__(self):
        if self.current < 0:
            raise ValueError("Drive.current must be >= 0")
        if not self.duration > 0:
            raise ValueError("Drive.duration must be positive")


def wire_conductivity(wire, dT):
    """Thermal conductivity of the wire at temperature rise ``dT``."""
    k = wire.kappa0 * (1.0 + wire.alpha_kappa * np.asarray(dT, dtype=float))
    if np.any(k <= 0):
        raise NonPhysicalResult(
            f"wire conductivity non-positive at dT={np.max(dT):g} K (linear law out of range)"
        )
    return k if k.ndim else float(k)


def wire_resistivity(wire, dT):
    r = wire.rho_e0 * (1.0 + wire.alpha_rho * np.asarray(dT, dtype=float))
    return r if r.ndim else float(r)


def kirchhoff_forward(wire, dT):
    """Transformed temperature ``dT + alpha_kappa/2 * dT**2``."""
    dT = np.asarray(dT, dtype=float)
    theta = dT + 0.5 * wire.alpha_kappa * dT * dT
    return theta if theta.ndim else float(theta)


def kirchhoff_inverse(wire, theta):
    """Physical temperature rise for a transformed value ``theta``.

    Picks the root continuous with the identity as ``alpha_kappa -> 0``.
    Raises :class:`OutOfRange` past the parabola vertex.
    """
    theta = np.asarray(theta, dtype=float)
    a = wire.alpha_kappa
    if abs(a) < 1e-12:
        return theta if theta.ndim else float(theta)
    disc = 1.0 + 2.0 * a * theta
    if np.any(disc < 0):
        raise OutOfRange(
            f"theta={np.max(theta):g} K beyond vertex {-1.0 / (2.0 * a):g} K of the Kirchhoff transform"
        )
    # 2*theta / (1 + sqrt(disc)) avoids cancellation for small a*theta
    dT = 2.0 * theta / (1.0 + np.sqrt(disc))
    return dT if dT.ndim else float(dT)


# Nominal data.  Au and Cu are the tabulated package values; Al uses handbook
# constants since no tabulated set exists for it.
MELTING_POINTS = {
    "Au": 1064.0 + ZERO_CELSIUS,
    "Cu": 1085.0 + ZERO_CELSIUS,
    "Al": 660.0 + ZERO_CELSIUS,
}

_NOMINAL = {
    "Au": dict(rho_e0=2.214e-8, alpha_rho=3.400e-3, mass_density=19300.0, kappa0=315.0,
               alpha_kappa=-2.744e-4, specific_heat=129.0, emissivity=2.475e-1),
    "Cu": dict(rho_e0=1.678e-8, alpha_rho=3.862e-3, mass_density=8960.0, kappa0=398.0,
               alpha_kappa=-4.675e-4, specific_heat=353.0, emissivity=3.750e-2),
    "Al": dict(rho_e0=2.650e-8, alpha_rho=4.290e-3, mass_density=2700.0, kappa0=237.0,
               alpha_kappa=-7.0e-5, specific_heat=897.0, emissivity=5.0e-2),
}


def nominal_wire(material, diameter_mil, length_mm):
    """WireSpec from the nominal material table, diameter in mil, length in mm."""
    if material not in _NOMINAL:
        raise KeyError(f"unknown wire material {material!r}")
    return WireSpec(length=length_mm * 1e-3, diameter=diameter_mil * MIL,
                    material=material, **_NOMINAL[material])


def epoxy_compound(width=4.45e-3, height=1.48e-3):
    return CompoundSpec(width=width, height=height, kappa=0.870, specific_heat=882.0, density=1860.0)


def reference_boundaries():
    """Boundary set of the reference numerical test (80/40/35/20 degC, h_c = 25)."""
    c = ZERO_CELSIUS
    return BoundarySet(T_ch=80.0 + c, T_ld=40.0 + c, T_d=35.0 + c, T_0=20.0 + c, h_c=25.0)


@dataclass(frozen=True)
class ModelConfig:
    """Everything the solvers need for one wire in one package position.

    ``counts`` holds the series truncation (n_x, n_y, n_z, n_k);
    ``initial_profile`` is ``"linear"`` (rise interpolated between the chip
    and lead ends) or ``"ambient"``.
    """

    wire: WireSpec
    compound: CompoundSpec
    bc: BoundarySet
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    counts: tuple = (20, 30, 20, 60)
    initial_profile: str = "linear"
    quadrature_points: int = 128

    def __post_init__(self):
        if self.initial_profile not in ("linear", "ambient"):
            raise ValueError(f"unknown initial profile {self.initial_profile!r}")
        if len(self.counts) != 4 or min(self.counts) < 1:
            raise ValueError("counts must be four positive mode counts")

    def replace(self, **changes):
        return replace(self, **changes)
