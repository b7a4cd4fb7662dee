"""Optical trap model for a prolate spheroid in a linearly polarized tweezer.

Conventions
-----------
The orientation potential is the cycle-averaged induced-dipole energy

    U(beta) = -(1/4) alpha_x E0^2 - (1/4)(alpha_z - alpha_x) E0^2 cos^2(beta)

with E0 the *peak* field amplitude fixed by eps0 E0^2 = 2 P / (pi c w^2).
The 1/4 (rather than 1/2) reflects time averaging of the squared drive
field; this is the only convention that reproduces the quoted trap depth
of ~5.6e-21 J for the reference configuration, so it is adopted
throughout and the harmonic expansion is kept consistent with it.

The trap stiffness is reported as the coefficient of beta^2 in the
expansion U(beta) - U(0) = k beta^2 + O(beta^4); for this potential the
coefficient equals the trap depth, and the libration frequency follows
from I1 * w0^2 = 2 k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import ConfigError, SystemConfig
from .constants import c_light, epsilon_0, k_B


class ConfinementUndefined(ValueError):
    """No angular confinement exists (degenerate, isotropic particle)."""


def depolarization_factors(a: float, b: float) -> tuple[float, float]:
    """Electrostatic depolarization factors (L_x, L_z) of a prolate spheroid.

    a is the semi-major (symmetry) axis, b the semi-minor axis.  For a
    sphere L_x = L_z = 1/3 exactly.  Raises for a < b (oblate out of scope).
    """
    if not (0 < b <= a):
        raise ConfigError("depolarization factors: require 0 < b <= a")
    if a == b:
        return (1.0 / 3.0, 1.0 / 3.0)
    e2 = 1.0 - (b / a) ** 2
    e = math.sqrt(e2)
    Lz = (1.0 - e2) / e2 * (math.log((1.0 + e) / (1.0 - e)) / (2.0 * e) - 1.0)
    Lx = 0.5 * (1.0 - Lz)
    return (Lx, Lz)


def derive_polarizabilities(cfg: SystemConfig) -> tuple[float, float]:
    """Static polarizabilities (alpha_x, alpha_z) in C m^2/V.

    Rayleigh-limit ellipsoid model: alpha_i = eps0 V (eps_r - 1) /
    (1 + L_i (eps_r - 1)) with V the particle volume.
    """
    Lx, Lz = depolarization_factors(cfg.semi_major_a, cfg.semi_minor_b)
    V = 4.0 / 3.0 * math.pi * cfg.semi_major_a * cfg.semi_minor_b**2
    chi = cfg.dielectric_const - 1.0
    alpha_x = epsilon_0 * V * chi / (1.0 + Lx * chi)
    alpha_z = epsilon_0 * V * chi / (1.0 + Lz * chi)
    return (alpha_x, alpha_z)


@dataclass(frozen=True)
class TrapModel:
    """Derived optical-trap and rigid-body quantities (SI)."""

    polarizability_x: float     # C m^2/V
    polarizability_z: float     # C m^2/V
    field_sq_E2: float          # V^2/m^2, peak amplitude squared
    trap_depth: float           # J, U(pi/2) - U(0)
    trap_stiffness_k: float     # J/rad^2, coefficient of beta^2
    inertia_I1: float           # kg m^2, transverse
    inertia_I3: float           # kg m^2, about the symmetry axis
    libration_freq_omega0: float  # rad/s
    confinement_beta_m: float | None  # rad; None when unconfined
    no_cooling: bool

    def potential(self, beta) -> float:
        """Orientation potential U(beta) in J (additive constant included)."""
        import numpy as np

        aX, aZ = self.polarizability_x, self.polarizability_z
        return -0.25 * aX * self.field_sq_E2 \
            - 0.25 * (aZ - aX) * self.field_sq_E2 * np.cos(beta) ** 2

    def restoring_torque(self, beta) -> float:
        """-dU/dbeta in N m."""
        import numpy as np

        return -0.5 * (self.polarizability_z - self.polarizability_x) \
            * self.field_sq_E2 * np.sin(beta) * np.cos(beta)

    def beta_m_or_raise(self) -> float:
        if self.confinement_beta_m is None:
            raise ConfinementUndefined(
                "isotropic particle: no orientation confinement, beta_m undefined"
            )
        return self.confinement_beta_m

    def as_dict(self) -> dict:
        return {
            "polarizability_x": self.polarizability_x,
            "polarizability_z": self.polarizability_z,
            "field_sq_E2": self.field_sq_E2,
            "trap_depth": self.trap_depth,
            "trap_stiffness_k": self.trap_stiffness_k,
            "inertia_I1": self.inertia_I1,
            "inertia_I3": self.inertia_I3,
            "libration_freq_omega0": self.libration_freq_omega0,
            "confinement_beta_m": self.confinement_beta_m,
            "no_cooling": self.no_cooling,
        }


def derive_trap(cfg: SystemConfig) -> TrapModel:
    """Compute the full TrapModel for a configuration."""
    alpha_x, alpha_z = derive_polarizabilities(cfg)
    # eps0 E0^2 = 2P/(pi c w^2); beam_area stores pi w^2
    E2 = 2.0 * cfg.laser_power / (c_light * cfg.beam_area) / epsilon_0
    depth = 0.25 * (alpha_z - alpha_x) * E2
    stiffness = depth  # coefficient of beta^2 in the expansion of U
    V = 4.0 / 3.0 * math.pi * cfg.semi_major_a * cfg.semi_minor_b**2
    m = cfg.mass_density * V
    I1 = m * (cfg.semi_major_a**2 + cfg.semi_minor_b**2) / 5.0
    I3 = 2.0 * m * cfg.semi_minor_b**2 / 5.0
    if depth > 0:
        omega0 = math.sqrt(2.0 * stiffness / I1)
        T0 = depth / k_B
        s2 = cfg.bath_temperature_T / (2.0 * T0)  # sin^2(beta_m)
        beta_m = math.asin(math.sqrt(s2)) if s2 < 1.0 else None
    else:
        omega0 = 0.0
        beta_m = None
    return TrapModel(
        polarizability_x=alpha_x,
        polarizability_z=alpha_z,
        field_sq_E2=E2,
        trap_depth=depth,
        trap_stiffness_k=stiffness,
        inertia_I1=I1,
        inertia_I3=I3,
        libration_freq_omega0=omega0,
        confinement_beta_m=beta_m,
        no_cooling=cfg.no_cooling or depth <= 0 or beta_m is None,
    )
