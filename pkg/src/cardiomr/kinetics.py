"""Membrane kinetics and conductivity tensors.

Two membrane models are provided. FitzHugh-Nagumo:

    H(v, w)     = a*v - b*w
    I_ion(v, w) = -lam * (w - v*(1 - v)*(v - theta))

and Mitchell-Schaeffer, with s = v/v_p:

    H(v, w)     = (w_inf(s) - w) / (R_m * c_m * eta_inf(s))
    I_ion(v, w) = (v_p/R_m) * ( v/(v_p*eta2) - v^2*(1 - v/v_p)*w/(v_p^2*eta1) )

where w_inf(s) = step(s - eta5) and eta_inf(s) = eta3 + (eta4 - eta3)*step(s - eta5).
step(0) is defined as 1 (right-continuous), so the gate switches on exactly at
threshold.

Tissue conductivity along/across a constant fiber direction a = (cos t, sin t):

    M = sigma_t * I + (sigma_l - sigma_t) * a a^T

All rate functions are pure and vectorized: they accept scalars or numpy
arrays and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConductivitySpec",
    "FhnParams",
    "ModelConstants",
    "MsParams",
    "conductivity_tensor",
    "fhn_rates",
    "ms_rates",
    "spectral_norm",
    "tensor_axis_norms",
]


@dataclass(frozen=True)
class FhnParams:
    """FitzHugh-Nagumo parameters (all dimensionless rates/thresholds)."""

    a: float
    b: float
    lam: float
    theta: float

    def validate(self) -> None:
        for name in ("a", "b", "lam", "theta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"FhnParams.{name} must be finite")


@dataclass(frozen=True)
class MsParams:
    """Mitchell-Schaeffer parameters.

    v_p: peak potential (mV); r_m: surface resistivity (Ohm*cm^2);
    eta1..eta5: dimensionless shape parameters.
    """

    v_p: float
    r_m: float
    eta1: float
    eta2: float
    eta3: float
    eta4: float
    eta5: float

    def validate(self) -> None:
        if not (self.v_p > 0 and self.r_m > 0):
            raise ValueError("MsParams requires v_p > 0 and r_m > 0")
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("MsParams requires eta1 > 0 and eta2 > 0")
        for name in ("v_p", "r_m", "eta1", "eta2", "eta3", "eta4", "eta5"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"MsParams.{name} must be finite")


@dataclass(frozen=True)
class ConductivitySpec:
    """Conductivities along/across the fiber (Ohm^-1 cm^-1) plus fiber angle."""

    sigma_l: float
    sigma_t: float
    fiber_angle: float = 0.0

    def validate(self) -> None:
        if not (self.sigma_l > 0 and self.sigma_t > 0):
            raise ValueError("conductivities must be positive")
        if not np.isfinite(self.fiber_angle):
            raise ValueError("fiber_angle must be finite")


@dataclass(frozen=True)
class ModelConstants:
    """Bulk constants: surface-to-volume ratio beta (cm^-1), membrane
    capacitance c_m (mF/cm^2), and the monodomain proportionality lambda."""

    beta: float
    c_m: float
    lambda_mono: float = 1.0

    def validate(self) -> None:
        if not (self.beta > 0 and self.c_m > 0):
            raise ValueError("beta and c_m must be positive")
        if self.lambda_mono == -1.0:
            raise ValueError("lambda_mono = -1 makes 1/(1+lambda) singular")


def fhn_rates(v, w, p: FhnParams):
    """FitzHugh-Nagumo gating rate H and ionic current I_ion."""
    h = p.a * v - p.b * w
    i_ion = -p.lam * (w - v * (1.0 - v) * (v - p.theta))
    return h, i_ion


def _step(x):
    # Heaviside with step(0) = 1
    return np.where(np.asarray(x) >= 0.0, 1.0, 0.0)


def ms_rates(v, w, p: MsParams, c_m: float = 1.0):
    """Mitchell-Schaeffer gating rate H and ionic current I_ion.

    c_m enters the gate time constant R_m*c_m*eta_inf.
    """
    s = np.asarray(v, dtype=float) / p.v_p
    gate = _step(s - p.eta5)
    w_inf = gate
    eta_inf = p.eta3 + (p.eta4 - p.eta3) * gate
    h = (w_inf - w) / (p.r_m * c_m * eta_inf)
    i_ion = (p.v_p / p.r_m) * (
        v / (p.v_p * p.eta2) - v * v * (1.0 - s) * w / (p.v_p**2 * p.eta1)
    )
    return h, i_ion


def conductivity_tensor(spec: ConductivitySpec) -> np.ndarray:
    """2x2 SPD tensor sigma_t*I + (sigma_l - sigma_t) * a a^T."""
    c, s = np.cos(spec.fiber_angle), np.sin(spec.fiber_angle)
    d = spec.sigma_l - spec.sigma_t
    return np.array(
        [
            [spec.sigma_t + d * c * c, d * c * s],
            [d * c * s, spec.sigma_t + d * s * s],
        ]
    )


def tensor_axis_norms(m: np.ndarray) -> tuple[float, float]:
    """Euclidean norms |M e_x|, |M e_y| (the per-axis edge flux coefficients)."""
    return float(np.hypot(m[0, 0], m[1, 0])), float(np.hypot(m[0, 1], m[1, 1]))


def spectral_norm(m: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric 2x2 tensor."""
    return float(np.linalg.eigvalsh(m)[-1])
