"""Cartesian finite-volume building blocks.

Level-l cells are squares of side h(l) = domain_size * 2^-l, so edge length
and center distance both equal h(l) and the geometric factor |sigma|/d is 1
on same-level edges. The edge flux between neighbors K, L is

    F(K, L) = d* * (|sigma|/d) * (u_L - u_K),

with d* built from the per-side coefficients M = |M_tensor . normal| as the
distance-weighted harmonic combination; boundary edges carry zero flux
(insulated tissue).

Explicit marching updates (forward Euler in time, reactions evaluated at the
old state):

    bidomain:   v' = v + dt/(beta*c_m) * ( -div_e(u_e) - beta*I_ion + I_app )
    monodomain: v' = v + dt/(beta*c_m) * ( +div(v)     - beta*I_ion
                                           + lam/(1+lam)*I_app )
    gating:     w' = w + dt * H(v, w)

where div is the per-area flux divergence (1/|K|) * sum_L F(K, L). The
bidomain sign follows the parabolic equation literally (the e-flux divergence
enters with a minus); the monodomain diffusion sign is fixed so that the
scheme is dissipative and a suprathreshold stimulus launches an outward wave
(see docs/signs.md).

The CFL bound used to define dt each macro step:

    dt = h / ( 2*max(|I_ion| + |I_app|) + 4*h^-1 * max_tensor )
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CellState",
    "EdgeCoeff",
    "GridSpec",
    "apply_stimulus_uniform",
    "cfl_dt",
    "diffusive_flux",
    "edge_coeff",
    "gating_step",
    "init_cell_averages",
    "parabolic_step_bidomain",
    "parabolic_step_monodomain",
]

_AXIS_NORMALS = {0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0])}


@dataclass(frozen=True)
class GridSpec:
    """Square domain [origin, origin + domain_size]^2, dyadic to max_level."""

    max_level: int
    domain_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def validate(self) -> None:
        if self.max_level < 1:
            raise ValueError("max_level must be >= 1")
        if not self.domain_size > 0:
            raise ValueError("domain_size must be positive")

    def h(self, level: int) -> float:
        """Cell side length at a level."""
        return self.domain_size * 2.0**-level

    def cell_area(self, level: int) -> float:
        return self.h(level) ** 2

    def n_cells(self, level: int) -> int:
        """Cells per axis at a level."""
        return 1 << level

    def centers(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Cell center coordinates (x 1-D along axis 0, y 1-D along axis 1)."""
        h = self.h(level)
        idx = np.arange(self.n_cells(level))
        return self.origin[0] + (idx + 0.5) * h, self.origin[1] + (idx + 0.5) * h

    @property
    def area(self) -> float:
        return self.domain_size**2


@dataclass(frozen=True)
class EdgeCoeff:
    """Effective diffusivity d* plus edge geometry for one edge."""

    d_star: float
    edge_length: float
    center_distance: float

    @property
    def transmissibility(self) -> float:
        return self.d_star * self.edge_length / self.center_distance


@dataclass(frozen=True)
class CellState:
    """Per-cell unknowns; u_e is None for monodomain runs."""

    v: float
    w: float
    u_e: float | None = None


def edge_coeff(
    m_left: np.ndarray,
    m_right: np.ndarray,
    axis: int,
    level: int,
    grid: GridSpec,
) -> EdgeCoeff:
    """Edge coefficient between two same-level cells across the given axis.

    d* = M_K*M_L / (d(K,s)*M_K + d(L,s)*M_L) * d(K,L) with M_K = |M_left . n|,
    M_L = |M_right . n|; degenerate (zero) products give d* = 0.
    """
    n = _AXIS_NORMALS[axis]
    m_k = float(np.linalg.norm(m_left @ n))
    m_l = float(np.linalg.norm(m_right @ n))
    h = grid.h(level)
    denom = 0.5 * h * (m_k + m_l)
    d_star = 0.0 if denom == 0.0 else m_k * m_l / denom * h
    return EdgeCoeff(d_star=d_star, edge_length=h, center_distance=h)


def diffusive_flux(u_left: float, u_right: float, coeff: EdgeCoeff) -> float:
    """F = d* * (|sigma|/d) * (u_right - u_left); antisymmetric in its ends."""
    return coeff.transmissibility * (u_right - u_left)


def cfl_dt(h: float, max_current: float, max_tensor: float) -> float:
    """Stable explicit step at mesh size h.

    max_current bounds |I_ion| + |I_app| over the mesh, max_tensor the tensor
    norms entering the flux coefficients.
    """
    denom = 2.0 * max_current + 4.0 * max_tensor / h
    if denom <= 0.0 or not np.isfinite(denom):
        raise ValueError(f"degenerate CFL denominator {denom}")
    return h / denom


def parabolic_step_bidomain(v, flux_div, i_ion, i_app, dt, beta, c_m):
    """One explicit v-step; flux_div is the per-area divergence of u_e fluxes."""
    return v + (dt / (beta * c_m)) * (-flux_div - beta * i_ion + i_app)


def parabolic_step_monodomain(v, flux_div, i_ion, i_app, dt, beta, c_m, lam):
    """One explicit v-step; flux_div is the per-area divergence of v fluxes
    with the effective tensor M_i/(1+lam) already folded in."""
    src = (lam / (1.0 + lam)) * i_app
    return v + (dt / (beta * c_m)) * (flux_div - beta * i_ion + src)


def gating_step(w, h_rate, dt):
    """w' = w + dt * H with H evaluated at the old state."""
    return w + dt * h_rate


def init_cell_averages(fn, level: int, grid: GridSpec) -> np.ndarray:
    """Midpoint-rule cell averages of fn(x, y) on the uniform level grid.

    Second order, matching the scheme's spatial accuracy; exact for fields
    linear over a cell.
    """
    x, y = grid.centers(level)
    return np.asarray(fn(x[:, None], y[None, :]), dtype=float) * np.ones(
        (grid.n_cells(level), grid.n_cells(level))
    )


def apply_stimulus_uniform(
    field: np.ndarray,
    level: int,
    grid: GridSpec,
    center: tuple[float, float],
    radius_sq: float,
    amplitude: float,
) -> None:
    """Add amplitude to cells whose center lies strictly inside the disc."""
    x, y = grid.centers(level)
    inside = (x[:, None] - center[0]) ** 2 + (y[None, :] - center[1]) ** 2 < radius_sq
    field[inside] += amplitude
