"""Deployment geometry, link gains, and spatial channel statistics.

The physical picture is a plan-view uplink: base station at the origin, a
reflecting surface on the x-axis at ``d_rb`` metres, and the user terminal at
``(d_x, d_y)``.  Both multi-element apertures are vertical uniform rectangular
arrays lying in the x-z plane; element positions are counted in carrier
wavelengths, so every spacing below is dimensionless.

Spatial correlation across an aperture follows the isotropic-scattering model
``R[n, m] = sinc(2 * distance_nm)`` with element distances in wavelengths;
temporal correlation is handled by the fading generator and is separable from
everything here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# eigenvalues of a correlation matrix may dip this far below zero before we
# refuse to treat the matrix as positive semidefinite
_PSD_TOLERANCE = -1e-10


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


# ---------------------------------------------------------------------------
# geometry and link budget
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArrayGeometry:
    """Vertical uniform rectangular aperture in the x-z plane."""

    n_x: int  # elements along x
    n_z: int  # elements along z
    spacing: float  # inter-element spacing in wavelengths

    def __post_init__(self):
        if self.n_x < 1 or self.n_z < 1:
            raise DomainError(f"array needs at least one element per axis, got {self.n_x}x{self.n_z}")
        if not self.spacing > 0.0:
            raise DomainError(f"element spacing must be positive, got {self.spacing!r}")

    @property
    def n_elements(self) -> int:
        return self.n_x * self.n_z

    def element_positions(self) -> np.ndarray:
        """(n_elements, 2) array of (x, z) positions in wavelengths; the
        element index runs x-fastest."""
        px, pz = np.meshgrid(np.arange(self.n_x), np.arange(self.n_z))
        return self.spacing * np.column_stack([px.ravel(), pz.ravel()]).astype(float)


@dataclass(frozen=True)
class Layout:
    """Plan-view node placement and per-link path-loss exponents."""

    d_rb: float = 40.0  # BS -> RIS distance along x  [m]
    d_x: float = 29.0  # UE x coordinate  [m]
    d_y: float = 5.0  # UE y offset  [m]
    alpha_d: float = 3.5  # UE -> BS exponent (obstructed)
    alpha_rb: float = 2.0  # RIS -> BS exponent (boresight)
    alpha_ur: float = 2.8  # UE -> RIS exponent
    c0_db: float = -30.0  # reference gain at d0  [dB]
    d0: float = 1.0  # reference distance  [m]


#: the three node placements used throughout the reference experiments
LAYOUTS = {
    "A": Layout(d_x=29.0),  # both links comparable
    "B": Layout(d_x=20.0),  # direct link dominant
    "C": Layout(d_x=35.0),  # reflected link dominant
}


@dataclass(frozen=True)
class LinkGains:
    beta_d: float  # UE -> BS power gain
    beta_rb: float  # RIS -> BS power gain
    beta_ur: float  # UE -> RIS power gain


def path_gain(distance: float, exponent: float, c0_db: float = -30.0, d0: float = 1.0) -> float:
    """Distance-power law gain ``C0 * (d / d0) ** -exponent`` (linear scale)."""
    if not distance > 0.0:
        raise DomainError(f"path_gain needs a positive distance, got {distance!r}")
    return db_to_linear(c0_db) * (distance / d0) ** (-exponent)


def layout_gains(layout: Layout) -> LinkGains:
    """Resolve the three link gains from plan-view node positions."""
    d_ub = math.hypot(layout.d_x, layout.d_y)
    d_ur = math.hypot(layout.d_rb - layout.d_x, layout.d_y)
    return LinkGains(
        beta_d=path_gain(d_ub, layout.alpha_d, layout.c0_db, layout.d0),
        beta_rb=path_gain(layout.d_rb, layout.alpha_rb, layout.c0_db, layout.d0),
        beta_ur=path_gain(d_ur, layout.alpha_ur, layout.c0_db, layout.d0),
    )


# ---------------------------------------------------------------------------
# spatial correlation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationMatrix:
    """Unit-diagonal spatial correlation with its eigen-factorisation.

    ``sqrt_factor`` is the symmetric PSD square root V diag(sqrt(lam)) V^T
    (eigendecomposition, not Cholesky, so rank-deficient matrices factor
    cleanly).  Eigenvalues are stored in descending order with tiny negative
    values (>= -1e-10) clamped to zero; anything more negative is rejected.
    """

    entries: np.ndarray
    eigenvalues: np.ndarray = field(init=False, repr=False)
    sqrt_factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError(f"correlation matrix must be square, got shape {a.shape}")
        if not np.allclose(a, a.T, atol=1e-12):
            raise DomainError("correlation matrix must be symmetric")
        if np.any(np.abs(np.diag(a) - 1.0) > 1e-12):
            raise DomainError("correlation matrix must have a unit diagonal")
        if np.max(np.abs(a)) > 1.0 + 1e-12:
            raise DomainError("correlation entries cannot exceed one in magnitude")
        lam, vec = np.linalg.eigh(a)
        if lam[0] < _PSD_TOLERANCE:
            raise DomainError(
                f"correlation matrix is not positive semidefinite: min eigenvalue {lam[0]:.3e}"
            )
        lam = np.clip(lam, 0.0, None)
        order = np.argsort(lam)[::-1]
        lam = lam[order]
        vec = vec[:, order]
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "sqrt_factor", (vec * np.sqrt(lam)) @ vec.T)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n: int) -> "CorrelationMatrix":
        return cls(np.eye(n))


def spatial_correlation(geometry: ArrayGeometry) -> CorrelationMatrix:
    """Isotropic-scattering correlation ``sinc(2 d_nm)`` for a rectangular
    aperture (distances in wavelengths)."""
    pos = geometry.element_positions()
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    return CorrelationMatrix(np.sinc(2.0 * dist))


def scaled_eigenvalues(corr: CorrelationMatrix, beta: float, snr_scale: float) -> np.ndarray:
    """Descending eigenvalues of ``snr_scale * beta * R`` -- the per-branch
    SNR spectrum that the crossing formulas consume."""
    if beta < 0.0 or snr_scale < 0.0:
        raise DomainError("beta and snr_scale must be nonnegative")
    return snr_scale * beta * corr.eigenvalues


# ---------------------------------------------------------------------------
# steering
# ---------------------------------------------------------------------------


def steering_vector(geometry: ArrayGeometry, theta: float, phi: float) -> np.ndarray:
    """Unit-modulus array response: entry per element
    ``exp(j 2 pi spacing (p_x sin(theta) cos(phi) + p_z cos(theta)))``."""
    px, pz = np.meshgrid(np.arange(geometry.n_x), np.arange(geometry.n_z))
    phase = (
        2.0
        * np.pi
        * geometry.spacing
        * (px.ravel() * math.sin(theta) * math.cos(phi) + pz.ravel() * math.cos(theta))
    )
    return np.exp(1j * phase)


# ---------------------------------------------------------------------------
# scene assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SceneConfig:
    """Complete physical configuration of one experiment."""

    bs: ArrayGeometry
    ris: ArrayGeometry
    layout: Layout = field(default_factory=lambda: LAYOUTS["A"])
    snr_scale: float = 1e8  # transmit energy over noise power, E_s / sigma^2
    f_d: float = 1.0  # Doppler frequency of the direct link  [Hz]
    f_ur: float = 1.0  # Doppler frequency of the UE->RIS link  [Hz]
    # line-of-sight RIS->BS bearing (departure at the RIS, arrival at the BS)
    phi_departure: float = 5.0 * math.pi / 4.0
    phi_arrival: float = math.pi / 4.0
    theta_departure: float = math.pi / 2.0
    theta_arrival: float = math.pi / 2.0

    def __post_init__(self):
        if not self.snr_scale > 0.0:
            raise DomainError("snr_scale must be positive")
        if not (self.f_d > 0.0 and self.f_ur > 0.0):
            raise DomainError("Doppler frequencies must be positive")


@dataclass(frozen=True)
class SceneArrays:
    """Derived per-scene quantities shared by the analytic and simulated paths."""

    gains: LinkGains
    corr_bs: CorrelationMatrix  # aperture correlation at the BS (direct link)
    corr_ris: CorrelationMatrix  # aperture correlation at the RIS
    a_b: np.ndarray  # BS arrival steering vector
    a_r: np.ndarray  # RIS departure steering vector


def build_scene(scene: SceneConfig) -> SceneArrays:
    return SceneArrays(
        gains=layout_gains(scene.layout),
        corr_bs=spatial_correlation(scene.bs),
        corr_ris=spatial_correlation(scene.ris),
        a_b=steering_vector(scene.bs, scene.theta_arrival, scene.phi_arrival),
        a_r=steering_vector(scene.ris, scene.theta_departure, scene.phi_departure),
    )
