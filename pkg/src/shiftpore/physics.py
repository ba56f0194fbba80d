"""Material data, interface laws and the regularized fluid source.

Units: km, MPa, hr.  Mobility ``gamma = k / eta`` is in km^2 / (MPa hr).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UnsupportedConfigurationError

M2_TO_KM2 = 1e-6


@dataclass(frozen=True)
class MaterialParams:
    G: float
    nu: float
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not self.G > 0:
            raise ConfigurationError("shear modulus must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ConfigurationError("Poisson ratio must lie in (-1, 0.5)")
        if not self.beta > 0 or not self.gamma > 0:
            raise ConfigurationError("compressibility and mobility must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("Biot coefficient must lie in [0, 1]")

    @property
    def lam(self) -> float:
        return 2.0 * self.G * self.nu / (1.0 - 2.0 * self.nu)

    @classmethod
    def from_permeability(cls, G, nu, alpha, beta, k_km2, eta):
        return cls(G=G, nu=nu, alpha=alpha, beta=beta, gamma=k_km2 / eta)

    def elasticity_tensor(self) -> np.ndarray:
        """Drained plane-strain tensor ``C[i, j, k, l]``."""
        I = np.eye(2)
        return (self.lam * np.einsum("ij,kl->ijkl", I, I)
                + self.G * (np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I)))


# benchmark rock / fluid
BENCHMARK_MATERIAL = MaterialParams.from_permeability(
    G=22e3, nu=0.25, alpha=0.25, beta=8.5e-5, k_km2=1e-14 * M2_TO_KM2, eta=2e-10 / 3600.0)


@dataclass(frozen=True)
class InterfaceLaw:
    """Robin transmissivity plus a diagonal spring-dashpot pair."""

    T_n: float = 0.0
    k_n: float = 0.0
    k_t: float = 0.0
    h_n: float = 0.0
    h_t: float = 0.0
    k_nt: float = 0.0
    h_nt: float = 0.0

    def __post_init__(self):
        for name in ("T_n", "k_n", "k_t", "h_n", "h_t"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ConfigurationError(f"interface parameter {name} must be finite and >= 0, got {v!r}")
        if self.k_nt != 0 or self.h_nt != 0:
            raise UnsupportedConfigurationError("normal-tangential coupling must be zero")

    @property
    def has_viscosity(self) -> bool:
        return self.h_n > 0 or self.h_t > 0


@dataclass(frozen=True)
class SourceTerm:
    center: tuple
    R: float
    Q: float

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigurationError("source support radius must be positive")


def plane_strain_stress(grad_u, p, mat: MaterialParams) -> np.ndarray:
    """Total in-plane stress ``lam tr(eps) I + 2 G eps - alpha p I``.

    Broadcasts over leading dimensions of ``grad_u (..., 2, 2)`` and ``p (...)``.
    """
    g = np.asarray(grad_u, dtype=float)
    eps = 0.5 * (g + np.swapaxes(g, -1, -2))
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    iso = (mat.lam * tr - mat.alpha * np.asarray(p, dtype=float))[..., None, None]
    return iso * np.eye(2) + 2.0 * mat.G * eps


def wendland(x, source: SourceTerm) -> np.ndarray:
    """Normalized Wendland C2 weight ``7/(pi R^2) (1-r)_+^4 (4r+1)``."""
    X = np.asarray(x, dtype=float)
    r = np.linalg.norm(X - np.asarray(source.center, dtype=float), axis=-1) / source.R
    return 7.0 / (math.pi * source.R**2) * np.clip(1.0 - r, 0.0, None) ** 4 * (4.0 * r + 1.0)


def interface_frame(n_hat):
    """``(n, m)`` with ``m`` the counterclockwise rotation of ``n``."""
    n = np.asarray(n_hat, dtype=float)
    m = np.stack([-n[..., 1], n[..., 0]], axis=-1)
    return n, m


def stiffness_tensor(law: InterfaceLaw, n_hat) -> np.ndarray:
    n, m = interface_frame(n_hat)
    return law.k_n * np.einsum("...i,...j->...ij", n, n) + law.k_t * np.einsum("...i,...j->...ij", m, m)


def viscosity_tensor(law: InterfaceLaw, n_hat) -> np.ndarray:
    n, m = interface_frame(n_hat)
    return law.h_n * np.einsum("...i,...j->...ij", n, n) + law.h_t * np.einsum("...i,...j->...ij", m, m)


def spring_traction(jump_u, jump_udot, law: InterfaceLaw, n_hat) -> np.ndarray:
    K = stiffness_tensor(law, n_hat)
    H = viscosity_tensor(law, n_hat)
    return (np.einsum("...ij,...j->...i", K, np.asarray(jump_u, dtype=float))
            + np.einsum("...ij,...j->...i", H, np.asarray(jump_udot, dtype=float)))


def robin_flux(jump_p, law: InterfaceLaw):
    """Average normal flux ``-T_n [[p]]``."""
    return -law.T_n * np.asarray(jump_p, dtype=float)
