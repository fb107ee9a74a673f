"""Pointwise spectral descriptors and their projection into a basis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import projector, vertex_mass_of
from .errors import DimensionMismatch, InsufficientSpectrum
from .mesh import Mesh
from .operators import KERNEL_TOL, LB, SpectralBasis

WKS_NUM_ENERGIES = 100
WKS_VARIANCE_SCALE = 7.0


SOURCES = ("HKS", "WKS", "XYZ", "external")


@dataclass(frozen=True, eq=False)
class DescriptorSet:
    """Descriptor functions stored column-wise, shape (n, d)."""

    values: np.ndarray
    names: list = field(default_factory=list)
    source: str = "external"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch(f"descriptor values must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("descriptor values must be finite")
        if self.source not in SOURCES:
            raise ValueError(f"unknown descriptor source {self.source!r}")
        names = list(self.names) or [f"d{i}" for i in range(values.shape[1])]
        if len(names) != values.shape[1]:
            raise DimensionMismatch(f"{len(names)} names for {values.shape[1]} descriptor columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _nonzero_spectrum(basis: SpectralBasis):
    if basis.kind != LB or not basis.orthonormal:
        raise ValueError("spectral descriptors need an orthonormal Laplace-Beltrami basis")
    evals = np.asarray(basis.eigenvalues)
    keep = evals > KERNEL_TOL * evals.max()
    if np.count_nonzero(keep) < 1:
        raise InsufficientSpectrum("no nonzero eigenvalues in basis")
    return evals[keep], np.asarray(basis.functions)[:, keep]


def wks(basis: SpectralBasis, num_energies=WKS_NUM_ENERGIES, variance_scale=WKS_VARIANCE_SCALE):
    """Wave kernel signature on log-energies spread over the nonzero spectrum.

    Kernel (near-zero) modes are excluded. The Gaussian weights of every
    energy are normalized to sum to one over the spectrum.
    """
    evals, phi = _nonzero_spectrum(basis)
    if len(evals) < 2:
        raise InsufficientSpectrum("WKS needs at least two nonzero eigenvalues")
    log_e = np.log(evals)
    sigma = variance_scale * (log_e[-1] - log_e[0]) / num_energies
    energies = np.linspace(log_e[0] + 2 * sigma, log_e[-1] - 2 * sigma, num_energies)
    weights = np.exp(-((energies[:, None] - log_e[None, :]) ** 2) / (2 * sigma**2))
    weights /= weights.sum(axis=1, keepdims=True)
    values = (phi**2) @ weights.T
    names = [f"wks_{e:.6g}" for e in energies]
    return DescriptorSet(values, names, "WKS")


def hks(basis: SpectralBasis, num_times=16):
    """Heat kernel signature at times log-spaced in ``[4 ln10 / lam_max, 4 ln10 / lam_min]``."""
    evals, phi = _nonzero_spectrum(basis)
    times = np.geomspace(4 * np.log(10) / evals[-1], 4 * np.log(10) / evals[0], num_times)
    values = (phi**2) @ np.exp(-np.outer(evals, times))
    return DescriptorSet(values, [f"hks_{t:.6g}" for t in times], "HKS")


def xyz(mesh: Mesh):
    return DescriptorSet(np.array(mesh.vertices), ["x", "y", "z"], "XYZ")


def project_descriptors(desc: DescriptorSet, basis: SpectralBasis, mesh) -> np.ndarray:
    """Coefficients ``Psi^dagger D`` of the descriptor columns, shape (k, d).

    ``mesh`` is a :class:`Mesh` or its vertex mass vector.
    """
    n = len(vertex_mass_of(mesh))
    if desc.values.shape[0] != n:
        raise DimensionMismatch(f"descriptors have {desc.values.shape[0]} rows, mesh has {n} vertices")
    return projector(basis, mesh)(desc.values)
