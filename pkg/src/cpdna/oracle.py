"""Closed-form reference spectra for the validation surfaces.

All oracles return multiplicity-expanded ascending lists so they align
index-by-index with computed spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ExactSpectrum:
    values: np.ndarray
    provenance: str

    def __len__(self):
        return len(self.values)


def interval_spectrum(bc: str, k: int) -> ExactSpectrum:
    """Arc of length 2*pi (open curve): (n/2)^2 for Dirichlet; Neumann
    prepends the constant mode at 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if bc == "dirichlet":
        vals = np.array([(n / 2.0) ** 2 for n in range(1, k + 1)])
    elif bc == "neumann":
        vals = np.array([0.0] + [(n / 2.0) ** 2 for n in range(1, k)])
    else:
        raise ValueError("interval bc must be dirichlet|neumann")
    return ExactSpectrum(vals, f"interval-{bc}")


def circle_spectrum(radius: float, k: int) -> ExactSpectrum:
    """Closed circle: 0 then n^2/R^2 with multiplicity 2 (sin/cos pair)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    vals = [0.0]
    n = 1
    while len(vals) < k:
        vals.extend([(n / radius) ** 2] * 2)
        n += 1
    return ExactSpectrum(np.array(vals[:k]), "circle")


def sphere_spectrum(radius: float, k: int) -> ExactSpectrum:
    """Sphere: l(l+1)/R^2 with multiplicity 2l+1."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    vals = []
    levels = []
    ell = 0
    while len(vals) < k:
        vals.extend([ell * (ell + 1) / radius ** 2] * (2 * ell + 1))
        levels.append(ell)
        ell += 1
    return ExactSpectrum(np.array(vals[:k]), "sphere")


def hemisphere_spectrum(bc: str, radius: float, k: int) -> ExactSpectrum:
    """Hemisphere: sphere harmonics filtered by reflection parity.

    Dirichlet keeps the l harmonics odd under z-reflection per level
    (l >= 1); Neumann keeps the l+1 even ones (l >= 0).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if bc not in ("dirichlet", "neumann"):
        raise ValueError("hemisphere bc must be dirichlet|neumann")
    vals = []
    ell = 0
    while len(vals) < k:
        mult = ell if bc == "dirichlet" else ell + 1
        vals.extend([ell * (ell + 1) / radius ** 2] * mult)
        ell += 1
    return ExactSpectrum(np.array(vals[:k]), f"hemisphere-{bc}")
