"""Partial transposition, symplectic spectra and logarithmic negativity.

Two independent evaluations of the negativity are provided. The production
route takes the symplectic spectrum of the partially transposed covariance;
the verification route diagonalises the operator built from ``Gamma^{-1}``,
``Upsilon = Gamma^{-1/2} (P~J)^T Gamma^{-1} (P~J) Gamma^{-1/2}``, and sums
``1/4 log`` over its eigenvalues above one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, IndefiniteMatrixError, PairingFailureError
from .gaussian import CovarianceMatrix, symplectic_form
from .lattice import Bipartition

PD_RATIO = 1e-12
PAIRING_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class BipartitionMask:
    """Sign vector ``P`` = -1 on the inside region and +1 on its complement."""

    inside: np.ndarray = field(repr=False)  # boolean, length n

    @classmethod
    def from_bipartition(cls, bp: Bipartition) -> "BipartitionMask":
        return cls(bp.mask)

    @classmethod
    def from_indices(cls, n: int, indices) -> "BipartitionMask":
        m = np.zeros(n, dtype=bool)
        m[np.asarray(list(indices), dtype=int)] = True
        return cls(m)

    @property
    def n(self) -> int:
        return len(self.inside)

    @property
    def signs(self) -> np.ndarray:
        return np.where(self.inside, -1.0, 1.0)

    @property
    def P(self) -> np.ndarray:
        return np.diag(self.signs)

    @property
    def P_tilde(self) -> np.ndarray:
        return np.diag(np.concatenate([self.signs, self.signs]))

    @property
    def lift(self) -> np.ndarray:
        """``1 (+) P``: flips the momenta of the inside region."""
        return np.diag(self.lift_signs)

    @property
    def lift_signs(self) -> np.ndarray:
        return np.concatenate([np.ones(self.n), self.signs])

    def complement(self) -> "BipartitionMask":
        return BipartitionMask(~self.inside)


@dataclass
class NegativityResult:
    value: float
    symplectic_spectrum: np.ndarray
    route: str
    t: float | None = None
    min_eigenvalue_h: float | None = None

    @property
    def min_symplectic(self) -> float:
        return float(self.symplectic_spectrum.min())


def partial_transpose(gamma: CovarianceMatrix, mask: BipartitionMask) -> CovarianceMatrix:
    """Congruence by ``1 (+) P``; an exact sign flip, so applying it twice is the identity."""
    if gamma.n != mask.n:
        raise ConfigurationError(f"mask has {mask.n} sites, covariance has {gamma.n} modes")
    s = mask.lift_signs
    return CovarianceMatrix(gamma.gamma * s[:, None] * s[None, :], "partially-transposed")


def _sym_sqrt(A: np.ndarray, what: str = "matrix") -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    if w[-1] <= 0 or w[0] <= PD_RATIO * w[-1]:
        raise IndefiniteMatrixError(
            f"{what} is not positive definite (eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}])",
            {"min_eigenvalue": float(w[0]), "max_eigenvalue": float(w[-1])},
        )
    return (V * np.sqrt(w)) @ V.T


def symplectic_spectrum(A) -> np.ndarray:
    """Williamson diagonal of a real symmetric positive definite ``2n x 2n`` matrix.

    The singular values of the antisymmetric ``A^1/2 J A^1/2`` come in equal
    pairs; one value per pair is returned, in descending order.
    """
    A = A.gamma if isinstance(A, CovarianceMatrix) else np.asarray(A, dtype=float)
    n2 = A.shape[0]
    if A.shape != (n2, n2) or n2 % 2:
        raise ConfigurationError(f"expected an even square matrix, got shape {A.shape}")
    root = _sym_sqrt(A, "covariance")
    K = root @ symplectic_form(n2 // 2) @ root
    sigma = np.linalg.svd(K, compute_uv=False)
    first, second = sigma[0::2], sigma[1::2]
    gap = np.abs(first - second)
    bad = gap > PAIRING_RTOL * first
    if bad.any():
        j = int(np.argmax(bad))
        raise PairingFailureError(
            f"singular values do not pair: {first[j]:.12g} vs {second[j]:.12g}",
            {"pair": j, "values": (float(first[j]), float(second[j]))},
        )
    return 0.5 * (first + second)


def negativity_from_spectrum(d: np.ndarray) -> float:
    below = d[d < 1.0]
    return float(-np.sum(np.log(below))) if below.size else 0.0


def log_negativity(gamma: CovarianceMatrix, mask: BipartitionMask, t=None, partial_transpose_fn=None) -> NegativityResult:
    pt = (partial_transpose_fn or partial_transpose)(gamma, mask)
    d = symplectic_spectrum(pt.gamma)
    return NegativityResult(negativity_from_spectrum(d), d, "symplectic", t)


def check_inverse(gamma: np.ndarray, gamma_inv: np.ndarray, tol: float = 1e-8) -> float:
    """Relative residual of ``Gamma Gamma^{-1} = I``, judged against the conditioning scale."""
    n2 = gamma.shape[0]
    resid = float(np.abs(gamma @ gamma_inv - np.eye(n2)).max())
    scale = max(1.0, float(np.linalg.norm(gamma, 2) * np.linalg.norm(gamma_inv, 2)) * 1e-8)
    if resid > tol * scale:
        raise ConfigurationError(f"inverse covariance is inconsistent (residual {resid:.3e})")
    return resid


def upsilon_matrix(gamma_inv: np.ndarray, mask: BipartitionMask) -> np.ndarray:
    n = mask.n
    Q = mask.P_tilde @ symplectic_form(n)
    root = _sym_sqrt(gamma_inv, "inverse covariance")
    Y = root @ Q.T @ gamma_inv @ Q @ root
    return 0.5 * (Y + Y.T)


def log_negativity_upsilon(gamma: CovarianceMatrix, gamma_inv: np.ndarray, mask: BipartitionMask, t=None) -> NegativityResult:
    if gamma.n != mask.n:
        raise ConfigurationError(f"mask has {mask.n} sites, covariance has {gamma.n} modes")
    check_inverse(gamma.gamma, gamma_inv)
    lam = np.linalg.eigvalsh(upsilon_matrix(gamma_inv, mask))
    above = lam[lam > 1.0]
    value = 0.25 * float(np.sum(np.log(above))) if above.size else 0.0
    # eigenvalues of Upsilon are 1/d_j^2, each twice
    d = np.sort(1.0 / np.sqrt(np.clip(lam[::2], np.finfo(float).tiny, None)))[::-1]
    return NegativityResult(value, d, "upsilon", t)
