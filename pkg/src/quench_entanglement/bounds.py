"""Numerical evaluation of the negativity upper bounds.

``Gamma_t^{-1}`` factors as ``M1 @ M2`` with

    M1 = E_t^{-1} (D+ (+) I),      M2 = (I (+) D-) E_t^{-T},

where ``D+-`` are tile direct sums of ``tanh(beta h^1/2) h^{+-1/2}``. The
negativity is bounded by ``1/alpha`` times the sum, over the four ``n x n``
blocks of ``[M2, P~] J^T M1 J``, of their Schatten quasi-norm alpha-powers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .anderson import EffectiveHamiltonian, apply_function
from .errors import InvalidParameterError
from .gaussian import inverse_propagator, symplectic_form, tile_direct_sums, tile_hamiltonians
from .lattice import Tiling, dual_graph
from .negativity import BipartitionMask


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0 < alpha <= 1:
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


@dataclass(frozen=True, eq=False)
class FactorMatrices:
    M1: np.ndarray = field(repr=False)
    M2: np.ndarray = field(repr=False)
    D_plus: np.ndarray = field(repr=False)
    D_minus: np.ndarray = field(repr=False)
    alpha: float = 0.25
    t: float = 0.0

    @property
    def n(self) -> int:
        return self.D_plus.shape[0]


def build_factors(H: EffectiveHamiltonian, tiling: Tiling, betas, t: float, alpha: float, tile_hs=None) -> FactorMatrices:
    alpha = _check_alpha(alpha)
    if tile_hs is None:
        tile_hs = tile_hamiltonians(H, tiling)
    d_plus, d_minus = tile_direct_sums(tiling, tile_hs, betas)
    n = H.n
    eye, zero = np.eye(n), np.zeros((n, n))
    Einv = inverse_propagator(H, t)
    M1 = Einv @ np.block([[d_plus, zero], [zero, eye]])
    M2 = np.block([[eye, zero], [zero, d_minus]]) @ Einv.T
    return FactorMatrices(M1, M2, d_plus, d_minus, alpha, float(t))


def schatten_quasi_norm_alpha_power(A, alpha: float, atol: float = 0.0) -> float:
    """``sum_j sigma_j(A)^alpha`` over singular values above ``atol``."""
    alpha = _check_alpha(alpha)
    sigma = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    return float(np.sum(sigma[sigma > atol] ** alpha))


def elementwise_alpha_power(A, alpha: float) -> float:
    """``sum_ij |A_ij|^alpha``, which dominates the quasi-norm alpha-power for alpha <= 1."""
    alpha = _check_alpha(alpha)
    a = np.abs(np.asarray(A, dtype=float))
    return float(np.sum(a[a > 0] ** alpha))


def split_blocks(A: np.ndarray):
    n = A.shape[0] // 2
    return A[:n, :n], A[:n, n:], A[n:, :n], A[n:, n:]


def bound_operator(factors: FactorMatrices, mask: BipartitionMask) -> np.ndarray:
    """``[M2, P~] J^T M1 J``."""
    Pt = np.concatenate([mask.signs, mask.signs])
    M2 = factors.M2
    comm = M2 * Pt[None, :] - Pt[:, None] * M2
    J = symplectic_form(factors.n)
    return comm @ (J.T @ factors.M1 @ J)


def negativity_upper_bound(factors: FactorMatrices, mask: BipartitionMask, alpha: float | None = None) -> float:
    """Quasi-norm bound ``1/alpha sum_blocks ||([M2, P~] J^T M1 J)_ij||_alpha^alpha``.

    Singular values at the roundoff level of the product are discarded: for
    small ``alpha`` a value of ``1e-16`` would otherwise contribute ``1e-4``.
    """
    alpha = factors.alpha if alpha is None else _check_alpha(alpha)
    A = bound_operator(factors, mask)
    noise = 4 * A.shape[0] * np.finfo(float).eps * np.linalg.norm(factors.M1, 2) * np.linalg.norm(factors.M2, 2)
    return sum(schatten_quasi_norm_alpha_power(b, alpha, atol=noise) for b in split_blocks(A)) / alpha


def dual_graph_norm_check(H: EffectiveHamiltonian, tiling: Tiling, betas, tile_hs=None) -> tuple[float, float]:
    """``(||D- h^1/2||, sqrt(max_degree + 1))``; the first never exceeds the second."""
    if tile_hs is None:
        tile_hs = tile_hamiltonians(H, tiling)
    _, d_minus = tile_direct_sums(tiling, tile_hs, betas)
    root = apply_function(H, lambda x: np.sqrt(np.maximum(x, 0.0)))
    lhs = float(np.linalg.norm(d_minus @ root, 2))
    rhs = math.sqrt(dual_graph(tiling).max_degree + 1)
    return lhs, rhs


def naive_d_minus_bound(tiling: Tiling, tile_hs, betas) -> tuple[float, float]:
    """Diagnostic only: ``(||D-||, max beta)``. Diverges for ground states."""
    _, d_minus = tile_direct_sums(tiling, tile_hs, betas)
    return float(np.linalg.norm(d_minus, 2)), float(max(float(b) for b in betas))


def lattice_exponential_sum(eta: float, d: int) -> float:
    """``sum_{x in Z^d} exp(-eta |x| / 4) = coth(eta / 8)^d``."""
    if not eta > 0:
        raise InvalidParameterError(f"eta must be positive, got {eta}")
    return (1.0 / math.tanh(eta / 8.0)) ** d


def theoretical_prefactor(s: float, C: float, eta: float, d: int, k_max: float) -> float:
    """``(288 / s) C_h^s C (sum_x exp(-eta |x| / 4))^3`` with ``C_h = sqrt(4d + k_max)``."""
    if not 0 < s <= 1:
        raise InvalidParameterError(f"s must lie in (0, 1], got {s}")
    if not eta > 0:
        raise InvalidParameterError(f"eta must be positive, got {eta}")
    C_h = math.sqrt(4 * d + k_max)
    return (288.0 / s) * C_h ** s * C * lattice_exponential_sum(eta, d) ** 3


def theorem_rhs(s: float, C: float, eta: float, d: int, k_max: float, max_degree: int, boundary_size: int) -> float:
    """Area-law right-hand side ``C' (1 + Delta^{s/4}) |boundary|``."""
    return theoretical_prefactor(s, C, eta, d, k_max) * (1.0 + max_degree ** (s / 4.0)) * boundary_size
