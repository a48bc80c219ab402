"""Gaussian states of the oscillator lattice in phase-space form.

Phase-space vectors are ordered as all positions (in site order) followed by
all momenta. A state is represented by its real symmetric covariance matrix
``Gamma``; its characteristic function is ``exp(-1/4 f~^T Gamma f~)``.
The vacuum of a single mode with ``h = gamma^2`` has ``Gamma = diag(1/gamma, gamma)``,
so physical states have symplectic eigenvalues >= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .anderson import EffectiveHamiltonian, apply_function, require_positive
from .errors import ConfigurationError, InvalidParameterError, SingularityError
from .lattice import Tiling

INFINITY = math.inf

_SERIES_CUTOFF = 1e-4
_COTH_GUARD = 1e-8


def symplectic_form(n: int) -> np.ndarray:
    """``J = [[0, -I], [I, 0]]`` on ``R^n + R^n``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


@dataclass(frozen=True)
class PhaseSpaceConvention:
    n: int
    ordering: str = "qp-blocks"

    @property
    def J(self) -> np.ndarray:
        return symplectic_form(self.n)


def coth(y):
    """Elementwise ``coth`` for ``y > 0``, accurate for small arguments; ``coth(inf) = 1``."""
    y = np.asarray(y, dtype=float)
    out = np.ones_like(y)
    small = y <= _SERIES_CUTOFF
    big = ~small & (y < 40.0)  # coth(40) == 1 in double precision
    out[big] = 1.0 + 2.0 / np.expm1(2.0 * y[big])
    out[small] = 1.0 / y[small] + y[small] / 3.0
    return out


def _is_infinite(beta) -> bool:
    return beta is INFINITY or (isinstance(beta, float) and math.isinf(beta))


def validate_betas(betas: Sequence[float], M: int) -> tuple[float, ...]:
    out = []
    for b in betas:
        if isinstance(b, str):
            if b.strip().lower() != "inf":
                raise InvalidParameterError(f"unrecognised inverse temperature {b!r}")
            b = INFINITY
        b = float(b)
        if not b > 0:
            raise InvalidParameterError(f"inverse temperatures must be positive, got {b}")
        out.append(b)
    if len(out) != M:
        raise ConfigurationError(f"expected {M} inverse temperatures (one per tile), got {len(out)}")
    return tuple(out)


def _coth_factor(beta: float, H: EffectiveHamiltonian) -> np.ndarray:
    if _is_infinite(beta):
        return np.ones(H.n)
    y = beta * np.sqrt(np.maximum(H.eigenvalues, 0.0))
    if y.min() < _COTH_GUARD:
        raise SingularityError(
            f"beta * gamma_1 = {y.min():.3e} is too small for a stable coth", H.min_eigenvalue
        )
    return coth(y)


def _tanh_factor(beta: float, H: EffectiveHamiltonian) -> np.ndarray:
    if _is_infinite(beta):
        return np.ones(H.n)
    return np.tanh(beta * np.sqrt(np.maximum(H.eigenvalues, 0.0)))


def thermal_covariance_blocks(H_m: EffectiveHamiltonian, beta_m: float) -> tuple[np.ndarray, np.ndarray]:
    """Position and momentum blocks ``coth(beta h^1/2) h^-1/2`` and ``coth(beta h^1/2) h^1/2``
    of the thermal (or, for ``beta = inf``, ground) state of one tile. The mixed
    blocks vanish."""
    require_positive(H_m)
    c = _coth_factor(beta_m, H_m)
    root = np.sqrt(H_m.eigenvalues)
    phi = H_m.eigenvectors
    qq = (phi * (c / root)) @ phi.T
    pp = (phi * (c * root)) @ phi.T
    return qq, pp


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    gamma: np.ndarray = field(repr=False)
    provenance: str = "initial"

    @property
    def n(self) -> int:
        return self.gamma.shape[0] // 2

    @property
    def convention(self) -> PhaseSpaceConvention:
        return PhaseSpaceConvention(self.n)

    def blocks(self):
        n = self.n
        g = self.gamma
        return g[:n, :n], g[:n, n:], g[n:, :n], g[n:, n:]


def tile_hamiltonians(H: EffectiveHamiltonian, tiling: Tiling) -> list[EffectiveHamiltonian]:
    if tiling.lattice.n_sites != H.n:
        raise ConfigurationError("tiling and Hamiltonian refer to different lattices")
    return [H.restrict(idx) for idx in tiling.tile_sites]


def _check_tiles(tiling: Tiling, tile_hs) -> None:
    if len(tile_hs) != tiling.M:
        raise ConfigurationError(f"expected {tiling.M} tile Hamiltonians, got {len(tile_hs)}")
    for m, (idx, Hm) in enumerate(zip(tiling.tile_sites, tile_hs)):
        if Hm.n != len(idx):
            raise ConfigurationError(f"tile {m} has {len(idx)} sites but its Hamiltonian has size {Hm.n}")


def assemble_product_covariance(tiling: Tiling, tile_hs, betas) -> CovarianceMatrix:
    """Covariance of the product of tile thermal/ground states in global site order."""
    _check_tiles(tiling, tile_hs)
    betas = validate_betas(betas, tiling.M)
    n = tiling.lattice.n_sites
    gamma = np.zeros((2 * n, 2 * n))
    for idx, Hm, b in zip(tiling.tile_sites, tile_hs, betas):
        qq, pp = thermal_covariance_blocks(Hm, b)
        gamma[np.ix_(idx, idx)] = qq
        gamma[np.ix_(idx + n, idx + n)] = pp
    return CovarianceMatrix(gamma, "initial")


@dataclass(frozen=True, eq=False)
class Propagator:
    E: np.ndarray = field(repr=False)
    t: float = 0.0

    @property
    def n(self) -> int:
        return self.E.shape[0] // 2


def _evolution_blocks(H: EffectiveHamiltonian, t: float):
    lam = np.maximum(H.eigenvalues, 0.0)
    root = np.sqrt(lam)
    phase = 2.0 * t * root
    cos = np.cos(phase)
    sin_times_root = root * np.sin(phase)
    # h^{-1/2} sin(2 t h^{1/2}) as one entire function: 2t * sinc(2t sqrt(x) / pi)
    sin_over_root = 2.0 * t * np.sinc(phase / math.pi)
    phi = H.eigenvectors
    mk = lambda v: (phi * v) @ phi.T  # noqa: E731
    return mk(cos), mk(sin_times_root), mk(sin_over_root)


def propagator(H: EffectiveHamiltonian, t: float) -> Propagator:
    """Phase-space map ``[[cos, -h^1/2 sin], [h^-1/2 sin, cos]]`` of ``2 t h^1/2``."""
    t = float(t)
    if not math.isfinite(t):
        raise InvalidParameterError(f"time must be finite, got {t}")
    c, s_root, s_over = _evolution_blocks(H, t)
    return Propagator(np.block([[c, -s_root], [s_over, c]]), t)


def inverse_propagator(H: EffectiveHamiltonian, t: float) -> np.ndarray:
    """Block form of ``E_t^{-1}`` (no numerical inversion)."""
    c, s_root, s_over = _evolution_blocks(H, float(t))
    return np.block([[c, s_root], [-s_over, c]])


def evolve_covariance(gamma: CovarianceMatrix, E: Propagator) -> CovarianceMatrix:
    g = gamma.gamma
    if g.shape != E.E.shape:
        raise ConfigurationError(f"covariance shape {g.shape} does not match propagator {E.E.shape}")
    out = E.E.T @ g @ E.E
    return CovarianceMatrix(0.5 * (out + out.T), "evolved")


def characteristic_function(gamma: CovarianceMatrix, f) -> float:
    """``exp(-1/4 f~^T Gamma f~)`` with ``f~ = (Re f, Im f)``."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (gamma.n,):
        raise ConfigurationError(f"test function must have length {gamma.n}, got shape {f.shape}")
    ft = np.concatenate([f.real, f.imag])
    return float(np.exp(-0.25 * ft @ gamma.gamma @ ft))


def tile_direct_sums(tiling: Tiling, tile_hs, betas) -> tuple[np.ndarray, np.ndarray]:
    """``(D+, D-)`` = direct sums of ``tanh(beta h^1/2) h^{+-1/2}`` over tiles, globally ordered."""
    _check_tiles(tiling, tile_hs)
    betas = validate_betas(betas, tiling.M)
    n = tiling.lattice.n_sites
    d_plus = np.zeros((n, n))
    d_minus = np.zeros((n, n))
    for idx, Hm, b in zip(tiling.tile_sites, tile_hs, betas):
        require_positive(Hm)
        th = _tanh_factor(b, Hm)
        root = np.sqrt(Hm.eigenvalues)
        phi = Hm.eigenvectors
        d_plus[np.ix_(idx, idx)] = (phi * (th * root)) @ phi.T
        d_minus[np.ix_(idx, idx)] = (phi * (th / root)) @ phi.T
    return d_plus, d_minus


def inverse_covariance(H: EffectiveHamiltonian, tiling: Tiling, betas, E: Propagator, tile_hs=None) -> np.ndarray:
    """Closed form of ``Gamma_t^{-1} = E_t^{-1} (D+ (+) D-) E_t^{-T}``."""
    if tile_hs is None:
        tile_hs = tile_hamiltonians(H, tiling)
    d_plus, d_minus = tile_direct_sums(tiling, tile_hs, betas)
    n = H.n
    zero = np.zeros((n, n))
    mid = np.block([[d_plus, zero], [zero, d_minus]])
    Einv = inverse_propagator(H, E.t)
    out = Einv @ mid @ Einv.T
    return 0.5 * (out + out.T)


def thermal_state(H: EffectiveHamiltonian, tiling: Tiling, betas, tile_hs=None) -> CovarianceMatrix:
    """Convenience wrapper: restrict ``H`` to the tiles and assemble the product state."""
    if tile_hs is None:
        tile_hs = tile_hamiltonians(H, tiling)
    return assemble_product_covariance(tiling, tile_hs, betas)


def matrix_power_function(H: EffectiveHamiltonian, power: float) -> np.ndarray:
    if power < 0:
        require_positive(H)
    return apply_function(H, lambda x: np.maximum(x, 0.0) ** power)
