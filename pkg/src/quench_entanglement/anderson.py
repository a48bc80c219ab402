"""Random spring constants and the effective one-particle Anderson matrix.

The oscillator Hamiltonian ``sum p_x^2 + q^T h q`` is entirely controlled by the
real symmetric matrix ``h`` with ``2d + k_x`` on the diagonal and ``-1`` between
nearest neighbours. All matrix functions of ``h`` go through one dense
eigendecomposition.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    InvalidParameterError,
    NonPositiveSpectrumError,
    NumericalFailureError,
    SingularityError,
    UnstableEnsembleError,
)
from .lattice import Lattice

#: Smallest eigenvalue of ``h`` for which inverse powers are considered meaningful.
POSITIVITY_FLOOR = 1e-12

DISTRIBUTIONS = ("uniform", "truncated-exponential")

#: Exponent ``r`` of ``h^r`` in front of ``u(h)`` for each correlator kind.
CORRELATOR_KINDS = {"singular": -0.5, "plain": 0.0, "regular": 0.5}


@dataclass(frozen=True, eq=False)
class DisorderField:
    lattice: Lattice
    k: np.ndarray = field(repr=False)
    k_max: float
    seed: int
    realization_index: int
    distribution: str = "uniform"

    def restrict(self, indices) -> np.ndarray:
        return self.k[np.asarray(indices, dtype=int)]


def _disorder_generator(seed: int, realization_index: int) -> np.random.Generator:
    # Philox is counter based: the stream for (seed, realization) is fixed and
    # the site index is the position in that stream.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, realization_index])))


def sample_disorder(
    lattice: Lattice,
    k_max: float,
    seed: int,
    realization_index: int = 0,
    distribution: str = "uniform",
    rate: float = 1.0,
) -> DisorderField:
    """Draw iid spring constants on ``[0, k_max]``, one per site.

    ``distribution="truncated-exponential"`` uses the density proportional to
    ``exp(-rate * k)`` restricted to ``[0, k_max]``.
    """
    if not (k_max > 0 and math.isfinite(k_max)):
        raise InvalidParameterError(f"k_max must be positive and finite, got {k_max}")
    if seed < 0 or realization_index < 0:
        raise InvalidParameterError("seed and realization_index must be nonnegative")
    if distribution not in DISTRIBUTIONS:
        raise InvalidParameterError(f"unknown distribution {distribution!r}")
    u = _disorder_generator(int(seed), int(realization_index)).random(lattice.n_sites)
    if distribution == "uniform":
        k = k_max * u
    else:
        if rate <= 0:
            raise InvalidParameterError(f"rate must be positive, got {rate}")
        # inverse CDF of the truncated exponential
        k = -np.log1p(-u * -np.expm1(-rate * k_max)) / rate
    k = np.clip(k, 0.0, k_max)
    return DisorderField(lattice, k, float(k_max), int(seed), int(realization_index), distribution)


def anderson_matrix(lattice: Lattice, k: np.ndarray) -> np.ndarray:
    n = lattice.n_sites
    h = np.zeros((n, n))
    pairs = lattice.neighbor_pairs()
    h[pairs[:, 0], pairs[:, 1]] = -1.0
    h[pairs[:, 1], pairs[:, 0]] = -1.0
    h[np.diag_indices(n)] = 2 * lattice.dimension + np.asarray(k, dtype=float)
    return h


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """``h`` together with its eigendecomposition ``h = phi diag(evals) phi^T``."""

    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    C_h: float
    dimension: int = 1

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def restrict(self, indices) -> "EffectiveHamiltonian":
        """Principal submatrix on ``indices``: the Anderson matrix of that sub-box."""
        idx = np.asarray(indices, dtype=int)
        return from_matrix(self.matrix[np.ix_(idx, idx)], self.C_h, self.dimension)


def from_matrix(h: np.ndarray, C_h: float | None = None, dimension: int = 1) -> EffectiveHamiltonian:
    h = np.asarray(h, dtype=float)
    try:
        evals, evecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(
            "eigendecomposition of h failed",
            {"shape": h.shape, "finite": bool(np.isfinite(h).all()), "asymmetry": float(np.abs(h - h.T).max())},
        ) from exc
    if C_h is None:
        C_h = math.sqrt(max(float(evals[-1]), 0.0))
    return EffectiveHamiltonian(h, evals, evecs, float(C_h), dimension)


def build_effective_hamiltonian(lattice: Lattice, disorder: DisorderField) -> EffectiveHamiltonian:
    if disorder.lattice is not lattice and disorder.lattice.bounds != lattice.bounds:
        raise InvalidParameterError("disorder field belongs to a different lattice")
    h = anderson_matrix(lattice, disorder.k)
    return from_matrix(h, math.sqrt(4 * lattice.dimension + disorder.k_max), lattice.dimension)


def apply_function(H: EffectiveHamiltonian, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """``phi diag(f(evals)) phi^T``; ``f`` is applied to the eigenvalue vector."""
    with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        warnings.simplefilter("ignore", RuntimeWarning)
        values = np.asarray(f(H.eigenvalues), dtype=float)
    if not np.isfinite(values).all():
        raise SingularityError(
            f"matrix function is not finite on the spectrum (smallest eigenvalue {H.min_eigenvalue:.3e})",
            H.min_eigenvalue,
        )
    return (H.eigenvectors * values) @ H.eigenvectors.T


def require_positive(H: EffectiveHamiltonian, floor: float = POSITIVITY_FLOOR) -> None:
    if H.min_eigenvalue < floor:
        raise SingularityError(
            f"smallest eigenvalue {H.min_eigenvalue:.3e} is below the positivity floor {floor:g}",
            H.min_eigenvalue,
        )


def spectrum_gap(H: EffectiveHamiltonian) -> float:
    """Ground-state gap ``2 * gamma_1`` of the many-oscillator Hamiltonian."""
    if H.min_eigenvalue <= 0:
        raise NonPositiveSpectrumError(
            f"smallest eigenvalue {H.min_eigenvalue:.3e} is not positive", {"min_eigenvalue": H.min_eigenvalue}
        )
    return 2.0 * math.sqrt(H.min_eigenvalue)


def _kind_exponent(kind) -> float:
    if isinstance(kind, str):
        if kind not in CORRELATOR_KINDS:
            raise InvalidParameterError(f"unknown correlator kind {kind!r}")
        return CORRELATOR_KINDS[kind]
    r = float(kind)
    if r not in CORRELATOR_KINDS.values():
        raise InvalidParameterError(f"correlator exponent must be -1/2, 0 or 1/2, got {kind}")
    return r


def _kind_name(kind) -> str:
    r = _kind_exponent(kind)
    return next(name for name, v in CORRELATOR_KINDS.items() if v == r)


def efc_sup_matrix(H: EffectiveHamiltonian, kind) -> np.ndarray:
    """Supremum over ``|u| <= 1`` of ``|<x, h^r u(h) y>|`` for all site pairs.

    With simple spectrum the supremum is attained at ``u = sign(phi_j(x) phi_j(y))``
    and equals ``sum_j evals_j^r |phi_j(x)| |phi_j(y)|``.
    """
    r = _kind_exponent(kind)
    if r < 0:
        require_positive(H)
    weights = H.eigenvalues ** r if r != 0 else np.ones(H.n)
    a = np.abs(H.eigenvectors)
    return (a * weights) @ a.T


def efc_sup_value(H: EffectiveHamiltonian, x: int, y: int, kind) -> float:
    r = _kind_exponent(kind)
    if r < 0:
        require_positive(H)
    weights = H.eigenvalues ** r if r != 0 else np.ones(H.n)
    a = np.abs(H.eigenvectors)
    return float(np.sum(weights * a[x] * a[y]))


@dataclass
class EfcEstimate:
    kind: str
    s: float
    distances: np.ndarray
    averaged_values: np.ndarray
    stderr: np.ndarray
    n_pairs: np.ndarray
    fitted_C: float
    fitted_eta: float
    fit_r2: float
    n_realizations: int
    skipped: int = 0
    seed: int = 0
    fit_range: tuple[int, int] = (0, 0)

    def sidecar(self) -> dict:
        return {
            "fitted_C": self.fitted_C,
            "fitted_eta": self.fitted_eta,
            "fit_r2": self.fit_r2,
            "s": self.s,
            "kind": self.kind,
            "seed": self.seed,
            "n_realizations": self.n_realizations,
            "skipped": self.skipped,
            "fit_range": list(self.fit_range),
        }


def fit_exponential_decay(distances, values) -> tuple[float, float, float]:
    """Least squares of ``log(values)`` on distance; returns ``(C, eta, r2)``.

    Zero values are dropped before fitting.
    """
    x = np.asarray(distances, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = y > 0
    x, y = x[keep], np.log(y[keep])
    if len(x) < 2:
        raise InvalidParameterError("need at least two positive values to fit a decay")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(math.exp(intercept)), float(-slope), r2


def efc_estimate(
    lattice: Lattice,
    k_max: float,
    s: float,
    kind,
    n_realizations: int,
    seed: int,
    distance_range: Sequence[int],
    distribution: str = "uniform",
    rate: float = 1.0,
    max_skip_fraction: float = 0.1,
) -> EfcEstimate:
    """Disorder-averaged ``sup_u |<x, h^r u(h) y>|^s`` as a function of ``|x - y|``.

    Averages are taken over all site pairs at each distance in every realization
    and then over realizations; stderr is across realizations. The decay fit
    uses the distances in the inclusive ``distance_range``.
    """
    if not 0 < s <= 1:
        raise InvalidParameterError(f"s must lie in (0, 1], got {s}")
    if n_realizations < 2:
        raise InvalidParameterError("n_realizations must be at least 2")
    lo, hi = int(distance_range[0]), int(distance_range[1])
    dist = lattice.distance_matrix()
    iu = np.triu_indices(lattice.n_sites)
    pair_dist = dist[iu]
    max_dist = int(pair_dist.max())
    if not 0 <= lo < hi <= max_dist:
        raise InvalidParameterError(f"distance range {distance_range} outside [0, {max_dist}]")
    distances = np.arange(max_dist + 1)
    n_pairs = np.bincount(pair_dist, minlength=max_dist + 1)
    per_real = []
    skipped = 0
    for r in range(n_realizations):
        field_ = sample_disorder(lattice, k_max, seed, r, distribution, rate)
        H = build_effective_hamiltonian(lattice, field_)
        try:
            vals = efc_sup_matrix(H, kind)
        except SingularityError:
            skipped += 1
            continue
        sums = np.bincount(pair_dist, weights=vals[iu] ** s, minlength=max_dist + 1)
        per_real.append(sums / n_pairs)
    if skipped > max_skip_fraction * n_realizations or len(per_real) < 2:
        raise UnstableEnsembleError(
            f"{skipped} of {n_realizations} realizations hit the positivity floor", skipped, n_realizations
        )
    data = np.array(per_real)
    mean = data.mean(axis=0)
    stderr = data.std(axis=0, ddof=1) / math.sqrt(len(data))
    window = (distances >= lo) & (distances <= hi)
    C, eta, r2 = fit_exponential_decay(distances[window], mean[window])
    return EfcEstimate(
        kind=_kind_name(kind),
        s=float(s),
        distances=distances,
        averaged_values=mean,
        stderr=stderr,
        n_pairs=n_pairs,
        fitted_C=C,
        fitted_eta=eta,
        fit_r2=r2,
        n_realizations=len(per_real),
        skipped=skipped,
        seed=int(seed),
        fit_range=(lo, hi),
    )
