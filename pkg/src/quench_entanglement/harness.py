"""Quench trajectories, disorder averages and area-law scans.

Every realization is a pure function of ``(config, realization_index)``, so
results are collected and reduced in realization order no matter how many
worker processes run them.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import anderson, bounds, gaussian, negativity
from .config import Geometry, QuenchConfig
from .errors import SingularityError, UnstableEnsembleError

log = logging.getLogger(__name__)

WORKERS_ENV = "QUENCH_WORKERS"


def format_number(x) -> str:
    """Locale-independent formatting with 12 significant digits."""
    if x is None:
        return "nan"
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = f"{x:.12g}"
    return "0" if out == "-0" else out


@dataclass
class RealizationOutcome:
    """Negativity data of one disorder realization.

    Arrays are indexed ``[mask, preset, time]``.
    """

    index: int
    skipped: bool = False
    reason: str = ""
    gap: float = math.nan
    min_eigenvalue: float = math.nan
    N: np.ndarray | None = None
    N_upsilon: np.ndarray | None = None
    bound: np.ndarray | None = None


@dataclass
class Trajectory:
    """Negativity time series of one realization for one bipartition."""

    realization_index: int
    times: np.ndarray
    presets: tuple[str, ...]
    results: dict = field(default_factory=dict)  # preset label -> list[NegativityResult]
    bound: dict = field(default_factory=dict)
    skipped: bool = False
    reason: str = ""

    def values(self, label: str | None = None) -> np.ndarray:
        label = label or self.presets[0]
        return np.array([r.value for r in self.results[label]])

    @property
    def sup(self) -> float:
        if self.skipped:
            return math.nan
        return max(float(self.values(p).max()) for p in self.presets)


def _masks_for(geometry: Geometry, extra: Sequence[np.ndarray] | None):
    if extra is None:
        return [negativity.BipartitionMask.from_bipartition(geometry.bipartition)]
    return [negativity.BipartitionMask(np.asarray(m, dtype=bool)) for m in extra]


def simulate_realization(
    config: QuenchConfig,
    realization_index: int,
    masks: Sequence[np.ndarray] | None = None,
    keep_results: bool = False,
):
    """Run one realization for several bipartitions sharing the same state.

    Returns a :class:`RealizationOutcome`; with ``keep_results`` also the full
    :class:`NegativityResult` objects as ``{(mask, preset): [..]}``.
    """
    geom = config.build_geometry()
    lattice, tiling = geom.lattice, geom.tiling
    mask_objs = _masks_for(geom, masks)
    times = config.time_grid.times()
    n_m, n_p, n_t = len(mask_objs), len(config.betas), len(times)
    field_ = anderson.sample_disorder(
        lattice, config.k_max, config.master_seed, realization_index, config.distribution, config.rate
    )
    H = anderson.build_effective_hamiltonian(lattice, field_)
    out = RealizationOutcome(realization_index, min_eigenvalue=H.min_eigenvalue)
    kept: dict = {}
    try:
        out.gap = anderson.spectrum_gap(H)
        tile_hs = gaussian.tile_hamiltonians(H, tiling)
        betas = [p.resolve(tiling.M) for p in config.betas]
        initial = [gaussian.assemble_product_covariance(tiling, tile_hs, b) for b in betas]
        N = np.zeros((n_m, n_p, n_t))
        Nu = np.zeros((n_m, n_p, n_t)) if config.compute_upsilon_route else None
        bd = np.zeros((n_m, n_p, n_t)) if config.compute_bounds else None
        for k, t in enumerate(times):
            E = gaussian.propagator(H, t)
            for p, (b, g0) in enumerate(zip(betas, initial)):
                gt = gaussian.evolve_covariance(g0, E)
                g_inv = gaussian.inverse_covariance(H, tiling, b, E, tile_hs) if Nu is not None else None
                factors = bounds.build_factors(H, tiling, b, t, config.bound_alpha, tile_hs) if bd is not None else None
                for m, mask in enumerate(mask_objs):
                    res = negativity.log_negativity(gt, mask, t=float(t))
                    res.min_eigenvalue_h = H.min_eigenvalue
                    N[m, p, k] = res.value
                    if keep_results:
                        kept.setdefault((m, p), []).append(res)
                    if Nu is not None:
                        Nu[m, p, k] = negativity.log_negativity_upsilon(gt, g_inv, mask, t=float(t)).value
                    if bd is not None:
                        bd[m, p, k] = bounds.negativity_upper_bound(factors, mask)
    except SingularityError as exc:
        log.info("realization %d skipped: %s", realization_index, exc)
        out.skipped, out.reason = True, str(exc)
        return (out, kept) if keep_results else out
    out.N, out.N_upsilon, out.bound = N, Nu, bd
    return (out, kept) if keep_results else out


def quench_trajectory(config: QuenchConfig, realization_index: int) -> Trajectory:
    outcome, kept = simulate_realization(config, realization_index, keep_results=True)
    labels = tuple(p.label for p in config.betas)
    traj = Trajectory(realization_index, config.time_grid.times(), labels, skipped=outcome.skipped, reason=outcome.reason)
    if not outcome.skipped:
        for p, label in enumerate(labels):
            traj.results[label] = kept[(0, p)]
            if outcome.bound is not None:
                traj.bound[label] = outcome.bound[0, p]
    return traj


def resolve_workers(cli_value: int | None = None, config: QuenchConfig | None = None) -> int:
    if cli_value is not None:
        return max(1, int(cli_value))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    if config is not None and config.workers:
        return int(config.workers)
    return 1


def _run_one(args):
    config, index, masks = args
    return simulate_realization(config, index, masks)


def run_ensemble(config: QuenchConfig, masks=None, workers: int = 1) -> list[RealizationOutcome]:
    """All realizations of ``config`` in index order."""
    jobs = [(config, r, masks) for r in range(config.n_realizations)]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


@dataclass
class Aggregate:
    mean: float
    stderr: float | None
    n_effective: int
    skipped: int
    skipped_indices: list[int]
    sup_values: np.ndarray = field(repr=False)
    per_preset_mean: dict = field(default_factory=dict)
    mean_trajectory: np.ndarray | None = field(default=None, repr=False)
    stderr_trajectory: np.ndarray | None = field(default=None, repr=False)
    bound_sup_mean: float | None = None
    upsilon_max_deviation: float | None = None
    gap_mean: float = math.nan
    gap_min: float = math.nan

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_effective": self.n_effective,
            "skipped": self.skipped,
            "skipped_indices": self.skipped_indices,
            "per_preset_mean": self.per_preset_mean,
            "bound_sup_mean": self.bound_sup_mean,
            "upsilon_max_deviation": self.upsilon_max_deviation,
            "gap_mean": self.gap_mean,
            "gap_min": self.gap_min,
        }


def _mean_stderr(values: np.ndarray) -> tuple[float, float | None]:
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, None
    return mean, float(np.std(values, ddof=1) / math.sqrt(len(values)))


def aggregate_outcomes(config: QuenchConfig, outcomes: Sequence[RealizationOutcome], mask_index: int = 0) -> Aggregate:
    good = [o for o in outcomes if not o.skipped]
    skipped = [o.index for o in outcomes if o.skipped]
    if not good:
        raise UnstableEnsembleError(f"all {len(outcomes)} realizations were skipped", len(skipped), len(outcomes))
    N = np.stack([o.N[mask_index] for o in good])  # (R, preset, time)
    best = N.max(axis=1)  # max over presets -> (R, time)
    sup = best.max(axis=1)
    mean, stderr = _mean_stderr(sup)
    per_preset = {p.label: float(N[:, i].max(axis=1).mean()) for i, p in enumerate(config.betas)}
    traj_mean = best.mean(axis=0)
    traj_err = best.std(axis=0, ddof=1) / math.sqrt(len(good)) if len(good) > 1 else np.full(best.shape[1], math.nan)
    agg = Aggregate(mean, stderr, len(good), len(skipped), skipped, sup, per_preset, traj_mean, traj_err)
    if good[0].bound is not None:
        agg.bound_sup_mean = float(np.mean([o.bound[mask_index].max() for o in good]))
    if good[0].N_upsilon is not None:
        agg.upsilon_max_deviation = float(max(np.abs(o.N_upsilon[mask_index] - o.N[mask_index]).max() for o in good))
    gaps = np.array([o.gap for o in good])
    agg.gap_mean, agg.gap_min = float(gaps.mean()), float(gaps.min())
    return agg


def disorder_average(config: QuenchConfig, workers: int = 1) -> Aggregate:
    return aggregate_outcomes(config, run_ensemble(config, workers=workers))


SCAN_COLUMNS = (
    "d", "L", "n_sites", "tiling_id", "max_degree", "boundary_size", "beta_preset", "t",
    "n_realizations", "N_mean", "N_stderr", "sup_t_N_mean", "bound_mean", "theorem_rhs",
    "gap_mean", "gap_min", "seed", "sup_t_N_stderr", "skipped",
)


@dataclass
class ScanRow:
    d: int
    L: int
    n_sites: int
    tiling_id: str
    max_degree: int
    boundary_size: int
    beta_preset: str
    t: float
    n_realizations: int
    N_mean: float
    N_stderr: float | None
    sup_t_N_mean: float
    bound_mean: float | None
    theorem_rhs: float | None
    gap_mean: float
    gap_min: float
    seed: int
    sup_t_N_stderr: float | None = None
    skipped: int = 0

    def csv_fields(self) -> list[str]:
        d = asdict(self)
        return [d[c] if isinstance(d[c], str) else format_number(d[c]) for c in SCAN_COLUMNS]


def efc_for_config(config: QuenchConfig) -> anderson.EfcEstimate:
    geom = config.build_geometry()
    max_dist = int(geom.lattice.distance_matrix().max())
    lo, hi = config.efc.get("distance_range", [2, min(30, max_dist)])
    return anderson.efc_estimate(
        geom.lattice,
        config.k_max,
        config.s,
        config.efc.get("kind", "singular"),
        int(config.efc.get("n_realizations", max(2, config.n_realizations))),
        config.master_seed,
        (lo, hi),
        config.distribution,
        config.rate,
    )


def _decay_constants(config: QuenchConfig, efc_cache: dict) -> tuple[float, float] | None:
    if "C" in config.efc and "eta" in config.efc:
        return float(config.efc["C"]), float(config.efc["eta"])
    if not config.compute_efc:
        return None
    key = config.ensemble_key()
    if key not in efc_cache:
        efc_cache[key] = efc_for_config(config)
    est = efc_cache[key]
    return (est.fitted_C, est.fitted_eta) if est.fitted_eta > 0 else None


def make_scan_row(config: QuenchConfig, agg: Aggregate, decay: tuple[float, float] | None) -> ScanRow:
    geom = config.build_geometry()
    lattice = geom.lattice
    k = int(np.argmax(agg.mean_trajectory))
    times = config.time_grid.times()
    rhs = None
    if decay is not None:
        C, eta = decay
        rhs = bounds.theorem_rhs(
            config.s, C, eta, lattice.dimension, config.k_max, geom.dual.max_degree, geom.bipartition.boundary_size
        )
    return ScanRow(
        d=lattice.dimension,
        L=max(b - a + 1 for a, b in lattice.bounds),
        n_sites=lattice.n_sites,
        tiling_id=geom.tiling.name,
        max_degree=geom.dual.max_degree,
        boundary_size=geom.bipartition.boundary_size,
        beta_preset="|".join(p.label for p in config.betas),
        t=float(times[k]),
        n_realizations=agg.n_effective,
        N_mean=float(agg.mean_trajectory[k]),
        N_stderr=None if math.isnan(agg.stderr_trajectory[k]) else float(agg.stderr_trajectory[k]),
        sup_t_N_mean=agg.mean,
        bound_mean=agg.bound_sup_mean,
        theorem_rhs=rhs,
        gap_mean=agg.gap_mean,
        gap_min=agg.gap_min,
        seed=config.master_seed,
        sup_t_N_stderr=agg.stderr,
        skipped=agg.skipped,
    )


def area_law_scan(
    configs: Sequence[QuenchConfig],
    workers: int = 1,
    on_row: Callable[[ScanRow], None] | None = None,
) -> list[ScanRow]:
    """One :class:`ScanRow` per config, produced in input order.

    Configs that differ only in the bipartition share one ensemble run.
    """
    groups: dict[str, list[int]] = {}
    for i, c in enumerate(configs):
        groups.setdefault(c.ensemble_key(), []).append(i)
    done: dict[int, Aggregate] = {}
    efc_cache: dict = {}
    rows = []
    for i, config in enumerate(configs):
        if i not in done:
            members = groups[config.ensemble_key()]
            masks = [configs[j].build_geometry().bipartition.mask for j in members]
            outcomes = run_ensemble(config, masks=masks, workers=workers)
            for m, j in enumerate(members):
                done[j] = aggregate_outcomes(configs[j], outcomes, mask_index=m)
        row = make_scan_row(config, done.pop(i), _decay_constants(config, efc_cache))
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows


class CsvRowWriter:
    """Writes a header and then rows, flushing after each one."""

    def __init__(self, stream: io.TextIOBase, header: Iterable[str]):
        self.stream = stream
        self.writer = csv.writer(stream, lineterminator="\n")
        self.writer.writerow(list(header))
        stream.flush()

    def write(self, fields: Iterable[str]) -> None:
        self.writer.writerow(list(fields))
        self.stream.flush()


def trajectory_header(config: QuenchConfig) -> list[str]:
    cols = ["realization", "t"]
    for p in config.betas:
        cols.append(f"N[{p.label}]")
        if config.compute_upsilon_route:
            cols.append(f"N_upsilon[{p.label}]")
        if config.compute_bounds:
            cols.append(f"bound[{p.label}]")
    return cols


def trajectory_rows(config: QuenchConfig, outcomes: Sequence[RealizationOutcome]):
    times = config.time_grid.times()
    for o in outcomes:
        if o.skipped:
            continue
        for k, t in enumerate(times):
            row = [format_number(o.index), format_number(t)]
            for p in range(len(config.betas)):
                row.append(format_number(o.N[0, p, k]))
                if o.N_upsilon is not None:
                    row.append(format_number(o.N_upsilon[0, p, k]))
                if o.bound is not None:
                    row.append(format_number(o.bound[0, p, k]))
            yield row
