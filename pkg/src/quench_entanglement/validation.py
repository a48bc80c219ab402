"""Invariant battery over randomly sampled small instances.

Each check reports an error and the tolerance it is judged against; the
report keeps, per invariant, the number of checks, failures and the worst
margin ``tolerance - error`` (negative means failed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import anderson, bounds, gaussian, lattice as lat, negativity
from .config import QuenchConfig, parse_beta_preset
from .errors import NumericalFailureError, QuenchError

TIMES = (0.0, 0.3, 1.0, 3.0, 10.0)
ALPHAS = (0.25, 0.5, 1.0)
FAULTS = ("partial_transpose_sign",)
MAX_REPORTED_FAILURES = 50


def faulty_partial_transpose(gamma, mask):
    """Deliberately wrong: flips the momentum-momentum block but leaves the mixed blocks alone."""
    n = gamma.n
    s = mask.signs
    g = gamma.gamma.copy()
    g[n:, n:] *= s[:, None] * s[None, :]
    return gaussian.CovarianceMatrix(g, "partially-transposed")


@dataclass
class Instance:
    ident: int
    lattice: lat.Lattice
    tiling: lat.Tiling
    mask: negativity.BipartitionMask
    betas: tuple
    beta_label: str
    H: anderson.EffectiveHamiltonian
    t: float
    aligned_mask: negativity.BipartitionMask | None = None

    def describe(self) -> dict:
        return {
            "id": self.ident,
            "dimension": self.lattice.dimension,
            "bounds": [list(b) for b in self.lattice.bounds],
            "tiling": self.tiling.name,
            "M": self.tiling.M,
            "betas": self.beta_label,
            "t": self.t,
            "inside": [int(i) for i in np.flatnonzero(self.mask.inside)],
        }


def _random_box_shape(rng: np.random.Generator, max_sites: int) -> list[tuple[int, int]]:
    if rng.random() < 0.5:
        n = int(rng.integers(2, max_sites + 1))
        return [(0, n - 1)]
    while True:
        a, b = (int(v) for v in rng.integers(2, 7, size=2))
        if a * b <= max_sites:
            return [(0, a - 1), (0, b - 1)]


def random_tiling(lattice: lat.Lattice, rng: np.random.Generator, family: str | None = None) -> lat.Tiling:
    family = family or str(rng.choice(["single", "singletons", "slabs", "boxes"]))
    if family == "single":
        return lat.single_tile(lattice)
    if family == "singletons":
        return lat.singleton_tiling(lattice)
    if family == "slabs":
        axis = int(rng.integers(lattice.dimension))
        a, b = lattice.bounds[axis]
        return lat.slab_tiling(lattice, axis, int(rng.integers(1, max(2, (b - a + 1) // 2 + 1))))
    return lat.random_box_tiling(lattice, rng, int(rng.integers(1, 6)))


def random_betas(M: int, rng: np.random.Generator) -> tuple[tuple, str]:
    choice = int(rng.integers(4))
    if choice == 0:
        preset = parse_beta_preset("all-ground")
    elif choice == 1:
        preset = parse_beta_preset(f"all-thermal({rng.uniform(0.3, 3.0):.3f})")
    elif choice == 2:
        preset = parse_beta_preset(f"alternating({rng.uniform(0.3, 3.0):.3f})")
    else:
        values = [math.inf if rng.random() < 0.3 else float(rng.uniform(0.2, 5.0)) for _ in range(M)]
        return tuple(values), "custom"
    return preset.resolve(M), preset.label


def random_mask(n: int, rng: np.random.Generator) -> negativity.BipartitionMask:
    k = int(rng.integers(1, n))
    return negativity.BipartitionMask.from_indices(n, rng.choice(n, size=k, replace=False))


def aligned_mask(tiling: lat.Tiling, rng: np.random.Generator) -> negativity.BipartitionMask | None:
    if tiling.M < 2:
        return None
    k = int(rng.integers(1, tiling.M))
    chosen = rng.choice(tiling.M, size=k, replace=False)
    idx = np.concatenate([tiling.tile_sites[m] for m in chosen])
    return negativity.BipartitionMask.from_indices(tiling.lattice.n_sites, idx)


def generate_instances(
    count: int,
    seed: int = 1,
    max_sites: int = 36,
    times=TIMES,
    families=None,
) -> list[Instance]:
    """Random instances with ``d`` in {1, 2} and at most ``max_sites`` sites."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        bounds_ = _random_box_shape(rng, max_sites)
        lattice = lat.build_box(len(bounds_), bounds_)
        family = None if families is None else str(rng.choice(list(families)))
        tiling = random_tiling(lattice, rng, family)
        betas, label = random_betas(tiling.M, rng)
        k_max = float(rng.choice([0.5, 1.0, 2.0]))
        field_ = anderson.sample_disorder(lattice, k_max, int(rng.integers(2**31)), 0)
        H = anderson.build_effective_hamiltonian(lattice, field_)
        t = float(times[i % len(times)])
        out.append(
            Instance(i, lattice, tiling, random_mask(lattice.n_sites, rng), betas, label, H, t, aligned_mask(tiling, rng))
        )
    return out


def config_instances(config: QuenchConfig, start_id: int, max_realizations: int = 3, max_times: int = 5) -> list[Instance]:
    """Instances drawn from the configured geometry itself."""
    geom = config.build_geometry()
    mask = negativity.BipartitionMask.from_bipartition(geom.bipartition)
    grid = config.time_grid.times()
    pick = np.unique(np.linspace(0, len(grid) - 1, min(max_times, len(grid))).round().astype(int))
    rng = np.random.default_rng(config.master_seed)
    out = []
    for r in range(min(max_realizations, config.n_realizations)):
        field_ = anderson.sample_disorder(geom.lattice, config.k_max, config.master_seed, r, config.distribution, config.rate)
        H = anderson.build_effective_hamiltonian(geom.lattice, field_)
        for preset in config.betas:
            for k in pick:
                out.append(
                    Instance(
                        start_id + len(out), geom.lattice, geom.tiling, mask, preset.resolve(geom.tiling.M),
                        preset.label, H, float(grid[k]), aligned_mask(geom.tiling, rng),
                    )
                )
    return out


@dataclass
class InvariantTally:
    tolerance: str
    checked: int = 0
    failed: int = 0
    worst_margin: float = math.inf
    worst_error: float = 0.0
    worst_instance: int | None = None

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "checked": self.checked,
            "failed": self.failed,
            "worst_margin": None if math.isinf(self.worst_margin) else self.worst_margin,
            "worst_error": self.worst_error,
            "worst_instance": self.worst_instance,
        }


TOLERANCES = {
    "route_equivalence": "|N_symplectic - N_upsilon| <= 1e-7 (1 + N)",
    "symplectic_propagator": "||E J E^T - J||_F <= 1e-9",
    "inverse_propagator": "||E^-1 - J^T E^T J||_F <= 1e-9",
    "physicality": "min symplectic eigenvalue of Gamma_t >= 1 - 1e-8",
    "symplectic_invariance": "|d(Gamma_t) - d(Gamma_0)| <= 1e-8 d",
    "initial_separability": "N(t=0) <= 1e-10 for a tile-aligned cut",
    "stationarity": "|N(t) - N(0)| <= 1e-8 when M = 1",
    "bound_dominance": "bound >= N - 1e-10 for alpha in {1/4, 1/2, 1}",
    "dual_graph_norm": "||D- h^1/2|| <= sqrt(Delta + 1) + 1e-10",
    "factorization": "||M1 M2 - Gamma^-1||_F <= 1e-8 ||Gamma^-1||_F",
    "pure_state_symmetry": "|N(cut) - N(complement)| <= 1e-7 (1 + N) for pure states",
    "d_plus_envelope": "||D+|| <= C_h + 1e-10",
    "mask_involution": "partial transpose applied twice is the identity",
}


@dataclass
class Report:
    seed: int
    n_instances: int = 0
    fault: str | None = None
    tallies: dict = field(default_factory=lambda: {k: InvariantTally(v) for k, v in TOLERANCES.items()})
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(t.failed == 0 for t in self.tallies.values())

    @property
    def failing_invariants(self) -> list[str]:
        return [k for k, t in self.tallies.items() if t.failed]

    def record(self, name: str, inst: Instance, error: float, tol: float, detail: str = "") -> None:
        tally = self.tallies[name]
        tally.checked += 1
        margin = tol - error
        if margin < tally.worst_margin:
            tally.worst_margin, tally.worst_error, tally.worst_instance = margin, error, inst.ident
        if not margin >= 0:
            tally.failed += 1
            if len(self.failures) < MAX_REPORTED_FAILURES:
                self.failures.append({"invariant": name, "error": error, "tolerance": tol, "detail": detail, "instance": inst.describe()})

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "seed": self.seed,
            "n_instances": self.n_instances,
            "fault": self.fault,
            "failing_invariants": self.failing_invariants,
            "invariants": {k: t.to_dict() for k, t in self.tallies.items()},
            "failures": self.failures,
        }


def check_instance(inst: Instance, report: Report, pt_fn: Callable | None = None, alphas=ALPHAS) -> None:
    H, tiling, mask, betas, t = inst.H, inst.tiling, inst.mask, inst.betas, inst.t
    n = H.n
    transpose = pt_fn or negativity.partial_transpose
    J = gaussian.symplectic_form(n)
    tile_hs = gaussian.tile_hamiltonians(H, tiling)
    g0 = gaussian.assemble_product_covariance(tiling, tile_hs, betas)
    E = gaussian.propagator(H, t)
    gt = gaussian.evolve_covariance(g0, E)

    report.record("symplectic_propagator", inst, float(np.linalg.norm(E.E @ J @ E.E.T - J)), 1e-9)
    Einv = gaussian.inverse_propagator(H, t)
    report.record("inverse_propagator", inst, float(np.linalg.norm(Einv - J.T @ E.E.T @ J)), 1e-9)

    d0 = negativity.symplectic_spectrum(g0)
    dt = negativity.symplectic_spectrum(gt)
    report.record("physicality", inst, float(max(0.0, 1.0 - min(d0.min(), dt.min()))), 1e-8)
    report.record("symplectic_invariance", inst, float(np.max(np.abs(dt - d0) / d0)), 1e-8)

    twice = transpose(transpose(gt, mask), mask)
    report.record("mask_involution", inst, float(np.abs(twice.gamma - gt.gamma).max()), 0.0)

    try:
        N = negativity.log_negativity(gt, mask, t, partial_transpose_fn=transpose).value
    except NumericalFailureError as exc:
        report.record("route_equivalence", inst, math.inf, 0.0, f"symplectic route failed: {exc}")
        return
    g_inv = gaussian.inverse_covariance(H, tiling, betas, E, tile_hs)
    Nu = negativity.log_negativity_upsilon(gt, g_inv, mask, t).value
    report.record("route_equivalence", inst, abs(N - Nu), 1e-7 * (1 + N))

    if inst.aligned_mask is not None:
        N0 = negativity.log_negativity(g0, inst.aligned_mask, 0.0, partial_transpose_fn=transpose).value
        report.record("initial_separability", inst, abs(N0), 1e-10)

    if tiling.M == 1:
        N_initial = negativity.log_negativity(g0, mask, 0.0, partial_transpose_fn=transpose).value
        report.record("stationarity", inst, abs(N - N_initial), 1e-8)

    if all(math.isinf(b) for b in betas):
        Nc = negativity.log_negativity(gt, mask.complement(), t, partial_transpose_fn=transpose).value
        report.record("pure_state_symmetry", inst, abs(N - Nc), 1e-7 * (1 + N))

    for alpha in alphas:
        factors = bounds.build_factors(H, tiling, betas, t, alpha, tile_hs)
        b = bounds.negativity_upper_bound(factors, mask)
        report.record("bound_dominance", inst, max(0.0, N - b), 1e-10, f"alpha={alpha}, bound={b:.6g}, N={N:.6g}")
    M1M2 = factors.M1 @ factors.M2
    report.record("factorization", inst, float(np.linalg.norm(M1M2 - g_inv)), 1e-8 * float(np.linalg.norm(g_inv)))
    report.record("d_plus_envelope", inst, max(0.0, float(np.linalg.norm(factors.D_plus, 2)) - H.C_h), 1e-10)

    lhs, rhs = bounds.dual_graph_norm_check(H, tiling, betas, tile_hs)
    report.record("dual_graph_norm", inst, max(0.0, lhs - rhs), 1e-10)


def run_battery(
    n_instances: int = 200,
    seed: int = 1,
    fault: str | None = None,
    config: QuenchConfig | None = None,
    max_sites: int = 36,
) -> Report:
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; known faults: {', '.join(FAULTS)}")
    pt_fn = faulty_partial_transpose if fault == "partial_transpose_sign" else None
    instances = generate_instances(n_instances, seed, max_sites)
    if config is not None:
        instances += config_instances(config, len(instances))
    report = Report(seed=seed, n_instances=len(instances), fault=fault)
    for inst in instances:
        try:
            check_instance(inst, report, pt_fn)
        except QuenchError as exc:
            # an instance that cannot be evaluated at all counts against physicality
            report.record("physicality", inst, math.inf, 0.0, f"{type(exc).__name__}: {exc}")
    return report


def battery_from_config(config: QuenchConfig) -> Report:
    opts = config.raw.get("validate", {})
    return run_battery(
        n_instances=int(opts.get("n_instances", 200)),
        seed=int(opts.get("seed", config.master_seed)),
        fault=opts.get("inject_fault"),
        config=config if opts.get("include_config", True) else None,
        max_sites=int(opts.get("max_sites", 36)),
    )
