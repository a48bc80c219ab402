import csv
import io
import math

import numpy as np
import pytest

from conftest import toy_doc
from quench_entanglement import harness
from quench_entanglement.config import QuenchConfig, scan_documents
from quench_entanglement.errors import SingularityError, UnstableEnsembleError


def cfg(**over):
    return QuenchConfig.from_dict(toy_doc(**over))


@pytest.mark.parametrize(
    "x, s",
    [(0.1, "0.1"), (1 / 3, "0.333333333333"), (2, "2"), (np.float64(1e-20), "1e-20"), (math.nan, "nan"), (None, "nan"), (-0.0, "0"), (True, "1")],
)
def test_format_number(x, s):
    assert harness.format_number(x) == s


def test_trajectory_starts_at_zero_for_aligned_cut():
    traj = harness.quench_trajectory(cfg(time_grid={"t_max": 5.0, "n_steps": 6}), 1)
    assert traj.values()[0] <= 1e-10
    assert traj.sup == pytest.approx(traj.values().max())
    assert not traj.skipped


def test_single_tile_trajectory_constant():
    c = cfg(tiling={"kind": "single"}, betas=["all-ground", "all-thermal(0.7)"], time_grid={"t_max": 10.0, "n_steps": 11})
    traj = harness.quench_trajectory(c, 0)
    for label in traj.presets:
        v = traj.values(label)
        assert np.ptp(v) <= 1e-8


def test_trajectory_bounds_dominate():
    c = cfg(compute={"bounds": True, "upsilon_route": True}, betas=["all-ground", "alternating(2)"])
    out = harness.simulate_realization(c, 0)
    assert (out.bound >= out.N - 1e-10).all()
    assert np.abs(out.N_upsilon - out.N).max() <= 1e-7 * (1 + out.N.max())


def test_single_realization_stderr_undefined():
    agg = harness.disorder_average(cfg(disorder={"k_max": 1.0, "master_seed": 7, "n_realizations": 1}))
    assert agg.n_effective == 1 and agg.stderr is None
    assert np.isfinite(agg.mean)


def test_disorder_average_deterministic():
    a = harness.disorder_average(cfg(betas=["all-ground", "all-thermal(1)"]))
    b = harness.disorder_average(cfg(betas=["all-ground", "all-thermal(1)"]))
    assert a.mean == b.mean and a.stderr == b.stderr
    assert np.array_equal(a.sup_values, b.sup_values)
    assert set(a.per_preset_mean) == {"all-ground", "all-thermal(1)"}
    assert a.mean >= max(a.per_preset_mean.values()) - 1e-15


def test_parallel_equals_serial():
    c = cfg(disorder={"k_max": 1.0, "master_seed": 7, "n_realizations": 5})
    serial = harness.run_ensemble(c, workers=1)
    parallel = harness.run_ensemble(c, workers=3)
    assert [o.index for o in parallel] == list(range(5))
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.N, b.N)


def test_constant_quantity_has_zero_stderr():
    # with only t = 0 on the grid and a tile-aligned cut, sup N is identically zero
    agg = harness.disorder_average(cfg(time_grid={"t_max": 0.0, "n_steps": 1}))
    assert agg.mean == pytest.approx(0.0, abs=1e-10)
    assert agg.stderr == pytest.approx(0.0, abs=1e-10)


def test_skip_accounting(monkeypatch):
    real = harness.anderson.spectrum_gap
    calls = {"n": 0}

    def flaky(H):
        calls["n"] += 1
        if calls["n"] == 2:
            raise SingularityError("forced", 0.0)
        return real(H)

    monkeypatch.setattr(harness.anderson, "spectrum_gap", flaky)
    c = cfg(disorder={"k_max": 1.0, "master_seed": 7, "n_realizations": 4})
    outcomes = harness.run_ensemble(c)
    agg = harness.aggregate_outcomes(c, outcomes)
    assert agg.skipped == 1 and agg.n_effective == 3 and agg.skipped_indices == [1]
    assert agg.n_effective + agg.skipped == c.n_realizations
    assert "forced" in outcomes[1].reason


def test_all_skipped_raises(monkeypatch):
    def always(H):
        raise SingularityError("forced", 0.0)

    monkeypatch.setattr(harness.anderson, "spectrum_gap", always)
    with pytest.raises(UnstableEnsembleError):
        harness.disorder_average(cfg())


def scan_configs(base, rows):
    return [QuenchConfig.from_dict(d) for d in scan_documents(dict(base, scan={"rows": rows}))]


def test_scan_1d_boundary_column_constant():
    base = toy_doc(time_grid={"t_max": 2.0, "n_steps": 3}, disorder={"k_max": 1.0, "master_seed": 2, "n_realizations": 2})
    rows = []
    for L in (20, 40, 80):
        c = L // 4
        rows.append({"geometry": {"dimension": 1, "bounds": [[0, L - 1]]}, "bipartition": {"boxes": [[[c, c + L // 2 - 1]]]}})
    out = harness.area_law_scan(scan_configs(base, rows))
    assert [r.boundary_size for r in out] == [2, 2, 2]
    assert [r.L for r in out] == [20, 40, 80]
    assert all(r.max_degree == 2 for r in out)


def test_scan_2d_slicing_vs_singletons():
    base = toy_doc(
        geometry={"dimension": 2, "bounds": [[0, 11], [0, 11]]},
        bipartition={"boxes": [[[3, 8], [3, 8]]]},
        time_grid={"t_max": 0.5, "n_steps": 2},
        disorder={"k_max": 1.0, "master_seed": 2, "n_realizations": 1},
    )
    rows = [{"tiling": {"kind": "slabs", "axis": 0, "width": 1}}, {"tiling": {"kind": "singletons"}}]
    out = harness.area_law_scan(scan_configs(base, rows))
    assert [r.max_degree for r in out] == [2, 4]


def test_scan_crafted_row_1d():
    base = toy_doc(geometry={"dimension": 1, "bounds": [[0, 29]]}, bipartition={"boxes": [[[10, 19]]]}, time_grid={"t_max": 1.0, "n_steps": 2})
    out = harness.area_law_scan(scan_configs(base, [{"tiling": {"kind": "crafted"}}, {"tiling": {"kind": "singletons"}}]))
    assert out[0].max_degree == out[0].boundary_size == 2
    assert out[0].tiling_id == "crafted"


def test_scan_shares_ensembles_and_keeps_order():
    base = toy_doc(compute={"bounds": True})
    rows = [{"bipartition": {"boxes": [[[0, 4]]]}}, {"disorder": {"master_seed": 9}}, {"bipartition": {"boxes": [[[3, 6]]]}}]
    configs = scan_configs(base, rows)
    out = harness.area_law_scan(configs)
    assert [r.seed for r in out] == [7, 9, 7]
    direct = harness.disorder_average(configs[2])
    assert out[2].sup_t_N_mean == direct.mean
    for r in out:
        assert r.bound_mean >= r.N_mean - 1e-8
        assert r.N_stderr >= 0 and r.N_mean >= -1e-10
        assert r.sup_t_N_mean >= r.N_mean


def test_scan_theorem_rhs_from_supplied_constants():
    base = toy_doc(efc={"C": 0.8, "eta": 0.05, "s": 0.5})
    out = harness.area_law_scan(scan_configs(base, [{}, {"bipartition": {"boxes": [[[3, 6]]]}}]))
    from quench_entanglement import bounds

    assert out[1].theorem_rhs == pytest.approx(bounds.theorem_rhs(0.5, 0.8, 0.05, 1, 1.0, 2, 2))
    assert out[0].theorem_rhs == pytest.approx(out[1].theorem_rhs / 2)


def test_scan_theorem_rhs_from_efc_estimate():
    base = toy_doc(
        geometry={"dimension": 1, "bounds": [[0, 39]]},
        bipartition={"boxes": [[[10, 19]]]},
        compute={"efc": True},
        efc={"distance_range": [2, 20], "n_realizations": 20},
    )
    out = harness.area_law_scan(scan_configs(base, [{}, {"bipartition": {"boxes": [[[5, 24]]]}}]))
    assert out[0].theorem_rhs is not None and out[0].theorem_rhs > out[0].sup_t_N_mean


def test_csv_writer_flushes_each_row():
    buf = io.StringIO()
    w = harness.CsvRowWriter(buf, ["a", "b"])
    w.write(["1", "2"])
    assert list(csv.reader(io.StringIO(buf.getvalue()))) == [["a", "b"], ["1", "2"]]


def test_scan_row_column_order():
    c = cfg()
    agg = harness.disorder_average(c)
    row = harness.make_scan_row(c, agg, None)
    fields = row.csv_fields()
    assert len(fields) == len(harness.SCAN_COLUMNS)
    assert harness.SCAN_COLUMNS[:17] == (
        "d", "L", "n_sites", "tiling_id", "max_degree", "boundary_size", "beta_preset", "t",
        "n_realizations", "N_mean", "N_stderr", "sup_t_N_mean", "bound_mean", "theorem_rhs",
        "gap_mean", "gap_min", "seed",
    )
    assert fields[13] == "nan"


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv(harness.WORKERS_ENV, raising=False)
    assert harness.resolve_workers(None) == 1
    monkeypatch.setenv(harness.WORKERS_ENV, "4")
    assert harness.resolve_workers(None) == 4
    assert harness.resolve_workers(2) == 2
