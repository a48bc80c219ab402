import json
import math

import numpy as np
import pytest

from conftest import toy_doc
from quench_entanglement.config import (
    QuenchConfig,
    TimeGrid,
    deep_merge,
    load_document,
    parse_beta,
    parse_beta_preset,
    scan_documents,
    validate_document,
)
from quench_entanglement.errors import ConfigurationError, InvalidParameterError


def test_defaults():
    doc = toy_doc()
    del doc["betas"]
    c = QuenchConfig.from_dict(doc)
    assert [p.label for p in c.betas] == ["all-ground", "all-thermal(1)", "alternating(1)"]
    assert c.s == 0.5 and c.bound_alpha == 0.25
    assert not (c.compute_bounds or c.compute_upsilon_route or c.compute_efc)


@pytest.mark.parametrize("value, expected", [("inf", math.inf), ("Infinity", math.inf), (2, 2.0), ("0.5", 0.5)])
def test_parse_beta(value, expected):
    assert parse_beta(value) == expected


@pytest.mark.parametrize("value", [0, -1, "nan", "hot"])
def test_parse_beta_rejects(value):
    with pytest.raises(InvalidParameterError):
        parse_beta(value)


def test_presets_resolve():
    assert parse_beta_preset("all-ground").resolve(3) == (math.inf,) * 3
    assert parse_beta_preset("all-thermal(2.5)").resolve(2) == (2.5, 2.5)
    assert parse_beta_preset("alternating(1)").resolve(4) == (math.inf, 1.0, math.inf, 1.0)
    custom = parse_beta_preset([1, "inf"])
    assert custom.resolve(2) == (1.0, math.inf)
    with pytest.raises(ConfigurationError):
        custom.resolve(3)
    with pytest.raises(ConfigurationError):
        parse_beta_preset("lukewarm")


def test_time_grid():
    assert TimeGrid(20.0, 41).times()[1] == pytest.approx(0.5)
    assert TimeGrid(1.0, 4, include_zero=False).times().tolist() == [0.25, 0.5, 0.75, 1.0]
    assert TimeGrid(0.0, 1).times().tolist() == [0.0]


@pytest.mark.parametrize(
    "mutate, where",
    [
        (lambda d: d["disorder"].pop("k_max"), "disorder"),
        (lambda d: d["time_grid"].update(n_steps=0), "time_grid/n_steps"),
        (lambda d: d["disorder"].update(n_realizations=0), "disorder/n_realizations"),
        (lambda d: d["time_grid"].update(t_max=-1), "time_grid/t_max"),
        (lambda d: d.update(surprise=1), "<root>"),
        (lambda d: d["tiling"].update(kind="hexagons"), "tiling/kind"),
    ],
)
def test_schema_errors_name_the_field(mutate, where):
    doc = toy_doc()
    mutate(doc)
    with pytest.raises(ConfigurationError) as info:
        QuenchConfig.from_dict(doc)
    assert where in str(info.value)


def test_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        QuenchConfig.from_dict(toy_doc(geometry={"dimension": 2, "bounds": [[0, 3]]}))


def test_geometry_errors_fail_fast():
    with pytest.raises(ConfigurationError):
        QuenchConfig.from_dict(toy_doc(bipartition={"boxes": [[[0, 9]]]}))
    with pytest.raises(ConfigurationError):
        QuenchConfig.from_dict(toy_doc(tiling={"kind": "boxes", "boxes": [[[0, 5]], [[5, 9]]]}))


@pytest.mark.parametrize(
    "tiling, M",
    [
        ({"kind": "single"}, 1),
        ({"kind": "singletons"}, 10),
        ({"kind": "slabs", "width": 3}, 4),
        ({"kind": "blocks", "widths": [5]}, 2),
        ({"kind": "boxes", "boxes": [[[0, 2]], [[3, 9]]]}, 2),
        ({"kind": "crafted"}, 6),
        ({"kind": "random", "n_cuts": 3, "seed": 2}, 4),
    ],
)
def test_tiling_kinds(tiling, M):
    c = QuenchConfig.from_dict(toy_doc(tiling=tiling))
    assert c.build_geometry().tiling.M == M


def test_bipartition_sites():
    c = QuenchConfig.from_dict(toy_doc(bipartition={"sites": [[2], [3]]}))
    assert c.build_geometry().bipartition.boundary_size == 2


def test_load_document_errors(tmp_path):
    with pytest.raises(ConfigurationError) as info:
        load_document(tmp_path / "missing.json")
    assert "missing.json" in str(info.value)
    bad = tmp_path / "bad.json"
    bad.write_text('{"geometry": {\n  "dimension": 1,,\n}')
    with pytest.raises(ConfigurationError) as info:
        load_document(bad)
    assert "line 2" in str(info.value)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(toy_doc()))
    assert load_document(good) == toy_doc()


def test_validate_document_rejects_non_object():
    with pytest.raises(ConfigurationError):
        validate_document([1, 2])


def test_scan_documents_merge():
    doc = toy_doc(scan={"rows": [{"geometry": {"bounds": [[0, 19]]}}, {"disorder": {"master_seed": 3}}]})
    rows = scan_documents(doc)
    assert rows[0]["geometry"] == {"dimension": 1, "bounds": [[0, 19]]}
    assert rows[1]["disorder"]["master_seed"] == 3 and rows[1]["disorder"]["k_max"] == 1.0
    assert "scan" not in rows[0]
    with pytest.raises(ConfigurationError):
        scan_documents(toy_doc())


def test_deep_merge_does_not_mutate():
    base = {"a": {"b": 1, "c": 2}}
    out = deep_merge(base, {"a": {"b": 5}})
    assert out == {"a": {"b": 5, "c": 2}} and base == {"a": {"b": 1, "c": 2}}


def test_ensemble_key_ignores_cut_but_not_disorder():
    a = QuenchConfig.from_dict(toy_doc())
    b = QuenchConfig.from_dict(toy_doc(bipartition={"boxes": [[[3, 6]]]}, output={"prefix": "x"}))
    c = QuenchConfig.from_dict(toy_doc(disorder={"k_max": 1.0, "master_seed": 8, "n_realizations": 3}))
    assert a.ensemble_key() == b.ensemble_key() != c.ensemble_key()
    d = QuenchConfig.from_dict(toy_doc(tiling={"kind": "crafted"}))
    e = QuenchConfig.from_dict(toy_doc(tiling={"kind": "crafted"}, bipartition={"boxes": [[[3, 6]]]}))
    assert d.ensemble_key() != e.ensemble_key()
