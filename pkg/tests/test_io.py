from __future__ import annotations

import json

import numpy as np
import pytest

from flexplan import TUTORIAL_DIR
from flexplan.instances import random_system, tutorial_system
from flexplan.io import InstanceError, describe, load_instance, read_profile, save_instance
from flexplan.system import SystemValidationError, validate_system


def specs_equal(a, b):
    assert a.grid == b.grid and a.name == b.name
    assert a.thermal == b.thermal and a.storage == b.storage
    assert a.network.buses == b.network.buses and a.network.lines == b.network.lines
    for va, vb in zip(a.renewables, b.renewables):
        assert va.id == vb.id
        for w in va.profiles:
            assert np.array_equal(va.profiles[w], vb.profiles[w])
    for wa, wb in zip(a.scenarios, b.scenarios):
        assert wa.id == wb.id and wa.probability == wb.probability
        assert np.array_equal(wa.reserve_up, wb.reserve_up)
        for bus in wa.demand:
            assert np.array_equal(wa.demand[bus], wb.demand[bus])


def test_shipped_tutorial_matches_builder():
    specs_equal(validate_system(load_instance(TUTORIAL_DIR)), tutorial_system())


def test_shipped_tutorial_description():
    assert describe(load_instance(TUTORIAL_DIR)) == "2 buses, 1 line, 3 techs, 1 scenario, 24 h"


def test_round_trip(tmp_path):
    spec = random_system(3, hours=4)
    path = save_instance(spec, tmp_path / "inst")
    specs_equal(load_instance(path), spec)
    specs_equal(load_instance(tmp_path / "inst"), spec)


def test_corrupted_row_names_file_and_line(tmp_path):
    save_instance(tutorial_system(), tmp_path)
    prof = tmp_path / "profiles" / "pv_w1.csv"
    lines = prof.read_text().splitlines()
    lines[5] = "5,not-a-number"
    prof.write_text("\n".join(lines) + "\n")
    with pytest.raises(InstanceError, match=r"pv_w1\.csv:6: cannot parse"):
        load_instance(tmp_path)


def test_step_gap_reported(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("step,value\n1,0.5\n3,0.5\n")
    with pytest.raises(InstanceError, match=r"p\.csv:3: expected step 2"):
        read_profile(path)


def test_missing_header(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("1,0.5\n")
    with pytest.raises(InstanceError, match=r":1: expected header"):
        read_profile(path)


def test_unknown_field_rejected(tmp_path):
    save_instance(tutorial_system(), tmp_path)
    doc = json.loads((tmp_path / "system.json").read_text())
    doc["thermal"][0]["colour"] = "red"
    (tmp_path / "system.json").write_text(json.dumps(doc))
    with pytest.raises(InstanceError, match=r"thermal\[0\]: unknown field\(s\) colour"):
        load_instance(tmp_path)


def test_invalid_json_reports_line(tmp_path):
    (tmp_path / "system.json").write_text('{\n"hours": 24,\n oops\n}')
    with pytest.raises(InstanceError, match=r"system\.json:3: invalid JSON"):
        load_instance(tmp_path)


def test_empty_scenario_set(tmp_path):
    save_instance(tutorial_system(), tmp_path)
    doc = json.loads((tmp_path / "system.json").read_text())
    doc["scenarios"] = []
    doc["renewables"][0]["profiles"] = {}
    (tmp_path / "system.json").write_text(json.dumps(doc))
    with pytest.raises(SystemValidationError, match="no scenarios"):
        validate_system(load_instance(tmp_path))


def test_reserve_scalar_and_list(tmp_path):
    save_instance(tutorial_system(), tmp_path)
    doc = json.loads((tmp_path / "system.json").read_text())
    doc["scenarios"][0]["reserve_up"] = 7
    doc["scenarios"][0]["reserve_down"] = list(range(24))
    (tmp_path / "system.json").write_text(json.dumps(doc))
    w = load_instance(tmp_path).scenarios[0]
    assert w.reserve_up.tolist() == [7.0] * 24
    assert w.reserve_down.tolist() == [float(i) for i in range(24)]
