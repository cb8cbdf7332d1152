import copy
import json

import numpy as np
import pytest

from ctemplates.config import (config_from_dict, example_config_text, load_example, parse_config,
                               serialize_config)
from ctemplates.errors import NotObservableAtTarget, ValidationError


@pytest.fixture
def doc():
    return json.loads(example_config_text())


def test_example_loads(example_cfg):
    cfg = example_cfg
    assert (cfg.theta, cfg.delta, cfg.T_final, cfg.substeps) == (50.0, 0.02, 10.0, 20)
    assert cfg.family.kind == "square" and cfg.family.N == 4
    assert np.array_equal(cfg.S0, np.eye(3))
    assert cfg.system.n == 3 and cfg.system.m == 1 and cfg.system.p == 2
    u = np.array([0.3, -1.2])
    A = np.array([[-0.5 - u[0], 1.5 + u[1], 4.0], [4.3, 6.0, 5.0], [3.2, 6.8, 7.2]])
    assert np.allclose(cfg.system.A_at(u), A, rtol=1e-15)
    assert np.allclose(cfg.system.b_at(u), [-0.7 * u[0] - 1.3 * u[1], -4.3 * u[1],
                                            0.8 * u[0] - 1.5 * u[1]], rtol=1e-15)


def test_round_trip():
    cfg = load_example()
    again = parse_config(serialize_config(cfg))
    assert again.raw == cfg.raw
    assert serialize_config(again) == serialize_config(cfg)


def test_defaults_filled(doc):
    del doc["certify"], doc["substeps"], doc["output"]
    cfg = config_from_dict(doc)
    assert cfg.substeps == 20 and cfg.mu_grid == 50 and cfg.rot_grid == 64 and cfg.seed == 0
    assert cfg.output == "trajectory.csv" and cfg.lambda_bar is None


def expect_error(doc, field, exc=ValidationError):
    with pytest.raises(exc) as info:
        config_from_dict(doc)
    assert info.value.field == field, str(info.value)
    assert str(info.value).startswith(field)


def test_zero_output_not_observable(doc):
    doc["system"]["C"] = [[[], [], []]]
    expect_error(doc, "system", NotObservableAtTarget)


def test_delta_zero_rejected(doc):
    doc["delta"] = 0
    expect_error(doc, "delta")


def test_schema_errors(doc):
    d = copy.deepcopy(doc)
    d["theta"] = "fifty"
    expect_error(d, "theta")
    d = copy.deepcopy(doc)
    del d["feedback"]
    expect_error(d, "<root>")
    d = copy.deepcopy(doc)
    d["template"]["kind"] = "hexagon"
    expect_error(d, "template.kind")
    d = copy.deepcopy(doc)
    d["extra"] = 1
    expect_error(d, "<root>")


def test_cross_field_errors(doc):
    d = copy.deepcopy(doc)
    d["feedback"]["K"] = [[1.0, 2.0, 3.0]]
    expect_error(d, "feedback.K")
    d = copy.deepcopy(doc)
    d["initial"]["S0"] = [[1, 0, 0], [0, -1, 0], [0, 0, 1]]
    expect_error(d, "initial.S0")
    d = copy.deepcopy(doc)
    d["initial"]["s0"] = 0.05
    expect_error(d, "initial.s0")
    d = copy.deepcopy(doc)
    d["initial"]["R0"] = [[1, 1], [0, 1]]
    expect_error(d, "initial.R0")
    d = copy.deepcopy(doc)
    d["template"] = {"kind": "siso", "N": 3}
    expect_error(d, "template.kind")
    d = copy.deepcopy(doc)
    d["initial"]["x0"] = [1.0, 2.0]
    expect_error(d, "initial.x0")
    d = copy.deepcopy(doc)
    d["system"]["A"] = d["system"]["A"][:2]
    expect_error(d, "system.A")


def test_invalid_json():
    with pytest.raises(ValidationError):
        parse_config("{not json")


def test_genpos_template_defaults_to_degree_bound(doc):
    doc["template"] = {"kind": "genpos"}
    cfg = config_from_dict(doc)
    assert cfg.family.N == 10  # C(2 + 3, 2) with degree bound 3
    assert np.array_equal(cfg.family.points[0], [1.0, 0.0])


def test_explicit_loop_state(doc):
    doc["initial"].update({"s0": 0.01, "mu0": 2.0, "R0": [[0, 1], [1, 0]]})
    st = config_from_dict(doc).loop_state()
    assert st.s == 0.01 and st.mu == 2.0 and np.array_equal(st.R, [[0, 1], [1, 0]])


def test_default_loop_state_matches_feedback(example_cfg):
    st = example_cfg.loop_state()
    lam = example_cfg.feedback(example_cfg.xhat0)
    assert np.allclose(st.mu * st.R[:, 0], lam, rtol=1e-14)
