import json

import numpy as np
import pytest

from wishart_libor import config
from wishart_libor.affine import JumpOUParams, NonCentralWishartJumps
from wishart_libor.errors import ConfigError
from wishart_libor.verify import benchmark_jump_ou


def test_default_config_round_trips_identically():
    text = config.default_config_text()
    assert config.dumps(config.loads(text)) == text


def test_default_config_is_the_benchmark(model, curve):
    cfg = config.default_config()
    np.testing.assert_array_equal(cfg.model.sigma0, model.sigma0)
    np.testing.assert_array_equal(cfg.model.m, model.m)
    np.testing.assert_array_equal(cfg.model.q, model.q)
    assert cfg.model.kappa == model.kappa
    np.testing.assert_allclose(cfg.curve.bond_ratios, curve.bond_ratios, rtol=1e-15)
    assert cfg.mc.dt <= cfg.curve.delta_t / 8


def test_jump_config_round_trips(tmp_path):
    cfg = config.default_config()
    cfg.process = "jump_ou"
    base = benchmark_jump_ou()
    law = NonCentralWishartJumps(3.0, base.jump_law.calq, np.array([[0.2], [0.1]]))
    cfg.model = JumpOUParams(base.sigma0, base.m, base.lam, law)
    path = tmp_path / "jump.json"
    config.dump(cfg, path)
    back = config.load(path)
    assert isinstance(back.model, JumpOUParams)
    assert isinstance(back.model.jump_law, NonCentralWishartJumps)
    np.testing.assert_array_equal(back.model.jump_law.calm, cfg.model.jump_law.calm)
    assert config.dumps(back) == path.read_text()


def test_bond_ratio_curve_round_trips():
    data = json.loads(config.default_config_text())
    curve = config.default_config().curve
    del data["curve"]["libor"]
    data["curve"]["bond_ratios"] = [float(x) for x in curve.bond_ratios]
    data["curve"]["terminal_bond"] = curve.terminal_bond
    text = json.dumps(data, indent=2) + "\n"
    cfg = config.loads(text)
    assert cfg.curve_input == "bond_ratios"
    assert config.dumps(cfg) == text


def _edited(edit):
    data = json.loads(config.default_config_text())
    edit(data)
    return json.dumps(data, indent=2) + "\n"


def test_malformed_matrix_reports_field_and_line():
    text = _edited(lambda d: d["params"].update(q=[0.034, 0.0, 0.042]))
    with pytest.raises(ConfigError) as info:
        config.loads(text)
    assert info.value.path == "params.q"
    assert text.splitlines()[info.value.line - 1].strip().startswith('"q"')
    assert "params.q" in str(info.value)


def test_non_numeric_entry_is_rejected():
    text = _edited(lambda d: d["params"].update(sigma0=[3.75, "x", 0.0, 3.45]))
    with pytest.raises(ConfigError) as info:
        config.loads(text)
    assert info.value.path == "params.sigma0"


def test_domain_error_is_attributed_to_field():
    text = _edited(lambda d: d["params"].update(kappa=1.5))
    with pytest.raises(ConfigError) as info:
        config.loads(text)
    assert info.value.path == "params.kappa"
    assert text.splitlines()[info.value.line - 1].strip().startswith('"kappa"')


@pytest.mark.parametrize("edit, path", [
    (lambda d: d.update(schema_version=2), "schema_version"),
    (lambda d: d.update(process="heston"), "process"),
    (lambda d: d["curve"].update(libor=[0.05] * 3), "curve.libor"),
    (lambda d: d["swaption"].update(order=9), "swaption.order"),
    (lambda d: d["mc"].update(dt=0.1), "mc.dt"),
    (lambda d: d["mc"].update(n_paths=10), "mc.n_paths"),
    (lambda d: d["params"].pop("m"), "params.m"),
])
def test_invalid_fields(edit, path):
    with pytest.raises(ConfigError) as info:
        config.loads(_edited(edit))
    assert info.value.path == path


def test_invalid_json_reports_line():
    with pytest.raises(ConfigError) as info:
        config.loads('{\n  "schema_version": 1,\n  oops\n}')
    assert info.value.line == 3
