import json
import math
import os

import numpy as np
import pytest

from singflow.config import load_config
from singflow.errors import ConfigError
from singflow.field import LinearField, LorenzField, PolynomialField
from singflow.serialize import dumps, to_plain, write_atomic
from test_cli import LORENZ_CFG, SADDLE_CFG


def _cfg(tmp_path, text):
    p = tmp_path / "c.cfg"
    p.write_text(text)
    return str(p)


def test_bundled_configs_load():
    rc = load_config(LORENZ_CFG)
    assert isinstance(rc.field, LorenzField)
    assert rc.analysis.n_samples == 1000 and rc.analysis.chart_eps == 3.0
    assert rc.analysis.grid[0] == 0.25 and rc.analysis.grid[-1] == 10.0
    assert rc.section("blowup")["radii"] == (1e-2, 1e-3, 1e-4, 1e-5)
    rc = load_config(SADDLE_CFG)
    assert isinstance(rc.field, LinearField)
    assert len(rc.section("analysis")["samples"]) == 3


def test_defaults(tmp_path):
    rc = load_config(_cfg(tmp_path, "[field]\nkind = lorenz\n"))
    assert rc.section("pliss") == {"tau0": 1.0, "gamma": 1.05}
    assert rc.section("output")["dir"] == "."
    assert rc.analysis.jobs == 1


def test_polynomial_field(tmp_path):
    rc = load_config(_cfg(tmp_path, "[field]\nkind = polynomial\ndx = -10:1,0,0 10:0,1,0\n"
                                    "dy = 28:1,0,0 -1:1,0,1 -1:0,1,0\ndz = 1:1,1,0 -2.6666666666666665:0,0,1\n"))
    assert isinstance(rc.field, PolynomialField)
    np.testing.assert_allclose(rc.field.eval([1, 1, 1]), LorenzField().eval([1, 1, 1]), atol=1e-14)


@pytest.mark.parametrize("text", [
    "[field]\nkind = polynomial\ndx = 1:0,0\ndy = 1:0,0,0\ndz = 1:0,0,0\n",
    "[field]\nkind = linear\n",
    "[field]\nkind = lorenz\nbox_lo = 0 0 0\n",
    "[field]\nkind = lorenz\nbox_lo = 1 1 1\nbox_hi = 0 2 2\n",
    "[integrator]\nrel_tol = -1\n",
    "[analysis]\nk_pow = 1\n",
    "[analysis]\nchart_eps = 0\n",
    "[analysis]\nsamples = 1 2\n",
    "[analysis]\nspacing = inf\n",
    "[blowup]\nchart_eps = -1\n",
    "[poincare]\nbeta0 = 0\n",
    "[lyapunov]\nrenorm_dt = 0\n",
    "[output]\ndetails = maybe\n",
])
def test_invalid(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_cfg(tmp_path, text))


def test_poincare_heuristics(tmp_path):
    rc = load_config(_cfg(tmp_path, "[poincare]\nbeta0 = 0.02\nr0_factor = 0.05\n"))
    assert rc.poincare.beta0 == 0.02 and rc.poincare.r0_factor == 0.05
    assert rc.resolved()["poincare"]["tube_factor"] == 20.0


def test_resolved_excludes_jobs_and_output(tmp_path):
    a = load_config(LORENZ_CFG, jobs=1).resolved()
    b = load_config(LORENZ_CFG, jobs=8).resolved()
    assert a == b
    assert "output" not in a
    assert a["analysis"]["chart_eps"] == 3.0
    assert dumps(a) == dumps(b)


def test_float_format():
    text = dumps({"b": 0.1, "a": [1.0, 2, math.inf, -math.nan], "c": np.float64(1 / 3)})
    doc = json.loads(text)
    assert list(doc) == ["a", "b", "c"]
    assert doc["a"] == [1.0, 2, None, None]
    assert "0.10000000000000001" in text
    assert doc["c"] == 1 / 3
    assert "1.0" in text


def test_to_plain_types():
    out = to_plain({"arr": np.arange(3), "flag": np.bool_(True), "n": np.int64(4), "z": 1 + 2j, "t": (1, 2)})
    assert out == {"arr": [0, 1, 2], "flag": True, "n": 4, "z": {"re": 1.0, "im": 2.0}, "t": [1, 2]}
    with pytest.raises(TypeError):
        to_plain(object())


def test_nested_layout_is_stable():
    obj = {"z": {"y": [{"b": 1.5, "a": None}], "x": []}, "a": {}}
    assert dumps(obj) == dumps(json.loads(dumps(obj)))
    assert dumps(obj).endswith("\n")


def test_write_atomic(tmp_path):
    p = tmp_path / "x.json"
    write_atomic(p, "one\n")
    write_atomic(p, "two\n")
    assert p.read_text() == "two\n"
    assert os.listdir(tmp_path) == ["x.json"]
