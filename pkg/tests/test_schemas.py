"""Reports written by the CLI validate against the schemas shipped in docs/schema."""

import json
from pathlib import Path

import pytest

jsonschema = pytest.importorskip("jsonschema")
referencing = pytest.importorskip("referencing")

from singflow.cli import COMMANDS, run
from test_cli import CONFIGS

SCHEMAS = Path(__file__).resolve().parent.parent / "docs" / "schema"


def _registry():
    res = [(p.name, referencing.Resource.from_contents(json.loads(p.read_text())))
           for p in SCHEMAS.glob("*.schema.json")]
    return referencing.Registry().with_resources(res)


def _validator(name):
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    cls = jsonschema.validators.validator_for(schema)
    cls.check_schema(schema)
    return cls(schema, registry=_registry())


def test_every_command_has_a_schema():
    assert {c.replace("-", "_") for c in COMMANDS} <= {p.name.split(".")[0] for p in SCHEMAS.glob("*.schema.json")}


@pytest.fixture(scope="module")
def saddle_reports(tmp_path_factory):
    out = tmp_path_factory.mktemp("schema")
    text = (CONFIGS / "linear-saddle.cfg").read_text() + "\n[orbit]\nx0 = 1 1 1\nduration = 0.5\ndt = 0.1\n"
    cfg = out / "run.cfg"
    cfg.write_text(text)
    codes = {c: run([c, "--config", str(cfg), "--out", str(out)]) for c in COMMANDS}
    return out, codes


@pytest.mark.parametrize("command", COMMANDS)
def test_saddle_reports_validate(saddle_reports, command):
    out, codes = saddle_reports
    assert codes[command] in (0, 1)
    name = command.replace("-", "_")
    doc = json.loads((out / f"{name}.json").read_text())
    errors = sorted(_validator(name).iter_errors(doc), key=str)
    assert not errors, errors[0]


@pytest.mark.parametrize("command", ["classify", "blowup-verify"])
def test_lorenz_reports_validate(tmp_path, command):
    # complex eigenvalue pairs at the saddle-foci carry null eigenvectors
    assert run([command, "--config", str(CONFIGS / "lorenz.cfg"), "--out", str(tmp_path)]) == 0
    name = command.replace("-", "_")
    _validator(name).validate(json.loads((tmp_path / f"{name}.json").read_text()))


def test_bad_report_is_rejected():
    doc = {"command": "sectional", "config": {}, "version": "0", "result": {"criterion": "sectional_expansion"}}
    assert list(_validator("sectional").iter_errors(doc))


def test_details_validate(tmp_path):
    text = (CONFIGS / "linear-saddle.cfg").read_text() + "details = true\n"
    cfg = tmp_path / "d.cfg"
    cfg.write_text(text)
    assert run(["verdict", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    _validator("verdict").validate(json.loads((tmp_path / "verdict.json").read_text()))
