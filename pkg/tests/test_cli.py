import csv
import json
import os
import subprocess
import sys

import pytest

from magcontact import cli
from magcontact.errors import ConfigError


def write(tmp_path, text, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(tmp_path, text, command, out="out"):
    return cli.main(["--config", write(tmp_path, text), "--command", command,
                     "--out", str(tmp_path / out)])


SPHERE = "profile: {family: round_sphere}\nm_grid: [0.5, 1.0]\ni_grid_size: 16\n"


def test_parse_defaults():
    cfg = cli.parse_config("profile: {family: round_sphere}\n")
    assert cfg.m_grid == [1.0] and cfg.i_grid_size == 256 and cfg.tolerances.action == 1e-6


def test_unknown_key_reports_position():
    with pytest.raises(ConfigError) as exc:
        cli.parse_config("profile: {family: round_sphere}\ntolerances:\n  action: 1e-6\n  bogus: 1\n")
    assert exc.value.line == 4 and exc.value.column == 3


@pytest.mark.parametrize("text", ["m_grid: [1]\n", "profile: {family: round_sphere}\nm_grid: [-1]\n",
                                  "profile: [1, 2\n", "profile: {family: round_sphere}\nfoo: 1\n"])
def test_bad_configs_exit_2(tmp_path, text):
    assert run(tmp_path, text, "bounds") == 2


def test_validate_and_bounds(tmp_path):
    assert run(tmp_path, SPHERE, "validate") == 0
    rep = json.loads((tmp_path / "out" / "validation.json").read_text())
    assert rep["passed"]
    assert run(tmp_path, "profile: {family: ellipsoid, a: 1, c: 6}\n", "bounds") == 0
    with open(tmp_path / "out" / "bounds.csv") as fh:
        row = list(csv.DictReader(fh))[0]
    assert row["interval"] == "gap"
    assert float(row["m_minus"]) * float(row["m_plus"]) == pytest.approx(1.0, abs=1e-10)


def test_certify_positive_and_negative(tmp_path):
    assert run(tmp_path, SPHERE, "certify") == 0
    d = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert [c["verdict"] for c in d["certificates"]] == ["Positive", "Positive"]
    dip = "profile: {family: dip, delta: 0.1, eps: 0.5}\nm_grid: [0.0424413181578]\ni_grid_size: 16\n"
    assert run(tmp_path, dip, "certify", "neg") == 4


def test_numeric_precondition_exit_3(tmp_path):
    text = "profile: {family: round_sphere}\nstrength: {family: cosine, eps: 2.0}\n"
    assert run(tmp_path, text, "validate") == 3


def test_manifest_deterministic(tmp_path):
    run(tmp_path, SPHERE, "orbits", "a")
    run(tmp_path, SPHERE, "orbits", "b")
    a = (tmp_path / "a" / "manifest.json").read_text()
    b = (tmp_path / "b" / "manifest.json").read_text()
    assert a == b
    assert (tmp_path / "a" / "latitudes.json").read_text() == \
        (tmp_path / "b" / "latitudes.json").read_text()
    m = json.loads(a)
    assert m["command"] == "orbits" and len(m["config_sha256"]) == 64
    assert not [f for f in os.listdir(tmp_path / "a") if f.startswith(".")]


def test_twist_cover_index_profile_gen(tmp_path):
    text = ("profile: {family: round_sphere}\nstrength: {family: cosine, eps: 0.2}\n"
            "m_grid: [0.05, 0.1]\ntwist: {u_fractions: [-0.5], m: [0.08, 0.04, 0.02]}\n"
            "index: {samples: 4}\ncover: {samples: 100}\n")
    for cmd in ("twist", "cover", "index", "profile-gen"):
        assert run(tmp_path, text, cmd) == 0, cmd
    fit = json.loads((tmp_path / "out" / "twist_fit.json").read_text())["fits"][0]
    assert fit["limit"] == pytest.approx(fit["expected"], rel=0.02)
    cov = json.loads((tmp_path / "out" / "cover.json").read_text())
    assert cov["max_residual"] < 1e-10 and cov["base_point"]["tau"] == pytest.approx(-2.0)
    assert json.loads((tmp_path / "out" / "index.json").read_text())["convex"]
    assert "round_sphere" in (tmp_path / "out" / "profile.yaml").read_text()


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, SPHERE)
    r = subprocess.run([sys.executable, "-m", "magcontact.cli", "--config", cfg, "--command",
                        "bounds", "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0 and "bounds.csv" in r.stdout
