import hashlib
import json

import pytest

from wavemoments import cli
from wavemoments.config import ConfigError, default_config, load_config

SMALL = """
[grid]
k_min = 1.0
k_max = 10.0
nodes = 4
[integrator]
t_end = 0.2
checkpoints = 3
rtol = 1e-8
[scenario]
P = 3
initial = deterministic
transport_P = 128
transport_p0 = 16
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return str(path)


def run(args, out):
    status = cli.main(args + ["--out", str(out), "--tolerance-profile", "fast"])
    manifest = json.loads((out / "manifest.json").read_text()) if (out / "manifest.json").exists() else None
    return status, manifest


def check_digests(out, manifest):
    for entry in manifest["artifacts"]:
        data = (out / entry["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
        assert len(data) == entry["bytes"]


class TestConfig:
    def test_defaults_cover_schema(self):
        cfg = default_config()
        assert cfg["spectrum"]["exponent"] == 4.25 and cfg["scenario"]["P"] == 8

    def test_overlay(self, small_config):
        cfg = load_config(small_config)
        assert cfg["grid"]["nodes"] == 4 and cfg["scenario"]["initial"] == "deterministic"
        assert cfg["system"]["kind"] == "capillary"

    @pytest.mark.parametrize("text", ["[nonsense]\na = 1\n", "[grid]\nnodez = 3\n",
                                      "[grid]\nnodes = three\n", "[scenario]\ninitial = odd\n",
                                      "not an ini file"])
    def test_rejects_bad_files(self, tmp_path, text):
        path = tmp_path / "bad.ini"
        path.write_text(text)
        with pytest.raises(ConfigError):
            load_config(str(path))


class TestExitCodes:
    def test_missing_config_is_usage_error_without_artifacts(self, tmp_path):
        out = tmp_path / "out"
        status, manifest = run(["rates", "--config", str(tmp_path / "missing.ini")], out)
        assert status == 2 and not out.exists()

    def test_invalid_config_value(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[grid]\nnodes = 1\n")
        status, _ = run(["rates", "--config", str(path)], tmp_path / "out")
        assert status == 2

    def test_unknown_subcommand(self):
        assert cli.main(["fly"]) == 2

    def test_negative_seed(self, tmp_path):
        assert cli.main(["rates", "--seed", "-1", "--out", str(tmp_path)]) == 2

    def test_help(self, capsys):
        assert cli.main(["--help"]) == 0
        assert "capillary-fluctuations" in capsys.readouterr().out


class TestSubcommands:
    def test_rates(self, small_config, tmp_path):
        out = tmp_path / "rates"
        status, manifest = run(["rates", "--config", small_config], out)
        assert status == 0
        assert {a["file"] for a in manifest["artifacts"]} == {"rates.csv", "consistency.csv"}
        assert manifest["info"]["consistency_ok"] is True
        assert manifest["config"]["grid"]["nodes"] == 4
        check_digests(out, manifest)

    def test_ke(self, small_config, tmp_path):
        out = tmp_path / "ke"
        status, manifest = run(["ke", "--config", small_config], out)
        assert status == 0
        assert "ke/trajectory.json" in {a["file"] for a in manifest["artifacts"]}
        check_digests(out, manifest)

    def test_moments(self, small_config, tmp_path):
        out = tmp_path / "m"
        status, manifest = run(["moments", "--config", small_config], out)
        assert status == 0
        assert (out / "moments" / "deviations_0002.csv").exists()
        check_digests(out, manifest)

    def test_capillary_fluctuations(self, small_config, tmp_path):
        out = tmp_path / "cf"
        status, manifest = run(["capillary-fluctuations", "--config", small_config], out)
        assert status == 0
        assert manifest["info"]["max_rel_err"] < 1e-6
        assert manifest["info"]["saturation_slope"] == pytest.approx(-0.75, rel=0.02)
        assert (out / "plot_xi2.py").exists()

    def test_transport_wave_is_deterministic(self, small_config, tmp_path):
        a = run(["transport-wave", "--config", small_config], tmp_path / "a")
        b = run(["transport-wave", "--config", small_config], tmp_path / "b")
        assert a[0] == b[0] == 0
        assert [x["sha256"] for x in a[1]["artifacts"]] == [x["sha256"] for x in b[1]["artifacts"]]
        assert a[1]["info"]["speed"] == pytest.approx(1.0, abs=0.06)

    def test_truncated_transport_fails(self, tmp_path):
        path = tmp_path / "t.ini"
        path.write_text("[scenario]\ntransport_P = 40\ntransport_p0 = 16\n")
        status, manifest = run(["transport-wave", "--config", str(path)], tmp_path / "t")
        assert status == 1 and manifest["info"]["truncated"] is True

    def test_environment_defaults(self, small_config, tmp_path, monkeypatch):
        monkeypatch.setenv("WAVEMOMENTS_SEED", "7")
        status, manifest = run(["transport-wave", "--config", small_config], tmp_path / "env")
        assert status == 0 and manifest["seed"] == 7

    def test_stiffness_failure_is_reported(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[grid]\nnodes = 4\nk_max = 10\n[integrator]\nrtol = 1e-30\nt_end = 1\n"
                        "[scenario]\nP = 2\ninitial = deterministic\n")
        status, manifest = run(["moments", "--config", str(path)], tmp_path / "s")
        assert status == 1
        assert manifest["errors"] and manifest["exit_status"] == 1
