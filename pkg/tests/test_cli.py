"""End-to-end command runs through `main`."""

import json

import pytest

from cmu_lab.cli import main
from cmu_lab.exceptions import VerificationFailed
from cmu_lab.services.verification import CheckResult, VerificationService

EXPERIMENT = {
    "generator": {"family": "uniform_band", "n": 3, "t_scale": 40, "epsilon": 0.3},
    "policies": [{"kind": "oracle"}, {"kind": "ptn"}],
    "reps": 3,
    "seed_base": 11,
    "sweep": {"axis": "T", "values": [20, 40]},
}


@pytest.fixture
def instance_file(tmp_path):
    def _write(costs, rates=None, t_scale=50, service="det"):
        path = tmp_path / "instance.json"
        path.write_text(
            json.dumps(
                {
                    "n": len(costs),
                    "t_scale": t_scale,
                    "costs": costs,
                    "rates": rates or [1.0] * len(costs),
                    "service": service,
                }
            )
        )
        return str(path)

    return _write


@pytest.fixture
def experiment_file(tmp_path):
    def _write(raw=EXPERIMENT):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps(raw))
        return str(path)

    return _write


class TestGen:
    def test_writes_instance(self, tmp_path):
        out = tmp_path / "inst.json"
        args = ["gen", "--n", "4", "--t-scale", "30", "--epsilon", "0.2"]
        code = main([*args, "--out", str(out)])
        assert code == 0
        raw = json.loads(out.read_text())
        assert raw["n"] == 4 and len(raw["costs"]) == 4

    def test_stdout(self, capsys):
        args = ["gen", "--family", "lower_bound_base", "--n", "2", "--t-scale", "9"]
        assert main(args) == 0
        assert json.loads(capsys.readouterr().out)["costs"] == [0.5, 0.5]

    def test_invalid_epsilon(self, capsys):
        assert main(["gen", "--epsilon", "0.9"]) == 1
        assert "epsilon" in capsys.readouterr().err


class TestRun:
    def test_csv(self, instance_file, capsys):
        path = instance_file([0.9, 0.2, 0.5])
        policies = ["--policy", "oracle", "--policy", "ptn"]
        code = main(["run", "--instance", path, *policies, "--reps", "2"])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "axis,policy,mean_regret,std_err,mean_rel_regret,reps"
        assert lines[1].startswith("50.0,oracle,0.0,")
        assert lines[2].split(",")[1] == "ptn"

    def test_cost_out_of_range(self, instance_file, capsys):
        assert main(["run", "--instance", instance_file([1.5, 0.2])]) == 1
        assert "cost" in capsys.readouterr().err

    def test_incompatible_policy(self, instance_file, capsys):
        path = instance_file([0.5, 0.2])
        assert main(["run", "--instance", path, "--policy", "ptn-geo"]) == 1
        assert capsys.readouterr().out == ""

    def test_missing_instance(self, tmp_path):
        assert main(["run", "--instance", str(tmp_path / "nope.json")]) == 1

    def test_trace_dump(self, instance_file, tmp_path, capsys):
        trace = tmp_path / "trace.ndjson"
        path = instance_file([0.7, 0.3], t_scale=6)
        assert main(["run", "--instance", path, "--trace-dump", str(trace)]) == 0
        records = [json.loads(line) for line in trace.read_text().splitlines()]
        assert len(records) == 12
        assert records[0]["slot"] == 1
        assert "slot records" in capsys.readouterr().err

    def test_unknown_flag(self, instance_file):
        assert main(["run", "--instance", instance_file([0.5]), "--bogus"]) == 1


class TestSweep:
    def test_byte_identical_reruns(self, experiment_file, tmp_path):
        config = experiment_file()
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sweep", "--config", config, "--out", str(first)]) == 0
        assert main(["sweep", "--config", config, "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        assert len(first.read_text().splitlines()) == 5

    def test_bad_config(self, experiment_file, capsys):
        config = experiment_file({**EXPERIMENT, "reps": 0})
        assert main(["sweep", "--config", config]) == 1
        assert "reps" in capsys.readouterr().err


class TestSlope:
    def test_n_axis(self, experiment_file, capsys):
        n_sweep = {"axis": "N", "values": [4, 8]}
        config = experiment_file({**EXPERIMENT, "sweep": n_sweep})
        assert main(["slope", "--config", config]) == 0
        fit = json.loads(capsys.readouterr().out)
        assert set(fit) == {"slope", "intercept", "r_squared"}

    def test_short_t_sweep(self, experiment_file):
        assert main(["slope", "--config", experiment_file()]) == 1


class TestVerify:
    def test_passes(self, capsys):
        assert main(["verify", "--coverage-reps", "200"]) == 0
        err = capsys.readouterr().err
        assert "PASS" in err
        assert "FAIL" not in err

    def test_failure_exit_code(self, mocker, capsys):
        failed = CheckResult("clean_event_coverage", False, 10, "coverage 0.5")
        mocker.patch.object(
            VerificationService,
            "run",
            side_effect=VerificationFailed("1 check failed", [failed]),
        )
        assert main(["verify"]) == 2
        assert "verification failed" in capsys.readouterr().err


def test_log_level_option(instance_file):
    path = instance_file([0.4])
    assert main(["--log-level", "debug", "run", "--instance", path]) == 0
