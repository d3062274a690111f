"""
Command-line tests: exit codes, result lines and the end-to-end pipeline.
"""

import pytest

from bmdsnet.formats import parse_config_text, read_table
from bmdsnet.main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, cli_dispatch
from bmdsnet.schemas.experiment import ExperimentConfig


def last_line(text):
    return text.strip().splitlines()[-1]


class TestExitCodes:
    """Test usage errors, runtime errors and the top-level flags"""

    def test_no_command(self, capsys):
        """Test running without a command is a usage error"""
        assert cli_dispatch([]) == EXIT_USAGE
        assert "command is required" in capsys.readouterr().err

    def test_unknown_option(self):
        """Test an unknown flag is a usage error"""
        assert cli_dispatch(["gen-data", "--bogus"]) == EXIT_USAGE

    def test_bad_seed(self):
        """Test a negative seed is rejected by the parser"""
        assert cli_dispatch(["gradcheck", "--seed", "-1"]) == EXIT_USAGE

    def test_missing_config(self, tmp_path, capsys):
        """Test a config path that does not exist exits 1"""
        code = cli_dispatch(["gradcheck", "--config", str(tmp_path / "absent.cfg"), "--out", str(tmp_path)])
        assert code == EXIT_USAGE
        assert "config file not found" in capsys.readouterr().err

    def test_invalid_config(self, tmp_path, capsys):
        """Test an invalid config exits 2 naming the key"""
        path = tmp_path / "bad.cfg"
        path.write_text("stage1.lr = -1\n")
        assert cli_dispatch(["gradcheck", "--config", str(path), "--out", str(tmp_path)]) == EXIT_RUNTIME
        assert "stage1.lr (line 1)" in capsys.readouterr().err

    def test_version(self, capsys):
        """Test --version exits 0"""
        assert cli_dispatch(["--version"]) == EXIT_OK
        assert "bmdsnet" in capsys.readouterr().out

    def test_print_default_config(self, capsys):
        """Test the dump is all of stdout and parses back to the defaults"""
        assert cli_dispatch(["--print-default-config"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "OK" not in out
        assert parse_config_text(out) == ExperimentConfig()

    def test_eval_without_checkpoint(self, tmp_path, tiny_config_file, capsys):
        """Test eval with nothing to load exits 2"""
        code = cli_dispatch(["eval", "--config", str(tiny_config_file), "--out", str(tmp_path / "empty")])
        assert code == EXIT_RUNTIME
        assert "no checkpoint" in capsys.readouterr().err


class TestCommands:
    """Test individual commands"""

    def test_gen_data_reproducible(self, tmp_path, tiny_config_file, capsys):
        """Test two gen-data runs write identical bytes"""
        for name in ("a", "b"):
            code = cli_dispatch(["gen-data", "--config", str(tiny_config_file), "--out", str(tmp_path / name),
                                 "--num-samples", "4", "--seed", "5"])
            assert code == EXIT_OK
        out = capsys.readouterr().out
        assert last_line(out) == "OK gen-data"
        assert "train=3 val=0 test=1" in out
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert len(names) == 5
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_gradcheck_subset(self, tmp_path, capsys):
        """Test selected cases run and report ok"""
        assert cli_dispatch(["gradcheck", "--only", "add", "relu", "--out", str(tmp_path)]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert [line.split()[0] for line in lines] == ["add", "relu", "OK"]
        assert lines[0].endswith(" ok")

    def test_gradcheck_help_states_normalisation(self, capsys):
        """Test the gradcheck help says errors are normalised per tensor"""
        assert cli_dispatch(["gradcheck", "--help"]) == EXIT_OK
        text = " ".join(capsys.readouterr().out.split())
        assert "normalised per tensor, not per entry" in text
        assert "largest gradient of its tensor" in text

    def test_gradcheck_unknown_case(self, tmp_path):
        """Test an unknown case name is a usage error"""
        assert cli_dispatch(["gradcheck", "--only", "nope", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_pipeline(self, tmp_path, tiny_config_file, tiny_data_dir, tiny_splits, capsys):
        """Test train, finetune-bayes, eval and report on the tiny dataset"""
        out = tmp_path / "run"
        common = ["--config", str(tiny_config_file), "--out", str(out)]
        data = ["--data", str(tiny_data_dir)]

        assert cli_dispatch(["train", *common, *data]) == EXIT_OK
        assert (out / "stage1.ckpt").exists()
        assert cli_dispatch(["finetune-bayes", *common, *data]) == EXIT_OK
        assert (out / "stage2.ckpt").exists()
        assert cli_dispatch(["eval", *common, *data, "--threads", "2"]) == EXIT_OK
        assert cli_dispatch(["report", *common]) == EXIT_OK
        assert last_line(capsys.readouterr().out) == "OK report"

        report = read_table(out / "report.csv")
        assert len(report) == 12
        assert {row["scenario"] for row in report} == {"full", "missing_t2", "noise_0.1"}
        assert all(row["unc_auc"] == "" or 0.0 <= float(row["unc_auc"]) <= 1.0 for row in report)
        assert len(read_table(out / "reliability.csv")) == 30
        runs = [row["run_id"] for row in read_table(out / "runs.csv")]
        assert runs == ["eval/stage2/seed=0", "stage1/seed=0", "stage2/seed=0"]

    def test_config_change_refuses_checkpoint(self, tmp_path, tiny_config_file, tiny_data_dir, capsys):
        """Test a checkpoint from another config needs --force"""
        out = tmp_path / "run"
        data = ["--data", str(tiny_data_dir), "--out", str(out)]
        tiny_config_file.write_text(tiny_config_file.read_text().replace("stage1.epochs = 1", "stage1.epochs = 0"))
        assert cli_dispatch(["train", "--config", str(tiny_config_file), *data]) == EXIT_OK

        other = tmp_path / "other.cfg"
        other.write_text(tiny_config_file.read_text() + "model.gamma_init = 0.2\n")
        assert cli_dispatch(["eval", "--config", str(other), *data]) == EXIT_RUNTIME
        assert "--force" in capsys.readouterr().err
        assert cli_dispatch(["eval", "--config", str(other), *data, "--force"]) == EXIT_OK


@pytest.mark.slow
class TestExperimentCommands:
    """Test the multi-run commands end to end"""

    @pytest.mark.parametrize("command,outputs", [
        ("sweep-alpha", ["sweep_alpha.csv"]),
        ("ensemble", ["calibration.csv", "calibration_noisy.csv"]),
        ("ablation", ["ablation.csv"]),
        ("robustness", ["robustness.csv", "robustness_summary.csv"]),
    ])
    def test_command_writes_tables(self, command, outputs, tmp_path, tiny_config_file, tiny_data_dir, capsys):
        """Test each study command writes its tables and records its runs"""
        args = [command, "--config", str(tiny_config_file), "--out", str(tmp_path),
                "--data", str(tiny_data_dir), "--threads", "2"]
        assert cli_dispatch(args) == EXIT_OK
        assert last_line(capsys.readouterr().out) == f"OK {command}"
        for name in outputs:
            assert (tmp_path / name).exists()
        assert (tmp_path / "runs.sqlite").exists()
