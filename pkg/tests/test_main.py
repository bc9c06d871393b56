import json
import pytest
from unittest.mock import patch

from src.main import build_parser, main, print_supported_strategies
from src.workbench import GenSpec, generate, save_instance


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """Run the CLI inside a temporary directory without touching logging."""
    monkeypatch.chdir(tmp_path)
    with patch("src.main.setup_logging") as mock_logging:
        mock_logging.return_value = str(tmp_path / "logs" / "test.log")
        yield tmp_path


@pytest.fixture
def instance_file(workdir):
    path = workdir / "instance.json"
    save_instance(generate(GenSpec(n=5, seed=3)), str(path))
    return path


def test_list_strategies(capsys):
    """Test --list-strategies prints every strategy and exits cleanly"""
    with pytest.raises(SystemExit) as exc:
        main(["--list-strategies"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "maxsd" in out and "freq8" in out


def test_print_supported_strategies(capsys):
    """Test strategy listing format"""
    print_supported_strategies()
    out = capsys.readouterr().out
    assert "mostviol (most violated constraint satisfaction)" in out


def test_missing_command_exits_with_error():
    """Test that no subcommand prints help and fails"""
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_generate_command_writes_instance(workdir):
    """Test generate writes a JSON instance"""
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--n", "6", "--seed", "4", "--out", "inst/n6.json"])
    assert exc.value.code == 0
    data = json.loads((workdir / "inst" / "n6.json").read_text())
    assert data["n"] == 6
    assert data["m"] == 3


def test_solve_command(workdir, instance_file, capsys):
    """Test solve prints and writes the report"""
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--instance", str(instance_file), "--strategy", "allcst", "--out", "out/report.json", "--trace", "out/trace.csv"])
    assert exc.value.code == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["status"] == "optimal"
    saved = json.loads((workdir / "out" / "report.json").read_text())
    assert saved["optimum"] == printed["optimum"]
    assert (workdir / "out" / "trace.csv").exists()


def test_solve_command_node_limit_returns_two(workdir, instance_file):
    """Test an unproven result exits with code 2"""
    with patch("src.main.solve") as mock_solve:
        mock_solve.return_value.optimal = False
        mock_solve.return_value.status = "unproven"
        mock_solve.return_value.to_dict.return_value = {"status": "unproven"}
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--instance", str(instance_file), "--max-nodes", "1"])
    assert exc.value.code == 2
    config = mock_solve.call_args.args[1]
    assert config.max_nodes == 1


def test_bad_oracle_name_is_fatal(workdir, instance_file):
    """Test an unknown oracle name exits with code 1"""
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--instance", str(instance_file), "--oracle", "quantum"])
    assert exc.value.code == 1


def test_missing_instance_is_fatal(workdir):
    """Test that a missing instance file is logged and exits with code 1"""
    with patch("src.main.logging.error") as mock_error:
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--instance", "missing.json"])
    assert exc.value.code == 1
    mock_error.assert_called_once()


def test_bench_command(workdir):
    """Test bench writes the default tables"""
    with patch("src.main.run_benchmark") as mock_bench:
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--sizes", "6,8", "--per-size", "2", "--strategies", "lp4,maxsd", "--oracle-time-zero"])
    assert exc.value.code == 0
    args, kwargs = mock_bench.call_args
    assert args[:3] == ([6, 8], 2, "lp4,maxsd")
    assert kwargs["oracle_time_zero"] is True
    assert kwargs["out_nodes"].endswith("nodes.csv")
    assert kwargs["out_times"].endswith("times.csv")


def test_bench_baseline_and_reference_are_exclusive():
    """Test --baseline and --reference-strategy cannot be combined"""
    with pytest.raises(SystemExit):
        build_parser().parse_args(["bench", "--baseline", "b.csv", "--reference-strategy", "allcst"])


def test_audit_command(workdir, instance_file, capsys):
    """Test audit-noise prints the audit and exits 0 or 1"""
    with pytest.raises(SystemExit) as exc:
        main(["audit-noise", "--instance", str(instance_file), "--epsilon", "1", "--seed", "2"])
    data = json.loads(capsys.readouterr().out)
    assert exc.value.code == (1 if data["optimum_mismatch"] else 0)
    assert data["epsilon"] == 1
