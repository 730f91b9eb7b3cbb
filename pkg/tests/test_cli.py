import subprocess
import sys

import pytest

from ncta_sim.cli import ConfigError, main, parse_invocation, parse_lambdas
from ncta_sim.protocols import Algo


def test_lambda_grid_is_inclusive_and_exact():
    grid = parse_lambdas("0:2:0.1")
    assert len(grid) == 21 and grid[3] == 0.3 and grid[-1] == 2.0
    assert parse_lambdas("0.5") == [0.5]
    assert parse_lambdas("0.1,0.2") == [0.1, 0.2]


def test_sweep_grid_size():
    inv = parse_invocation("sweep --algos ncta,bta,aloha --type 2 --users 8 --lambda 0:2:0.1".split())
    assert len(inv.grid()) == 63


def test_every_bad_flag_reported():
    with pytest.raises(ConfigError) as exc:
        parse_invocation("run --algo ncta --lambda -1 --users 0 --reps 0".split())
    joined = " ".join(exc.value.problems)
    assert "--lambda" in joined and "--users" in joined and "--reps" in joined


def test_conflicting_algos():
    with pytest.raises(ConfigError):
        parse_invocation("sweep --algos ncta,ncta".split())
    with pytest.raises(ConfigError):
        parse_invocation("sweep --algo ncta --algos bta".split())
    with pytest.raises(ConfigError):
        parse_invocation("run --algos ncta,bta".split())


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# experiment\nalgos = bta,aloha\nlambda = 0.5:1:0.5\nreps = 7\nwarmup-frac = 0.2\n")
    inv = parse_invocation(["sweep", "--config", str(cfg), "--reps", "9"])
    assert inv.algos == [Algo.BTA, Algo.ALOHA] and inv.lambdas == [0.5, 1.0]
    assert inv.reps == 9 and inv.warmup_frac == 0.2


def test_config_file_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["sweep", "--config", str(cfg)]) == 1


def test_exit_code_config_error(capsys):
    assert main(["run", "--algo", "ncta", "--lambda", "-1"]) == 1
    assert "--lambda" in capsys.readouterr().err


def test_unknown_flag_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 1


def test_oracle_subcommand(capsys):
    assert main("oracle --protocol ncta --users 8 --active 0,1,2,3,4,5,6,7 --split det".split()) == 0
    out = capsys.readouterr().out
    assert "slots=8 deliveries=8" in out and "PASS" in out


def test_sweep_writes_identical_files(tmp_path, capsys):
    args = "sweep --algos ncta,tdm --lambda 0.5,1 --slots 300 --reps 3".split()
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a), "--plot-dir", str(tmp_path / "p")]) == 0
    assert main(args + ["--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "p" / "manifest.tsv").exists()


def test_unwritable_output_exits_2(tmp_path):
    assert main(["sweep", "--algo", "ncta", "--reps", "2", "--slots", "100",
                 "--out", str(tmp_path / "missing" / "x.csv")]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--algo", "ncta", "--reps", "2", "--slots", "100", "--plot-dir", str(blocker / "d")]) == 2


def test_compare_and_run_print(capsys):
    assert main("compare --algos ncta,bta --lambda 1 --slots 300 --reps 3".split()) == 0
    assert "ncta:thr" in capsys.readouterr().out
    assert main("run --algo aloha --type 1 --lambda 0.4 --slots 300 --reps 3".split()) == 0
    assert "aloha" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ncta_sim", "oracle", "--protocol", "bta", "--users", "2",
                           "--active", "0,1"], capture_output=True, text=True)
    assert proc.returncode == 0 and "slots=3 deliveries=2" in proc.stdout
