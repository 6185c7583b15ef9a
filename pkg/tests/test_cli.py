import csv
import json
import subprocess
import sys

import pytest

from trussoa.cases import dumps_case, gen_case, load_case, save_case
from trussoa.cli import BENCH_COLUMNS, CATALOG_COUNTS, _bench_instances, main, run_bench, run_case


@pytest.fixture
def two_bar_file(tmp_path):
    path = tmp_path / "two-bar.json"
    save_case(gen_case("two-bar"), path)
    return path


def read_history(run_dir):
    with open(run_dir / "history.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_oa_writes_archive(two_bar_file, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["solve", "--case", str(two_bar_file), "--out", str(out), "--dump-milp"]) == 0
    assert "master-infeasible" in capsys.readouterr().out
    assert len(read_history(out)) == 2
    result = json.loads((out / "result.json").read_text())
    assert result["c_star"] == [0, 1] and result["termination"] == "master-infeasible"
    meta = json.loads((out / "metadata.json").read_text())
    assert {"numpy", "scipy", "python", "argv", "wall_s"} <= set(meta)
    assert len(list((out / "milp").glob("*.lp"))) == 2

    # the archived case alone reproduces the run
    again = tmp_path / "again"
    assert main(["solve", "--case", str(out / "case.json"), "--out", str(again)]) == 0
    w2 = json.loads((again / "result.json").read_text())["w_star"]
    assert w2 == pytest.approx(result["w_star"], abs=1e-9)


def test_solve_enum(two_bar_file, tmp_path):
    out = tmp_path / "enum"
    assert main(["solve", "--case", str(two_bar_file), "--solver", "enum", "--out", str(out)]) == 0
    rows = read_history(out)
    assert len(rows) == 4
    assert json.loads((out / "result.json").read_text())["termination"] == "enumeration-complete"


def test_malformed_case_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    d = json.loads(dumps_case(gen_case("two-bar")))
    d["bars"][0] = [0, 9]
    bad.write_text(json.dumps(d))
    assert main(["solve", "--case", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "bars[0]" in capsys.readouterr().err
    assert main(["solve", "--case", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 1


def test_iteration_cap_exit_code(tmp_path):
    path = tmp_path / "c.json"
    save_case(gen_case("ten-bar", ubar=22), path)
    assert main(["solve", "--case", str(path), "--out", str(tmp_path / "r"), "--max-iter", "1"]) == 3
    result = json.loads((tmp_path / "r" / "result.json").read_text())
    assert result["termination"] == "iteration-cap"


def test_gen(tmp_path, capsys):
    path = tmp_path / "cant.json"
    assert main(["gen", "--name", "cantilever", "--blocks", "3", "--out", str(path)]) == 0
    case = load_case(path)
    assert case.n_bars == 15 and case.p == 2
    assert main(["gen", "--name", "ten-bar", "--ubar", "19", "--p", "4", "--out", "-"]) == 0
    text = capsys.readouterr().out
    assert '"ubar": 19.0' in text
    assert main(["gen", "--name", "cantilever", "--blocks", "0", "--out", "-"]) == 1


def test_gradcheck_command(tmp_path, capsys):
    path = tmp_path / "ten.json"
    save_case(gen_case("ten-bar"), path)
    assert main(["gradcheck", "--case", str(path), "--seed", "0", "--skip-psi"]) == 0
    out = capsys.readouterr().out
    assert out.count("pass") >= 6 and "gradcheck: pass" in out
    assert main(["gradcheck", "--case", str(path), "--catalogs", "0,1"]) == 1


def test_bench_scaling_elements(tmp_path):
    rows = run_bench("scaling-elements", tmp_path, max_blocks=2)
    assert len(rows) == 2
    with open(tmp_path / "scaling-elements.csv", newline="") as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == BENCH_COLUMNS and len(table) == 3
    assert all(r["status"] == "master-infeasible" for r in rows)
    assert rows[0]["fem"] < rows[1]["fem"]


def test_bench_catalog_instances_keep_ten_bars():
    items = _bench_instances("scaling-catalogs", 0)
    assert [case.p for _, case in items] == list(CATALOG_COUNTS)
    assert all(case.n_bars == 10 for _, case in items)
    r = run_case(items[0][1])
    assert r.termination == "master-infeasible"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "trussoa", "gen", "--name", "two-bar", "--out", "-"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and '"two-bar"' in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "trussoa", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "trussoa" in proc.stdout
