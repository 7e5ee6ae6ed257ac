import csv
import io
import json
import os
import subprocess
import sys

import pytest

from patdens.cli import ExperimentConfig, UsageError, main, parse_n_range, read_config


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def body(text):
    """CSV rows without the comment lines."""
    return list(csv.reader(line for line in text.splitlines() if not line.startswith("#")))


def test_match_prints_witness():
    code, text = run("match", "cool", "banana")
    assert code == 0
    assert text.strip() == "c→b, o→an, l→a"


def test_match_negative_exit_code():
    code, text = run("match", "xx", "banana")
    assert code == 1
    assert "not an instance" in text


@pytest.mark.parametrize("pattern, word, row", [
    ("xx", "banana", ["xx", "banana", "2", "21", "2/21", "0.0952380952"]),
    ("xyx", "science", ["xyx", "science", "2", "28", "1/14", "0.0714285714"]),
])
def test_density_rows(pattern, word, row):
    code, text = run("density", pattern, word)
    assert code == 0
    assert body(text) == [["pattern", "word", "instances", "substrings", "density", "decimal"], row]


def test_density_json():
    code, text = run("density", "xx", "banana", "--format", "json")
    doc = json.loads(text)
    assert code == 0 and doc["rows"] == [["xx", "banana", 2, 21, "2/21", 0.0952380952]]


def test_usage_errors():
    assert run("density", "", "banana")[0] == 2
    assert run("density", "xx", "abc", "--q", "2")[0] == 2
    assert run("exact", "bound", "--pattern", "aba", "--q", "2", "--n", "4")[0] == 2
    assert run("exact", "z2limit", "--q", "1")[0] == 2
    assert run("experiment", "--n", "8")[0] == 2
    assert run("experiment", "variance", "--pattern", "x", "--n", "8,16", "--samples", "5")[0] == 2
    assert run("nonsense")[0] == 2


def test_exact_instprob():
    code, text = run("exact", "instprob", "--pattern", "aba", "--q", "2", "--n", "3:5")
    assert code == 0
    assert body(text)[1:] == [["3", "1/2", "0.5"], ["4", "1/2", "0.5"], ["5", "5/8", "0.625"]]


def test_exact_bounds():
    _, text = run("exact", "bound", "--pattern", "xx", "--q", "2", "--n", "2,4")
    assert body(text)[1:] == [["2", "1.5"], ["4", "1.5"]]
    _, text = run("exact", "tailbound", "--pattern", "xx", "--q", "2", "--n", "4", "--f", "8")
    assert body(text)[1:] == [["4", "8", "16"]]


def test_exact_z2limit():
    code, text = run("exact", "z2limit", "--q", "2:7")
    assert code == 0
    rounded = [row[2] for row in body(text)[1:]]
    assert rounded == ["0.7322132", "0.4430202", "0.3122520", "0.2399355", "0.1944229", "0.1632568"]


def test_exact_budget_exit_code(monkeypatch):
    monkeypatch.setenv("PATDENS_BUDGET", "100")
    code, _ = run("exact", "expdens", "--pattern", "xx", "--q", "2", "--n", "20")
    assert code == 3


def test_experiment_budget_exit_code():
    code, _ = run("experiment", "dichotomy", "--n", "64:256:x2", "--samples", "100", "--budget", "1000")
    assert code == 3
    assert "PATDENS_BUDGET" not in os.environ


@pytest.mark.parametrize("text, values", [
    ("7", [7]), ("2,4,8", [2, 4, 8]), ("1:4", [1, 2, 3, 4]), ("1:9:+3", [1, 4, 7]),
    ("64:4096:x2", [64, 128, 256, 512, 1024, 2048, 4096]), ("3:10:x3", [3, 9]),
])
def test_parse_n_range(text, values):
    assert parse_n_range(text) == values


@pytest.mark.parametrize("text", ["", "a", "4:2", "1:5:x1", "1:5:-1", "3,2", "0:4", "1:2:3:4", "2:9:y2"])
def test_parse_n_range_rejects(text):
    with pytest.raises(UsageError):
        parse_n_range(text)


ARGS = ["experiment", "moments", "--pattern", "xyxy", "--n", "16:64:x2", "--samples", "300",
        "--seed", "5", "--p-max", "2"]


def test_experiment_csv_and_json_agree():
    _, csv_text = run(*ARGS)
    _, json_text = run(*ARGS, "--format", "json")
    doc = json.loads(json_text)
    rows = body(csv_text)
    assert rows[0] == doc["columns"] == ["n", "order", "estimate", "scaled", "ci_half_width", "samples"]
    assert [[str(v) for v in r] for r in doc["rows"]] == [
        [c if "e" not in c else str(float(c)) for c in r] for r in rows[1:]]
    for key, value in doc["config"].items():
        if key != "format":
            assert f"# {key}={value}" in csv_text
    assert doc["footer"]["work_units"] == 300 * 4 * (16 + 32 + 64)


def test_config_round_trip(tmp_path):
    saved = tmp_path / "run.cfg"
    _, first = run(*ARGS, "--write-config", str(saved))
    assert ExperimentConfig.from_mapping(read_config(saved)).pattern == "xyxy"
    _, again = run("experiment", "--config", str(saved))
    assert again == first
    # the header of a CSV output is itself a config
    out_file = tmp_path / "out.csv"
    out_file.write_text(first)
    _, third = run("experiment", "--config", str(out_file))
    assert third == first
    # flags override the file
    _, other = run("experiment", "--config", str(saved), "--seed", "6")
    assert other != first and "# seed=6" in other


def test_config_rejects_unknown_keys(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("kind=dichotomy\ncolour=blue\n")
    assert run("experiment", "--config", str(bad))[0] == 2
    bad.write_text("kind=dichotomy\nsamples=lots\n")
    assert run("experiment", "--config", str(bad))[0] == 2


def test_experiment_rows_are_worker_independent():
    a = run("experiment", "dichotomy", "--pattern", "xx", "--n", "32:256:x2", "--samples", "5000",
            "--seed", "9", "--workers", "1")
    b = run("experiment", "dichotomy", "--pattern", "xx", "--n", "32:256:x2", "--samples", "5000",
            "--seed", "9", "--workers", "4")
    assert a == b


def test_tolerance_and_lemma_base():
    code, text = run("experiment", "lemma-base", "--pattern", "xxyy", "--n", "8,12", "--samples", "50",
                     "--tolerance", "1.5")
    assert code == 0
    assert [r[1] for r in body(text)[1:]] == ["1", "1"]
    assert "# within_tolerance=true" in text


def test_figure_option(tmp_path):
    pytest.importorskip("matplotlib")
    fig = tmp_path / "plot.png"
    code, _ = run("experiment", "dichotomy", "--n", "8,16,32", "--samples", "20", "--figure", str(fig))
    assert code == 0 and fig.stat().st_size > 0


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "patdens.cli", "match", "xyx", "abcab"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "x→ab, y→c"
