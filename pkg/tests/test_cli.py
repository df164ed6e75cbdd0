import io
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from bpa.bench import CSV_COLUMNS, TrialConfig, run_benchmark
from bpa.cli import main
from bpa.corrfile import InputFormatError, format_correspondence, parse_correspondences, read_correspondences
from bpa.procrustes import horn_align, map_pose
from bpa.quat import angular_distance

DATA = Path(__file__).parent / "data"


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def parse_kv(text):
    blocks, cur = [], {}
    for line in text.splitlines():
        if not line.strip():
            blocks.append(cur)
            cur = {}
            continue
        k, v = line.split(" = ")
        cur[k] = v
    blocks.append(cur)
    return blocks


def vec(s):
    return np.array(s.split(), dtype=float)


def test_normalizer_uniform():
    code, out = run("normalizer", "0", "0", "0")
    assert code == 0
    assert abs(float(parse_kv(out)[0]["F"]) - 19.7392) < 1e-3


def test_align_three_point_matches_horn():
    code, out = run("align", str(DATA / "three_point.txt"))
    assert code == 0
    kv = parse_kv(out)[0]
    q_h, t_h = horn_align(read_correspondences(DATA / "three_point.txt"))
    assert kv["n_correspondences"] == "3"
    assert angular_distance(vec(kv["q"]), q_h) < 1e-9
    np.testing.assert_allclose(vec(kv["t"]), t_h, atol=1e-12)
    # the fixture is noiseless
    np.testing.assert_allclose(vec(kv["t"]), [0.1, -0.05, 0.02], atol=1e-12)
    dirs = np.column_stack([vec(kv[f"dir{i}"]) for i in (1, 2, 3)])
    np.testing.assert_allclose(dirs.T @ dirs, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(dirs.T @ vec(kv["mode"]), 0.0, atol=1e-12)
    assert np.all(vec(kv["lambdas"]) <= 0)


def test_align_oriented_file():
    path = DATA / "two_oriented.txt"
    code, out = run("align", str(path))
    assert code == 0
    kv = parse_kv(out)[0]
    q, t = map_pose(read_correspondences(path))
    assert angular_distance(vec(kv["q"]), q) < 1e-12
    np.testing.assert_allclose(vec(kv["t"]), [0.1, -0.05, 0.02], atol=1e-9)


def test_sample_output_is_seeded():
    path = str(DATA / "three_point.txt")
    code, a = run("sample", path, "--n", "5", "--seed", "3")
    assert code == 0
    blocks = parse_kv(a)
    assert blocks[0]["n_samples"] == "5" and len(blocks) == 6
    lw = np.array([float(b["log_weight"]) for b in blocks[1:]])
    assert abs(np.logaddexp.reduce(lw)) < 1e-9
    assert run("sample", path, "--n", "5", "--seed", "3")[1] == a
    assert run("sample", path, "--n", "5", "--seed", "4")[1] != a


def test_seed_env_default_and_flag_override(monkeypatch):
    path = str(DATA / "three_point.txt")
    ref = run("sample", path, "--n", "3", "--seed", "11")[1]
    monkeypatch.setenv("BPA_SEED", "11")
    assert run("sample", path, "--n", "3")[1] == ref
    assert run("sample", path, "--n", "3", "--seed", "12")[1] != ref
    monkeypatch.setenv("BPA_SEED", "eleven")
    assert run("sample", path, "--n", "3")[0] == 2


def test_benchmark_csv_contract(capsys):
    code, out = run("benchmark", "--trials", "3", "--iterations", "20", "--seed", "7", "--points", "300")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 21
    rows = np.array([l.split(",") for l in lines[1:]], dtype=float)
    np.testing.assert_array_equal(rows[:, 0], np.arange(1, 21))
    assert "degenerate trials excluded: 0" in capsys.readouterr().err
    # same numbers as the library call
    cfg = TrialConfig(n_trials=3, iterations=20, seed=7, n_points=300)
    assert run_benchmark(cfg).to_csv() == out


def test_benchmark_writes_file(tmp_path):
    dest = tmp_path / "curves.csv"
    code, out = run("benchmark", "--trials", "1", "--iterations", "3", "--points", "200", "--out", str(dest))
    assert code == 0 and out == ""
    assert dest.read_text().startswith("iter,")


@pytest.mark.parametrize(
    "body, line",
    [
        ("0 0 0 1 1 1 0.1\n0 0 0 1 1\n", 2),
        ("# header\n0 0 0 1 1 1 abc\n", 2),
        ("0 0 0 1 1 1 -0.1\n", 1),
        ("0 0 0 1 1 1 0.1\n\n0 0 0 1 1 1 nan\n", 3),
        ("0 0 0 1 1 1 0.1 0 0 0 0 1 0 0 0 -1 -1 0\n", 1),
        ("0 0 0 1 1 1 0.1 1 0 0 0 1 0 0 0 -1 5 0\n", 1),
    ],
)
def test_malformed_file_reports_line(tmp_path, capsys, body, line):
    p = tmp_path / "bad.txt"
    p.write_text(body)
    with pytest.raises(InputFormatError) as ei:
        parse_correspondences(body)
    assert ei.value.line == line
    assert run("align", str(p))[0] == 2
    assert f"line {line}:" in capsys.readouterr().err


def test_empty_and_missing_files(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("# nothing\n\n")
    assert run("align", str(p))[0] == 2
    assert run("align", str(tmp_path / "missing.txt"))[0] == 2


def test_argument_errors_exit_2():
    assert run("normalizer", "0", "0")[0] == 2
    assert run("normalizer", "0", "0", "1")[0] == 2
    assert run("benchmark", "--trials", "0")[0] == 2
    assert run("benchmark", "--shape", "torus")[0] == 2
    assert run()[0] == 2


def test_format_round_trip():
    for name in ("three_point.txt", "two_oriented.txt"):
        corrs = read_correspondences(DATA / name)
        text = "\n".join(format_correspondence(c) for c in corrs)
        again = parse_correspondences(text)
        for a, b in zip(corrs, again):
            np.testing.assert_array_equal(a.x, b.x)
            np.testing.assert_array_equal(a.y, b.y)
            assert a.sigma == b.sigma
            if a.orientation is not None:
                np.testing.assert_allclose(a.orientation.noise.lambdas, b.orientation.noise.lambdas)
                np.testing.assert_allclose(np.abs(a.orientation.noise.dirs.T @ b.orientation.noise.dirs).max(axis=0), 1.0)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "bpa", "normalizer", "0", "0", "0"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("F = 19.739")
