import json
import struct
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from grazelab import cli
from grazelab import io as gio


def test_csv_format(tmp_path):
    text = gio.csv_text(["a", "b"], [[0.1, 3], [1 / 3, "x,y"]])
    lines = text.split("\r\n")
    assert lines[0] == "a,b"
    assert lines[1] == "0.10000000000000001,3"
    assert lines[2] == '0.33333333333333331,"x,y"'
    path = gio.write_csv(tmp_path / "t.csv", ["a"], [[2.5]])
    assert gio.read_csv(path) == (["a"], [["2.5"]])


@pytest.mark.parametrize("dtype", [float, complex])
def test_matrix_round_trip(tmp_path, dtype, rng):
    A = rng.normal(size=(6, 6)).astype(dtype)
    if dtype is complex:
        A = A + 1j * rng.normal(size=(6, 6))
    path = gio.write_matrix(tmp_path / "m.glopmat", A, "L_eps", 2)
    B, label, K = gio.read_matrix(path)
    assert np.array_equal(A, B) and label == "L_eps" and K == 2


def test_matrix_header_layout():
    raw = gio.matrix_bytes(np.eye(2), "ab", 1)
    assert raw[:8] == b"GLOPMAT1"
    assert struct.unpack_from("<I", raw, 8) == (2,)
    assert raw[12:14] == b"ab"
    assert struct.unpack_from("<IIB", raw, 14) == (1, 2, 0)
    assert np.array_equal(np.frombuffer(raw[23:], "<f8"), [1.0, 0.0, 0.0, 1.0])


def test_matrix_errors(tmp_path):
    with pytest.raises(ValueError):
        gio.matrix_bytes(np.zeros((2, 3)), "x", 1)
    with pytest.raises(ValueError):
        gio.write_matrix_csv(tmp_path / "big.csv", np.zeros((65, 65)))
    with pytest.raises(ValueError):
        gio.write_matrix_csv(tmp_path / "c.csv", np.zeros((2, 2), dtype=complex))
    bad = tmp_path / "bad"
    bad.write_bytes(b"NOTAMATRIX")
    with pytest.raises(ValueError):
        gio.read_matrix(bad)


def test_svg_is_well_formed():
    svg = gio.svg_line_chart({"a<b": ([1, 10, 100], [3, 2, 1]), "empty": ([0], [0])}, title="t & u",
                             logx=True, logy=True)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 2


def test_config_file_parsing(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ngamma = -2\ns=0.75 # trailing\neps = 0.3,0.1\n", encoding="utf-8")
    out = cli.resolve_config("validate", {"s": "0.9"}, cfg)
    assert out["gamma"] == -2.0 and out["s"] == 0.9 and out["eps_list"] == [0.3, 0.1]
    assert out["K"] == cli.COMMAND_DEFAULT_K["validate"]
    bad = tmp_path / "bad.cfg"
    bad.write_text("gama = 1\n", encoding="utf-8")
    with pytest.raises(cli.UsageError, match="gama"):
        cli.resolve_config("validate", {}, bad)


@pytest.mark.parametrize("argv", [["validate", "--bogus", "1"], ["validate", "--gamma", "abc"], [],
                                  ["toy", "--format", "png"], ["validate", "--threads", "0"]])
def test_usage_errors_exit_1(argv, tmp_path):
    assert cli.run(argv + ["--out", str(tmp_path)] if argv else argv) == cli.EXIT_USAGE


def test_validate_happy_path(tmp_path, capsys):
    code = cli.run(["validate", "--gamma", "-1", "--s", "0.75", "--eps", "0.1", "--out", str(tmp_path)])
    assert code == 0
    header, rows = gio.read_csv(tmp_path / "validate.csv")
    assert header == ["eps", "check", "value", "target", "rel_error"]
    assert [r[1] for r in rows] == ["order2_integral", "symbol_check", "lambda_e", "null_space_residuals"]
    summary = (tmp_path / "summary.txt").read_text().splitlines()
    assert summary and all(line.startswith("PASS") for line in summary)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["gamma"] == -1.0 and "numpy" in manifest["versions"]
    assert "validate:" in capsys.readouterr().out


def test_invalid_parameters_exit_2(tmp_path):
    assert cli.run(["validate", "--gamma", "-3", "--out", str(tmp_path)]) == cli.EXIT_INVALID
    assert cli.run(["toy", "--lambda", "0.1", "--q", "0.2", "--out", str(tmp_path)]) == cli.EXIT_INVALID


def test_symbol_with_svg(tmp_path):
    assert cli.run(["symbol", "--eps", "0.1", "--format", "csv,svg", "--out", str(tmp_path)]) == 0
    ET.fromstring((tmp_path / "symbol.svg").read_text())


def test_gap_exports_matrices(tmp_path):
    code = cli.run(["gap", "--eps", "0.3,0.1", "--K", "3", "--export-matrices", "1", "--out", str(tmp_path)])
    assert code == 0
    A, label, K = gio.read_matrix(tmp_path / "L_eps_0.1.glopmat")
    assert label == "L_eps" and K == 3 and A.shape == (20, 20)
    assert (tmp_path / "L_eps_0.1_matrix.csv").exists()


def test_decay_command(tmp_path):
    assert cli.run(["decay", "--eps", "0.1", "--K", "4", "--horizon", "2", "--out", str(tmp_path)]) == 0
    header, rows = gio.read_csv(tmp_path / "decay_rates.csv")
    assert header[2] == "early_rate" and len(rows) == 1


def test_thread_count_does_not_change_bytes(tmp_path):
    outs = []
    for threads in (1, 3):
        out = tmp_path / f"t{threads}"
        assert cli.run(["gap", "--eps", "0.3,0.1,0.03", "--K", "4", "--threads", str(threads),
                        "--out", str(out)]) == 0
        outs.append(out)
    assert (outs[0] / "gap.csv").read_bytes() == (outs[1] / "gap.csv").read_bytes()
    m0, m1 = (json.loads((o / "manifest.json").read_text()) for o in outs)
    m0["config"].pop("out"), m1["config"].pop("out")
    assert m0 == m1
