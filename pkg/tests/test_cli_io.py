import csv
import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsfarf.cli import cli_main
from nlsfarf.config import ConfigError, build_initial, parse_config
from nlsfarf.energy import CSV_COLUMNS
from nlsfarf.grid import Field, init_black_soliton_1d, init_constant, init_random_bounded, make_grid
from nlsfarf.nonlinearity import competing, gp
from nlsfarf.snapshot import (
    MAGIC,
    SnapshotError,
    decode_snapshot,
    encode_snapshot,
    read_snapshot,
    write_snapshot,
)

MINIMAL = "grid.dim = 2\ngrid.extents = 10\ngrid.points = 16\n"


# --- config ------------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.grid == make_grid(2, 10.0, 16)
    assert cfg.nonlinearity == gp()
    assert cfg.initial.kind == "constant" and cfg.initial.farfield == 1.0
    assert cfg.solver.dt == 1e-3 and cfg.solver.scheme == "strang" and cfg.solver.dealias
    assert cfg.output.snapshot_stride == 0 and cfg.output.csv_stride == 1


def test_full_config():
    text = MINIMAL + """
# comment line
nonlinearity.kind = competing
nonlinearity.a2 = 1.2
nonlinearity.alpha1 = 1.5
nonlinearity.alpha2 = 0.5   # trailing comment
initial.kind = random_bounded
initial.seed = 4
initial.phase = 0.5
solver.dt = 0.01
solver.t_end = 0.5
solver.dealias = false
output.directory = results
"""
    cfg = parse_config(text)
    assert cfg.nonlinearity == competing(1.0, 1.2, 1.5, 0.5)
    assert cfg.initial.seed == 4 and not cfg.solver.dealias
    f = build_initial(cfg)
    assert f.farfield == pytest.approx(np.exp(0.5j))
    assert np.array_equal(f.values, build_initial(cfg).values)


@pytest.mark.parametrize(
    "extra, line, fragment",
    [
        ("grid.colour = red\n", 4, "colour"),
        ("solver.dtt = 0.1\n", 4, "dtt"),
        ("initial.kind = black_soliton\n", 4, "dim = 1"),
        ("nonlinearity.kind = power\nnonlinearity.gamma = 2\n", 5, "gamma"),
        ("solver.dt = fast\n", 4, "fast"),
        ("solver.dt = 0.1\nsolver.dt = 0.2\n", 5, "duplicate"),
        ("just text\n", 4, "section.key"),
        ("initial.kind = plane_wave_perturbed\ninitial.mode_k = 0.3, 0\n", 4, "lattice"),
        ("physics.g = 1\n", 4, "physics"),
    ],
)
def test_config_errors(extra, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL + extra)
    assert exc.value.line == line
    assert fragment in str(exc.value)


def test_config_missing_grid():
    with pytest.raises(ConfigError, match="grid.points"):
        parse_config("grid.dim = 1\ngrid.extents = 10\n")


def test_soliton_config_builds_doubled_box():
    cfg = parse_config("grid.dim = 1\ngrid.extents = 60\ngrid.points = 1024\ninitial.kind = black_soliton\n")
    f = build_initial(cfg)
    assert f.grid.points == (2048,)


# --- snapshots -----------------------------------------------------------------


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_snapshot_round_trip_bitwise(tmp_path, dim):
    g = make_grid(dim, [7.0, 9.5, 3.25][:dim], [8, 6, 4][:dim])
    f = init_random_bounded(g, np.exp(0.77j), 2.0, seed=dim)
    p = write_snapshot(f, 1.2345678901234567, tmp_path / "a.nlsf")
    back, t = read_snapshot(p)
    assert t == 1.2345678901234567
    assert back.grid == g and back.farfield == f.farfield
    assert back.values.tobytes() == f.values.tobytes()


def test_snapshot_layout():
    g = make_grid(1, 4.0, 4)
    f = Field(g, np.array([1, 2j, 3, 4 - 1j], dtype=complex), 1.0)
    buf = encode_snapshot(f, 0.5)
    assert buf[:8] == MAGIC
    assert struct.unpack_from("<III", buf, 8) == (1, 1, 4)
    assert struct.unpack_from("<d", buf, 20) == (4.0,)
    assert struct.unpack_from("<ddd", buf, 28) == (1.0, 0.0, 0.5)
    payload = struct.unpack_from("<8d", buf, 52)
    assert payload == (1.0, 0.0, 0.0, 2.0, 3.0, 0.0, 4.0, -1.0)
    assert len(buf) == 52 + 64


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), t=st.floats(0, 1e6, allow_nan=False))
def test_snapshot_round_trip_property(seed, t):
    g = make_grid(2, 5.0, 8)
    f = init_random_bounded(g, np.exp(1j * (seed % 13)), 1.0, seed)
    back, t2 = decode_snapshot(encode_snapshot(f, t))
    assert t2 == t and back.values.tobytes() == f.values.tobytes()


def test_snapshot_truncated_reports_offset():
    buf = encode_snapshot(init_constant(make_grid(2, 5.0, 8)), 0.0)
    with pytest.raises(SnapshotError) as exc:
        decode_snapshot(buf[:-10])
    assert exc.value.offset == 64 and "byte 64" in str(exc.value)  # 8 + 8 + 2*4 + 2*8 + 24
    with pytest.raises(SnapshotError) as exc:
        decode_snapshot(buf[:14])
    assert exc.value.offset == 8


def test_snapshot_version_and_magic():
    buf = bytearray(encode_snapshot(init_constant(make_grid(1, 5.0, 8)), 0.0))
    v2 = bytes(buf[:8]) + struct.pack("<I", 2) + bytes(buf[12:])
    with pytest.raises(SnapshotError, match="unsupported version"):
        decode_snapshot(v2)
    with pytest.raises(SnapshotError, match="bad magic") as exc:
        decode_snapshot(b"NOTASNAP" + bytes(buf[8:]))
    assert exc.value.offset == 0
    with pytest.raises(SnapshotError, match="trailing"):
        decode_snapshot(bytes(buf) + b"\0")


# --- command line --------------------------------------------------------------


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def _csv_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_cli_usage_errors(capsys):
    assert cli_main([]) == 2
    assert cli_main(["frobnicate"]) == 2
    assert cli_main(["scenario", "nope"]) == 2
    assert cli_main(["run", "/nonexistent/config.txt"]) == 2
    assert cli_main(["--help"]) == 0
    assert "solver.picard_panels" in capsys.readouterr().out


def test_cli_bad_config_and_snapshot(tmp_path, capsys):
    bad = _write(tmp_path, "bad.cfg", MINIMAL + "grid.colour = red\n")
    assert cli_main(["run", str(bad)]) == 2
    assert "line 4" in capsys.readouterr().err
    junk = _write(tmp_path, "junk.nlsf", "garbage")
    assert cli_main(["analyze", str(junk)]) == 3
    assert "byte" in capsys.readouterr().err


def test_cli_analyze_constant(tmp_path, capsys):
    p = write_snapshot(init_constant(make_grid(2, 6.0, 8), 1j), 2.5, tmp_path / "c.nlsf")
    assert cli_main(["analyze", str(p)]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert float(rows[1][0]) == 2.5
    assert all(float(x) == 0.0 for x in rows[1][1:-1])


def test_cli_analyze_soliton_with_config(tmp_path, capsys):
    f = init_black_soliton_1d(make_grid(1, 60.0, 512))
    p = write_snapshot(f, 0.0, tmp_path / "s.nlsf")
    cfg = _write(tmp_path, "s.cfg", "grid.dim = 1\ngrid.extents = 120\ngrid.points = 1024\n")
    assert cli_main(["analyze", str(p), "--config", str(cfg)]) == 0
    row = list(csv.reader(io.StringIO(capsys.readouterr().out)))[1]
    rec = dict(zip(CSV_COLUMNS, row))
    assert float(rec["E_GL"]) == pytest.approx(8 / 3, abs=1e-4)
    assert float(rec["H"]) == float(rec["E_GL"])


def test_cli_run_and_resume(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, "r.cfg", MINIMAL + f"""
initial.kind = random_bounded
initial.seed = 3
initial.phase = 0.4
solver.dt = 0.01
solver.t_end = 0.4
solver.report_every = 5
output.directory = {out}
output.snapshot_stride = 20
""")
    assert cli_main(["run", str(cfg)]) == 0
    for name in ("run.csv", "run.verdict", "run.png", "run_final.nlsf", "snap_00000020.nlsf"):
        assert (out / name).exists()
    run_rows = _csv_rows(out / "run.csv")
    assert tuple(run_rows[0]) == CSV_COLUMNS and run_rows[-1][-1] == "completed"
    assert cli_main(["resume", str(out / "snap_00000020.nlsf"), str(cfg)]) == 0
    resumed = _csv_rows(out / "resume.csv")
    assert resumed[1:] == run_rows[-len(resumed) + 1:]
    a, _ = read_snapshot(out / "run_final.nlsf")
    b, _ = read_snapshot(out / "resume_final.nlsf")
    assert a.values.tobytes() == b.values.tobytes()


def test_cli_resume_rejects_foreign_time(tmp_path):
    cfg = _write(tmp_path, "r.cfg", MINIMAL + "solver.dt = 0.1\nsolver.t_end = 1\n")
    snap = write_snapshot(init_constant(make_grid(2, 10.0, 16)), 0.05, tmp_path / "x.nlsf")
    assert cli_main(["resume", str(snap), str(cfg)]) == 3


def test_cli_blowup_is_data(tmp_path):
    out = tmp_path / "b"
    cfg = _write(tmp_path, "b.cfg", f"""
grid.dim = 2
grid.extents = 8
grid.points = 32
nonlinearity.kind = power
nonlinearity.lam = -1
nonlinearity.alpha = 2
initial.kind = gaussian_bump
initial.amplitude = 3
initial.width = 1.5
solver.dt = 1e-3
solver.t_end = 2
solver.blowup_E_threshold = 500
output.directory = {out}
""")
    assert cli_main(["run", str(cfg)]) == 0
    verdict = (out / "run.verdict").read_text()
    assert "status = blowup_flagged" in verdict
    last = _csv_rows(out / "run.csv")[-1]
    assert last[-1] == "blowup_flagged" and float(last[1]) >= 500


def test_cli_catalog(capsys):
    assert cli_main(["catalog"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0][0] == "spec" and len(rows) == 11
    gp_row = dict(zip(rows[0], rows[1]))
    assert gp_row["defocusing"] == "True" and gp_row["kato_passed"] == "True"


def test_cli_single_scenario(tmp_path, capsys):
    assert cli_main(["scenario", "coercivity_negative_F", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "coercivity_negative_F,pass"
    assert (tmp_path / "coercivity_negative_F.verdict").exists()


def test_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("NLSFARF_THREADS", "2")
    p = write_snapshot(init_constant(make_grid(1, 6.0, 8)), 0.0, tmp_path / "c.nlsf")
    assert cli_main(["analyze", str(p)]) == 0
