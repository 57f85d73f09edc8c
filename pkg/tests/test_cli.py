import csv
import io
import json
import subprocess
import sys

import pytest

from hardrods.cli import build_parser, flags_to_argv, main, parse_range, replay_flags


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


# ------------------------------------------------------------------ exact


def test_exact_one_by_two(capsys):
    code, out, _ = run(["exact", "--w", "2", "--h", "1", "--q", "0.5", "--N", "2"], capsys)
    assert code == 0
    assert "Z_tilings   = 1.5" in out
    assert "P(0 horizontal) = 0.333333" in out


def test_exact_vertical_pair(capsys):
    # width 1 puts the 2-rod vertically
    code, out, _ = run(["exact", "--w", "1", "--h", "2", "--q", "0.5", "--N", "2"], capsys)
    assert code == 0
    assert "P(0 vertical)   = 0.333333" in out and "P(0 horizontal) = 0.000000" in out


def test_exact_single_site(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(["exact", "--w", "1", "--h", "1", "--q", "0.3", "--json", str(path)], capsys)
    rep = json.loads(path.read_text())
    assert code == 0 and rep["Z_tilings"] == pytest.approx(0.6) and rep["marginals"]["horizontal"] == 0


def test_exact_identity_4x4(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, _, _ = run(["exact", "--w", "4", "--h", "4", "--q", "0.3", "--N", "4", "--json", str(path)], capsys)
    assert code == 0 and json.loads(path.read_text())["identity_residual"] <= 1e-9


def test_exact_too_large(capsys):
    code, _, err = run(["exact", "--w", "5", "--h", "5"], capsys)
    assert code == 2 and "error" in err


# ------------------------------------------------------------------ renewal


def test_renewal_geometric_constant(capsys):
    code, out, _ = run(["renewal", "--q", "0.3", "--N", "inf", "--nmax", "50"], capsys)
    rows = rows_of(out)
    assert code == 0 and len(rows) == 51
    assert all(abs(float(r["g_n"]) - 0.3) <= 1e-12 for r in rows[1:])


def test_renewal_small_N_fails_but_exits_zero(capsys, tmp_path):
    path = tmp_path / "t.csv"
    code, _, _ = run(["renewal", "--q", "0.4", "--N", "2", "--nmax", "30", "--out", str(path)], capsys)
    rows = rows_of(path.read_text())
    assert code == 0
    assert any(r["pass"] == "FAIL" for r in rows)
    certs = json.loads((tmp_path / "t.csv.json").read_text())["certificates"]
    assert [c["name"] for c in certs] == ["A1", "A2", "denominator", "residuals"]
    assert not next(c for c in certs if c["name"] == "A2")["pass"]


@pytest.mark.slow
def test_renewal_large_N_all_pass(capsys):
    code, out, _ = run(["renewal", "--q", "0.2", "--N", "400", "--nmax", "200"], capsys)
    rows = rows_of(out)
    assert code == 0
    assert all(r["pass"] == "PASS" for r in rows[1:])


def test_renewal_bad_flags(capsys):
    with pytest.raises(SystemExit) as e:
        main(["renewal", "--q", "-1"])
    assert e.value.code == 2
    code, _, _ = run(["renewal", "--q", "1.5"], capsys)
    assert code == 2
    with pytest.raises(SystemExit) as e:
        main(["renewal", "--q", "0.3", "--N", "one"])
    assert e.value.code == 2


def test_renewal_fugacity(capsys):
    code, out, _ = run(["renewal", "--q", "0.5", "--fugacity", "--N", "inf", "--nmax", "5"], capsys)
    rows = rows_of(out)
    assert code == 0 and float(rows[3]["g_n"]) == pytest.approx(0.5 / 1.5, abs=1e-14)


# ------------------------------------------------------------------ sampling commands

SAMPLE = ["sample", "--q", "0.3", "--w", "6", "--h", "6", "--sweeps", "300", "--burnin", "20", "--seed", "9",
          "--chains", "2"]


def test_sample_deterministic_bytes(tmp_path, capsys):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(SAMPLE + ["--out", str(a)]) == 0
    assert main(SAMPLE + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(SAMPLE[:-4] + ["--seed", "10", "--chains", "2", "--out", str(c)]) == 0
    assert a.read_bytes() != c.read_bytes()
    text = a.read_bytes().decode()
    assert text.startswith("q,N,L1,L2,boundary,sweeps,seed,kernel,init,observable,mean,stderr\r\n")
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta["schema"] == 1 and meta["rng"] == "numpy.random.PCG64"
    assert {"version", "git_revision", "flags"} <= set(meta)


def test_metadata_replays_to_same_csv(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sample", "--q", "0.7", "--N", "3", "--w", "5", "--h", "4", "--kernel", "split_merge",
            "--boundary", "free", "--sweeps", "200", "--seed", "3", "--out", str(a)]
    assert main(argv) == 0
    flags = json.loads((tmp_path / "a.csv.meta.json").read_text())["flags"]
    assert main(flags_to_argv(flags) + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["scan", "--q", "0.1:0.3:0.1", "--N", "inf", "--w", "8", "--h", "8"],
    ["domains", "--k1", "2", "--k2", "1", "--n", "2", "--q", "0.1"],
    ["tension", "--q", "0.1", "--L", "12", "--ks", "2,4"],
    ["sample", "--q", "0.4", "--N", "3", "--w", "4", "--h", "4", "--rule", "metropolis", "--no-cluster"],
])
def test_flags_round_trip(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {"command": args.command, **replay_flags(args)}
    again = parser.parse_args(flags_to_argv(flags))
    assert replay_flags(again) == replay_flags(args)


def test_scan_and_stream_outputs(tmp_path, capsys):
    out, stream = tmp_path / "s.csv", tmp_path / "stream.csv"
    assert main(["scan", "--q", "0.2,0.6", "--w", "6", "--h", "6", "--sweeps", "100", "--burnin", "10",
                 "--out", str(out)]) == 0
    rows = rows_of(out.read_text())
    assert {r["q"] for r in rows} == {"0.20000000000000001", "0.59999999999999998"}
    assert {r["init"] for r in rows} == {"random", "H"}
    assert main(SAMPLE + ["--out", str(tmp_path / "x.csv"), "--stream", str(stream),
                          "--snapshots", str(tmp_path / "snap.json")]) == 0
    assert len(rows_of(stream.read_text())) == 600
    snaps = json.loads((tmp_path / "snap.json").read_text())["snapshots"]
    assert len(snaps) == 2 and snaps[0]["tiling"]["geometry"]["width"] == 6


def test_io_failure_exit_code(tmp_path, capsys):
    code, _, err = run(SAMPLE + ["--out", str(tmp_path / "missing" / "x.csv")], capsys)
    assert code == 3 and "cannot write" in err


def test_invalid_sampling_flags(capsys):
    for argv in (["sample", "--q", "0", "--w", "4", "--h", "4"],
                 ["sample", "--q", "0.3", "--w", "4", "--h", "4", "--N", "1"],
                 ["sample", "--q", "0.3", "--w", "4", "--h", "4", "--sweeps", "0"],
                 ["scan", "--q", "0.5:0.1:0.1"]):
        with pytest.raises(SystemExit) as e:
            main(argv)
        assert e.value.code == 2
    code, _, _ = run(["sample", "--q", "0.3", "--w", "4", "--h", "4", "--N", "3", "--cluster"], capsys)
    assert code == 2


def test_parse_range():
    assert parse_range("0.05:0.5:0.05") == pytest.approx([0.05 * i for i in range(1, 11)])
    assert len(parse_range("0.05:0.5:0.05")) == 10
    assert parse_range("0.1,0.2") == [0.1, 0.2]
    assert parse_range("0.3") == [0.3]
    assert parse_range("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1.0]


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "hardrods.cli", "exact", "--w", "2", "--h", "1", "--N", "2"],
                         capture_output=True, text=True, timeout=120)
    assert out.returncode == 0 and "Z_tilings" in out.stdout
