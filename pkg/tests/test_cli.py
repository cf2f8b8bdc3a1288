import contextlib
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from lpcorrupt.cli import EXIT_IO, EXIT_VALIDATION, build_parser, main
from lpcorrupt.metrics import REAL_WORLD_CORRUPTIONS
from lpcorrupt.pipeline import Dataset

GOLDEN = Path(__file__).parent / "golden"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def make_dataset(path, n=6, shape=(3, 8, 8), seed=0):
    rng = np.random.default_rng(seed)
    ds = Dataset.from_arrays(rng.random((n, *shape), dtype=np.float32).astype(np.float32))
    ds.save(path)
    return ds


class TestHelp:
    @pytest.mark.parametrize("name", ["main", "sets", "corrupt", "metrics", "geometry", "sample"])
    def test_golden_help(self, name, monkeypatch, capsys):
        monkeypatch.setenv("COLUMNS", "100")
        parser = build_parser()
        if name == "main":
            text = parser.format_help()
        else:
            with contextlib.redirect_stdout(io.StringIO()) as buf:
                with pytest.raises(SystemExit):
                    parser.parse_args([name, "--help"])
            text = buf.getvalue()
        assert text == (GOLDEN / f"help_{name}.txt").read_text()

    def test_documented_flags_present(self, monkeypatch):
        monkeypatch.setenv("COLUMNS", "100")
        parser = build_parser()
        with contextlib.redirect_stdout(io.StringIO()) as buf:
            with pytest.raises(SystemExit):
                parser.parse_args(["corrupt", "--help"])
        corrupt_help = buf.getvalue()
        for flag in ["--seed", "--profile", "--set", "--share-group", "--no-clamp", "--threads", "--json"]:
            assert flag in corrupt_help
        with contextlib.redirect_stdout(io.StringIO()) as buf:
            with pytest.raises(SystemExit):
                parser.parse_args(["sample", "--help"])
        assert "--samples" in buf.getvalue()


class TestSets:
    def test_expand_grid_size(self, capsys):
        code, out, _ = run(["sets", "expand", "--name", "mCE_Lp", "--profile", "cifar"], capsys)
        assert code == 0
        assert len(out.strip().splitlines()) == 90

    def test_expand_json(self, capsys):
        code, out, _ = run(["sets", "expand", "--name", "iCE", "--profile", "tin", "--json"], capsys)
        payload = json.loads(out)
        assert len(payload["specs"]) == 6
        assert {"p": "2", "epsilon": 2.0, "mode": "sphere", "clamp": True} in payload["specs"]

    def test_list(self, capsys):
        code, out, _ = run(["sets", "list"], capsys)
        assert code == 0
        for name in ["mCE_Lp", "iCE", "C1", "C2", "C3"]:
            assert name in out

    def test_show_roundtrips(self, tmp_path, capsys):
        code, out, _ = run(["sets", "show", "--name", "C2", "--profile", "cifar"], capsys)
        assert code == 0
        config = tmp_path / "c2.cfg"
        config.write_text(out)
        code2, out2, _ = run(["sets", "expand", "--name", str(config)], capsys)
        assert code2 == 0
        assert len(out2.strip().splitlines()) == 30

    def test_validate(self, tmp_path, capsys):
        good = tmp_path / "good.cfg"
        good.write_text(
            "set probe profile=custom intent=training\n"
            "p=2 eps_min=0.1 eps_max=1.0 n=4 spacing=log mode=ball\n"
        )
        code, out, _ = run(["sets", "validate", str(good)], capsys)
        assert code == 0 and "ok: set probe" in out
        bad = tmp_path / "bad.cfg"
        bad.write_text("set broken profile=custom intent=training\np=2 eps_min=oops\n")
        code, _, err = run(["sets", "validate", str(bad)], capsys)
        assert code == EXIT_VALIDATION
        assert "error[validation]" in err

    def test_missing_profile_for_builtin(self, capsys):
        code, _, err = run(["sets", "expand", "--name", "mCE_Lp"], capsys)
        assert code == EXIT_VALIDATION and "profile" in err


class TestMetrics:
    def make_table(self, path, rate="0.5"):
        lines = ["corruption,severity,rate", "clean,0,0.2"]
        for c in REAL_WORLD_CORRUPTIONS:
            for s in range(1, 6):
                lines.append(f"{c},{s},{rate}")
        path.write_text("\n".join(lines) + "\n")

    def test_constant_table(self, tmp_path, capsys):
        table = tmp_path / "t.csv"
        self.make_table(table)
        code, out, _ = run(["metrics", "--table", str(table)], capsys)
        assert code == 0
        assert "mCE             0.5" in out

    def test_json_fields(self, tmp_path, capsys):
        table = tmp_path / "t.csv"
        self.make_table(table)
        code, out, _ = run(["metrics", "--table", str(table), "--json"], capsys)
        payload = json.loads(out)
        assert payload["mCE"] == 0.5
        assert payload["mCE_xN"] == 0.5
        assert payload["mCE_Lp"] is None
        assert payload["clean_error"] == 0.2
        assert set(payload["per_corruption"]) == set(REAL_WORLD_CORRUPTIONS)

    def test_log_input(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        lines = ["corruption,severity,true,pred", "clean,0,1,1", "clean,0,2,3"]
        lines += ["fog,1,1,1", "fog,1,1,2"]
        log.write_text("\n".join(lines) + "\n")
        code, out, _ = run(["metrics", "--log", str(log), "--json"], capsys)
        payload = json.loads(out)
        assert payload["clean_error"] == 0.5
        assert payload["per_corruption"]["fog"] == 0.5

    def test_missing_file_is_io_error(self, tmp_path, capsys):
        code, _, err = run(["metrics", "--table", str(tmp_path / "nope.csv")], capsys)
        assert code == EXIT_IO and "error[io]" in err


class TestGeometry:
    def test_volume_factor_reference(self, capsys):
        code, out, _ = run(["geometry", "volume-factor", "--d", "3", "--hi", "inf", "--lo", "2"], capsys)
        assert code == 0
        header, row = out.strip().splitlines()
        assert header == "d,p_hi,p_lo,log_factor,factor"
        fields = row.split(",")
        assert fields[:3] == ["3", "inf", "2"]
        assert float(fields[4]) == pytest.approx(1.9099, abs=5e-4)

    def test_overlap_curve_output(self, capsys):
        code, out, err = run(
            [
                "geometry", "overlap", "--d", "8", "--first-p", "2",
                "--eps-grid", "0.5,1.0,2.0", "--second-p", "2", "--second-eps", "1.0",
                "--samples", "200", "--seed", "5",
            ],
            capsys,
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "epsilon,frac_first_in_second,frac_second_in_first,n"
        assert len(lines) == 4
        assert "effective master seed: 5" in err

    def test_mc_volume_json(self, capsys):
        code, out, _ = run(
            ["geometry", "mc-volume", "--d", "2", "--p", "2", "--samples", "20000", "--json"],
            capsys,
        )
        payload = json.loads(out)
        assert abs(payload["estimate"] - math.pi) < 4 * payload["std_error"] + 1e-9

    def test_concentration(self, capsys):
        code, out, _ = run(
            ["geometry", "concentration", "--d", "3072", "--p", "1", "--samples", "500", "--json"],
            capsys,
        )
        payload = json.loads(out)
        assert payload["median"] == pytest.approx(0.5 ** (1 / 3072), abs=5e-4)


class TestSample:
    def test_deterministic_output(self, capsys):
        argv = ["sample", "--p", "2", "--eps", "1", "--d", "16", "--samples", "3", "--seed", "9"]
        _, out1, err1 = run(argv, capsys)
        _, out2, _ = run(argv, capsys)
        assert out1 == out2
        assert "effective master seed: 9" in err1

    def test_l0_text_format(self, capsys):
        code, out, _ = run(["sample", "--p", "0", "--eps", "0.25", "--d", "8", "--seed", "3"], capsys)
        assert code == 0
        pairs = out.strip().split()
        assert len(pairs) == 2  # round(0.25 * 8)
        for pair in pairs:
            idx, value = pair.split(":")
            assert 0 <= int(idx) < 8 and float(value) in (0.0, 1.0)

    def test_set_draw_json(self, capsys):
        argv = [
            "sample", "--set", "C2", "--profile", "cifar", "--d", "12",
            "--seed", "1729", "--group-index", "2", "--json",
        ]
        _, out, _ = run(argv, capsys)
        payload = json.loads(out)
        assert payload["set"] == "C2"
        assert payload["spec"]["p"] in ("0", "2", "inf")
        assert len(payload["samples"]) == 1

    def test_draw_only(self, capsys):
        argv = ["sample", "--set", "C1", "--profile", "tin", "--d", "4", "--draw-only", "--json"]
        _, out, _ = run(argv, capsys)
        payload = json.loads(out)
        assert payload["samples"] == []
        assert "epsilon" in payload["spec"]

    def test_requires_spec_or_set(self, capsys):
        code, _, err = run(["sample", "--d", "4"], capsys)
        assert code == EXIT_VALIDATION

    def test_env_seed_override(self, capsys, monkeypatch):
        monkeypatch.setenv("LPC_SEED", "777")
        _, _, err = run(["sample", "--p", "2", "--eps", "1", "--d", "4"], capsys)
        assert "effective master seed: 777" in err


class TestCorrupt:
    def test_generate_regenerate_verify(self, tmp_path, capsys):
        data = tmp_path / "data"
        make_dataset(data)
        out1 = tmp_path / "out1"
        code, _, err = run(
            ["corrupt", "--input", str(data), "--output", str(out1),
             "--set", "iCE", "--profile", "cifar", "--seed", "11"],
            capsys,
        )
        assert code == 0
        assert "effective master seed: 11" in err
        assert (out1 / "manifest.txt").exists()

        out2 = tmp_path / "out2"
        code, _, _ = run(
            ["corrupt", "--input", str(data), "--output", str(out2),
             "--regenerate", str(out1 / "manifest.txt")],
            capsys,
        )
        assert code == 0
        files1 = sorted(p for p in out1.rglob("*") if p.is_file())
        files2 = sorted(p for p in out2.rglob("*") if p.is_file())
        assert [p.relative_to(out1) for p in files1] == [p.relative_to(out2) for p in files2]
        for a, b in zip(files1, files2):
            assert a.read_bytes() == b.read_bytes()

        code, out, _ = run(
            ["corrupt", "--input", str(data), "--verify", str(out1 / "manifest.txt"),
             "--corrupted", str(out1)],
            capsys,
        )
        assert code == 0
        assert "all distances within budget" in out

    def test_idempotent_reruns(self, tmp_path, capsys):
        data = tmp_path / "data"
        make_dataset(data, n=4)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code, _, _ = run(
                ["corrupt", "--input", str(data), "--output", str(out),
                 "--set", "C3", "--profile", "tin", "--seed", "5", "--threads", "2"],
                capsys,
            )
            assert code == 0
            outs.append(out)
        a, b = outs
        for fa in sorted(p for p in a.rglob("*") if p.is_file()):
            fb = b / fa.relative_to(a)
            assert fa.read_bytes() == fb.read_bytes()

    def test_verify_detects_tampering(self, tmp_path, capsys):
        data = tmp_path / "data"
        make_dataset(data, n=2)
        out = tmp_path / "out"
        run(
            ["corrupt", "--input", str(data), "--output", str(out),
             "--set", "iCE", "--profile", "cifar", "--seed", "3"],
            capsys,
        )
        # corrupt one stored float beyond its budget (s06 is the Linf 0.01 cell)
        archive = next((out / "imperceptible" / "s06").glob("images.lpt"))
        blob = bytearray(archive.read_bytes())
        blob[-4:] = np.float32(0.75).tobytes() if blob[-4:] != np.float32(0.75).tobytes() else np.float32(0.25).tobytes()
        archive.write_bytes(bytes(blob))
        code, out_text, _ = run(
            ["corrupt", "--input", str(data), "--verify", str(out / "manifest.txt"),
             "--corrupted", str(out), "--json"],
            capsys,
        )
        assert code == EXIT_VALIDATION
        payload = json.loads(out_text)
        assert len(payload["violations"]) >= 1

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["corrupt"])
        assert exc.value.code == 2

    def test_missing_set_is_validation_error(self, tmp_path, capsys):
        data = tmp_path / "data"
        make_dataset(data, n=2)
        code, _, err = run(
            ["corrupt", "--input", str(data), "--output", str(tmp_path / "o")], capsys
        )
        assert code == EXIT_VALIDATION and "--set" in err
