import math
import re
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidac import cli
from tidac.errors import AnalysisError, RunError, ScenarioError
from tidac.harness.mismatch import gen_edges, gen_mismatch, resolve_spread, split_edges
from tidac.harness.runner import fmt, run_scenario, sweep_scenario, write_sweep
from tidac.harness.scenario import (
    MismatchSpec,
    ShapeSpec,
    dump_scenario,
    load_scenario,
    parse_scenario,
)

SMALL = """\
[scenario]
name = small
description = quick check

[modulator]
order = 2
osr = 16
bits = {bits}

[dac]
paths = 4

[mismatch]
distribution = uniform
range = 0.09
seed = 3

[input]
amplitude_dbfs = -6
bin = 17

[analysis]
samples = 4096
sweep = -40, -20, -6

[case ideal]
mode = phase-assigned
mismatch = off

[case dem]
mode = {mode}
mismatch = on
"""


def small(bits=1, mode="dwa"):
    return SMALL.format(bits=bits, mode=mode)


class TestMismatch:
    def test_range_to_std(self):
        assert resolve_spread("uniform", 0.09)[1] == pytest.approx(0.05196, abs=1e-5)
        assert resolve_spread("uniform", 0.07)[1] == pytest.approx(0.0404, abs=1e-4)
        assert resolve_spread("uniform", None, 0.04)[0] == pytest.approx(0.04 * math.sqrt(3))

    def test_consistent_pair_accepted(self):
        assert resolve_spread("uniform", 0.09, 0.052)[0] == 0.09

    def test_inconsistent_pair_rejected(self):
        with pytest.raises(ScenarioError, match="inconsistent"):
            resolve_spread("uniform", 0.09, 0.04)

    def test_sample_statistics(self):
        spec = MismatchSpec(distribution="uniform", range=0.09)
        p = gen_mismatch(7, spec, 20000)
        g = np.array([e.gain for e in p]) - 1
        assert g.std() == pytest.approx(0.09 / math.sqrt(3), rel=0.02)
        assert np.abs(g).max() <= 0.09

    def test_deterministic(self):
        spec = MismatchSpec(distribution="uniform", range=0.07)
        assert gen_mismatch(5, spec, 28) == gen_mismatch(5, spec, 28)
        assert gen_mismatch(5, spec, 28) != gen_mismatch(6, spec, 28)

    def test_pinned_values(self):
        # PCG64 is platform independent; this pins the stream layout
        spec = MismatchSpec(distribution="uniform", range=0.09)
        rng = np.random.Generator(np.random.PCG64([1, 0]))
        d = rng.uniform(-0.09, 0.09, size=(4, 2))
        got = gen_mismatch(1, spec, 4)
        assert [e.gain for e in got] == (1 + d[:, 0]).tolist()
        assert [e.offset for e in got] == d[:, 1].tolist()

    @settings(max_examples=20)
    @given(st.integers(0, 2 ** 31), st.integers(1, 30))
    def test_prefix_property(self, seed, k):
        spec = MismatchSpec(distribution="uniform", range=0.07)
        assert gen_mismatch(seed, spec, 30)[:k] == gen_mismatch(seed, spec, k)

    def test_explicit_vectors_bypass_draw(self):
        spec = MismatchSpec(gains=(1.07, 0.93), offsets=(0.05, -0.01))
        p = gen_mismatch(99, spec, 2)
        assert [(e.gain, e.offset) for e in p] == [(1.07, 0.05), (0.93, -0.01)]

    def test_apply_subset(self):
        spec = MismatchSpec(distribution="uniform", range=0.07, apply=("gain",))
        assert all(e.offset == 0.0 for e in gen_mismatch(1, spec, 8))

    def test_edges(self):
        spec = ShapeSpec(kind="slew", slew_rate=1.5, tau=0.5, std=0.05, seed=2)
        e4 = gen_edges(spec, 4)
        e5 = gen_edges(spec, 5)
        assert e5[:4] == e4
        arr = np.array(gen_edges(spec, 5000))
        assert (arr[:, 0] / 0.5 - 1).std() == pytest.approx(0.05, rel=0.05)
        assert split_edges(spec) == (0.5, 0.5 * 1.05, 1.5, 1.5 * 1.05)

    def test_edges_in_seconds(self):
        spec = ShapeSpec(kind="slew", slew_rate=1.5, tau=0.5)
        assert gen_edges(spec, 1, v_s=2.0, f_high=1e9)[0] == (0.5e-9, 0.5e-9, 3e9, 3e9)


class TestScenarioFile:
    def test_round_trip(self):
        s = parse_scenario(small(), "small.scenario")
        text = dump_scenario(s)
        again = parse_scenario(text, "dump")
        assert dump_scenario(again) == text
        assert again.cases == s.cases

    def test_bundled_round_trip(self):
        for name, text in cli.bundled_scenarios().items():
            s = parse_scenario(text, name)
            assert dump_scenario(parse_scenario(dump_scenario(s))) == dump_scenario(s)

    def test_comments_and_blank_lines(self):
        s = parse_scenario("# header\n\n" + small().replace("bin = 17", "bin = 17  # tone"))
        assert s.input.bin == 17

    @pytest.mark.parametrize("edit,line,msg", [
        (("bits = 1", "bits = 1\nbits = 2"), 9, "duplicate key"),
        (("order = 2", "ordr = 2"), 6, "unknown key"),
        (("bin = 17", "bin = 200"), 20, "outside the signal band"),
        (("osr = 16", "osr = sixteen"), 7, "bad value"),
        (("mode = dwa", "mode = shuffle"), 31, "unknown mode"),
        (("[dac]", "[dacs]"), 10, "unknown section"),
        (("paths = 4", "paths 4"), 11, "expected 'key = value'"),
    ])
    def test_errors_carry_line(self, edit, line, msg):
        text = small().replace(*edit)
        with pytest.raises(ScenarioError, match=msg) as info:
            parse_scenario(text, "bad.scenario")
        assert info.value.path == "bad.scenario"
        assert info.value.line == line

    def test_multibit_dwa_needs_bits(self):
        with pytest.raises(ScenarioError, match="multibit-dwa requires bits >= 2") as info:
            parse_scenario(small(1, "multibit-dwa"), "m.scenario")
        assert info.value.line == 31

    def test_rz_needs_single_bit(self):
        with pytest.raises(ScenarioError, match="rz requires bits = 1"):
            parse_scenario(small(3, "rz"))

    def test_inconsistent_spread(self):
        text = small().replace("range = 0.09", "range = 0.09\nstd = 0.02")
        with pytest.raises(ScenarioError, match="inconsistent"):
            parse_scenario(text)

    def test_explicit_vector_too_short(self):
        text = small().replace("seed = 3", "seed = 3\ngains = 1.0, 1.0")
        with pytest.raises(ScenarioError, match="gains lists 2 values"):
            parse_scenario(text)

    def test_overrides_revalidate(self):
        s = parse_scenario(small())
        assert s.with_overrides(seed=9).mismatch.seed == 9
        with pytest.raises(ScenarioError):
            s.with_overrides(samples=512)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="cannot read"):
            load_scenario(tmp_path / "none.scenario")


def read_all(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


class TestRunner:
    def test_outputs(self, tmp_path):
        s = parse_scenario(small(), "small.scenario")
        report = run_scenario(s, tmp_path)
        names = sorted(p.name for p in report.files)
        assert names == ["small_dem_psd.csv", "small_ideal_psd.csv", "small_manifest.txt",
                         "small_metrics.csv"]
        psd_lines = (tmp_path / "small_ideal_psd.csv").read_text().splitlines()
        assert psd_lines[0] == "frequency,psd_db"
        assert len(psd_lines) == 1 + 4096 // 2 + 1
        metrics = (tmp_path / "small_metrics.csv").read_bytes()
        assert b"\r" not in metrics
        rows = metrics.decode().splitlines()
        assert rows[0].startswith("case,mode,elements,sndr_db")
        assert rows[1].startswith("ideal,phase-assigned,4,")

    def test_byte_identical(self, tmp_path):
        s = parse_scenario(small(), "small.scenario")
        run_scenario(s, tmp_path / "a")
        run_scenario(s, tmp_path / "b")
        assert read_all(tmp_path / "a") == read_all(tmp_path / "b")

    def test_seed_changes_output(self, tmp_path):
        s = parse_scenario(small(), "small.scenario")
        run_scenario(s, tmp_path / "a")
        run_scenario(s.with_overrides(seed=4), tmp_path / "b")
        a, b = read_all(tmp_path / "a"), read_all(tmp_path / "b")
        assert a["small_ideal_psd.csv"] == b["small_ideal_psd.csv"]
        assert a["small_dem_psd.csv"] != b["small_dem_psd.csv"]

    def test_manifest_recovers_draws(self, tmp_path):
        s = parse_scenario(small(), "small.scenario")
        run_scenario(s, tmp_path)
        text = (tmp_path / "small_manifest.txt").read_text()
        expect = gen_mismatch(3, s.mismatch, 4)
        for i, e in enumerate(expect):
            line = next(ln for ln in text.splitlines()
                        if ln.startswith(f"e{i} = ") and "gain=1.0," not in ln)
            got = dict(kv.split("=") for kv in line.split(" = ", 1)[1].split(", "))
            assert float(got["gain"]) == e.gain
            assert float(got["offset"]) == e.offset
        # the manifest is itself a loadable scenario up to the resolved sections
        head = text.split("\n[resolved]")[0]
        assert dump_scenario(parse_scenario(head)) == dump_scenario(s)

    def test_csv_number_format(self):
        assert fmt(1 / 3) == "0.333333333333"
        assert fmt(-1e-20) == "-1e-20"
        assert fmt(None) == ""

    def test_sweep_rows(self, tmp_path):
        s = parse_scenario(small(), "small.scenario")
        path, curves = write_sweep(s, tmp_path)
        lines = path.read_text().splitlines()
        assert lines[0] == "amplitude_dbfs,ideal_sndr_db,dem_sndr_db"
        assert len(lines) == 1 + 3
        assert [a for a, _ in curves["ideal"]] == [-40.0, -20.0, -6.0]

    def test_sweep_workers_independent(self):
        s = parse_scenario(small(), "small.scenario")
        assert sweep_scenario(s, workers=1) == sweep_scenario(s, workers=3)

    def test_dem_transparent_end_to_end(self):
        s = parse_scenario(small(), "small.scenario")
        s.cases[1] = replace(s.cases[1], mismatch=False)
        curves = sweep_scenario(s)
        for (_, a), (_, b) in zip(curves["ideal"], curves["dem"]):
            assert abs(a - b) <= 0.1

    def test_run_error_has_context(self, tmp_path, monkeypatch):
        from tidac.harness import runner

        def broken(*args, **kwargs):
            raise AnalysisError("signal contains non-finite samples")
        monkeypatch.setattr(runner, "psd", broken)
        s = parse_scenario(small(), "small.scenario")
        with pytest.raises(RunError, match=r"small.scenario: case ideal: AnalysisError"):
            run_scenario(s, tmp_path)


class TestCli:
    def test_list(self, capsys):
        assert cli.main(["list-scenarios"]) == 0
        names = [ln.split("\t")[0] for ln in capsys.readouterr().out.splitlines()]
        assert names == ["fig10", "fig11", "fig15"]

    def test_validate(self, tmp_path, capsys):
        f = tmp_path / "s.scenario"
        f.write_text(small())
        assert cli.main(["validate", str(f)]) == 0
        assert capsys.readouterr().out.startswith("ok\t")

    def test_validate_rejects_multibit_dwa_single_bit(self, tmp_path, capsys):
        f = tmp_path / "s.scenario"
        f.write_text(small(1, "multibit-dwa"))
        assert cli.main(["validate", str(f)]) == 2
        err = capsys.readouterr().err
        assert err.count("\n") == 1
        assert re.match(rf"tidac: error: scenario: {re.escape(str(f))}:31: ", err)

    def test_unknown_flag(self, capsys):
        assert cli.main(["run", "fig10", "--sed", "1"]) == 2
        err = capsys.readouterr().err
        assert err.startswith("tidac: error: usage:") and err.count("\n") == 1

    def test_missing_file(self, capsys):
        assert cli.main(["run", "nowhere/x.scenario"]) == 2
        assert "nowhere/x.scenario" in capsys.readouterr().err

    def test_run_with_env_out_dir(self, tmp_path, monkeypatch, capsys):
        f = tmp_path / "s.scenario"
        f.write_text(small())
        monkeypatch.setenv("TIDAC_OUT_DIR", str(tmp_path / "env"))
        assert cli.main(["run", str(f), "--seed", "1"]) == 0
        assert (tmp_path / "env" / "small_metrics.csv").exists()
        assert cli.main(["run", str(f), "--out-dir", str(tmp_path / "flag")]) == 0
        assert (tmp_path / "flag" / "small_metrics.csv").exists()
        capsys.readouterr()

    def test_sweep(self, tmp_path, capsys):
        f = tmp_path / "s.scenario"
        f.write_text(small())
        assert cli.main(["sweep", str(f), "--out-dir", str(tmp_path), "--workers", "2"]) == 0
        assert len((tmp_path / "small_sweep.csv").read_text().splitlines()) == 4
        capsys.readouterr()

    def test_bundled_fig10_deterministic(self, tmp_path, capsys):
        for d in ("a", "b"):
            assert cli.main(["run", "fig10", "--seed", "1", "--out-dir", str(tmp_path / d)]) == 0
        assert read_all(tmp_path / "a") == read_all(tmp_path / "b")
        out = capsys.readouterr().out
        assert "fig10\tideal\tphase-assigned" in out
