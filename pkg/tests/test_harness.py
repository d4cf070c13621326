import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest

from conewave.cli import main
from conewave.harness import (
    EXIT_BLOWUP,
    EXIT_CONFIG,
    EXIT_OK,
    PHASE_COLUMNS,
    PRNG_NAME,
    ConfigError,
    build_model,
    compute_constants,
    format_config,
    initial_data,
    parse_config,
    parse_flat,
    parse_sweep_config,
    run,
    sweep,
)
from conewave.series import CSV_COLUMNS, EnergySeries
from conewave.variational import functional_I

MINIMAL = """\
# smallest useful run
grid.n = 3
grid.Ns = 16
grid.Nx = 4
grid.s_min = -4
model.p = 3
model.m = 2
init.amplitude = 0.5
scheme.t_max = 2
constants.restarts = 8
"""


def config_with(text=MINIMAL, **overrides):
    keys = {k.replace("__", "."): v for k, v in overrides.items()}
    lines = [ln for ln in text.splitlines() if ln.split("=")[0].strip() not in keys]
    lines += [f"{k} = {v}" for k, v in keys.items()]
    return "\n".join(lines) + "\n"


class TestParsing:
    def test_flat_format(self):
        values, lines, errors = parse_flat("a = 1  # c\n\n# only comment\nb.c = x y\n")
        assert values == {"a": "1", "b.c": "x y"} and lines == {"a": 1, "b.c": 4} and not errors

    def test_flat_syntax_errors(self):
        _, _, errors = parse_flat("a = 1\nnonsense\na = 2\n")
        assert errors[0].startswith("line 2") and "duplicate" in errors[1]

    def test_round_trip(self):
        cfg = parse_config(MINIMAL)
        text = format_config(cfg)
        assert parse_config(text) == cfg
        assert format_config(parse_config(text)) == text
        for key in ("grid.n", "model.p", "scheme.cfl_safety", "init.kind", "outputs.record_every"):
            assert f"{key} = " in text

    def test_every_value_echoed(self):
        text = config_with(
            model__gamma=0.01, model__potential="V2", model__g_kind="radial", model__beta=2,
            scheme__dt=0.01, scheme__damping="implicit", init__kind="gaussian-bump",
            init__seed=42, init__noise=1e-3, init__width=0.7, outputs__record_every=3,
        )
        cfg = parse_config(text)
        assert (cfg.gamma, cfg.potential, cfg.g_kind, cfg.beta) == (0.01, "V2", "radial", 2.0)
        assert cfg.scheme.dt == 0.01 and cfg.scheme.damping == "implicit"
        assert (cfg.init_kind, cfg.seed, cfg.noise, cfg.width, cfg.record_every) == ("gaussian-bump", 42, 1e-3, 0.7, 3)
        assert parse_config(format_config(cfg)) == cfg

    def test_R_in_units_of_d(self):
        cfg = parse_config(config_with(model__p=4, model__enforce_hp="false", init__kind="corollary51", init__R="2d"))
        assert cfg.R == ("d", 2.0)
        assert parse_config(format_config(cfg)).R == ("d", 2.0)

    def test_p_below_two(self):
        with pytest.raises(ConfigError) as info:
            parse_config(config_with(model__p=1.5))
        msg = "\n".join(info.value.errors)
        assert "model.p" in msg and "(H_p)" in msg and "2 < p < (2n-2)/(n-2)" in msg

    def test_p_above_range(self):
        with pytest.raises(ConfigError, match="model.p"):
            parse_config(config_with(model__p=4))

    def test_s_min_positive(self):
        with pytest.raises(ConfigError) as info:
            parse_config(config_with(grid__s_min=1.0))
        assert any("grid.s_min" in e and "negative" in e for e in info.value.errors)

    def test_all_errors_with_line_numbers(self):
        text = MINIMAL + "bogus.key = 1\ngrid.Nx = two\n"
        text = text.replace("grid.Nx = 4\n", "").replace("model.m = 2", "model.m = 1")
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        errs = info.value.errors
        assert any(e.startswith("line 10: bogus.key") and "unknown" in e for e in errs)
        assert any(e.startswith("line 11: grid.Nx") for e in errs)
        assert any("model.m" in e and e.startswith("line 6") for e in errs)

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="grid.Ns: required"):
            parse_config(MINIMAL.replace("grid.Ns = 16\n", ""))

    def test_sweep_config(self):
        sc = parse_sweep_config(MINIMAL + "sweep.axis = amplitude\nsweep.values = 0.1, 0.2, 0.5\nsweep.workers = 2\n")
        assert sc.values == (0.1, 0.2, 0.5) and sc.workers == 2 and sc.axis == "amplitude"
        with pytest.raises(ConfigError, match="strictly"):
            parse_sweep_config(MINIMAL + "sweep.axis = amplitude\nsweep.values = 0.2, 0.1\n")
        with pytest.raises(ConfigError, match="sweep.axis"):
            parse_sweep_config(MINIMAL + "sweep.axis = colour\nsweep.values = 1\n")
        with pytest.raises(ConfigError, match="unknown"):
            parse_config(MINIMAL + "sweep.axis = amplitude\n")


class TestInitialData:
    @pytest.mark.parametrize("kind", ["eigenmode", "gaussian-bump", "nehari-scaled"])
    def test_shapes_and_velocity(self, kind):
        cfg = parse_config(config_with(init__kind=kind, init__velocity=0.25, init__profile="gaussian-bump"))
        model = build_model(cfg)
        constants = compute_constants(cfg, model)
        u0, u1 = initial_data(cfg, model, constants)
        assert u0.shape == u1.shape == model.grid.shape
        assert np.array_equal(u1, 0.25 * constants.omega1)

    def test_bump_peak(self):
        cfg = parse_config(config_with(init__kind="gaussian-bump", init__amplitude=2.0, init__width=0.5))
        model = build_model(cfg)
        u0, _ = initial_data(cfg, model, compute_constants(cfg, model))
        k = np.unravel_index(np.argmax(u0), u0.shape)
        assert model.grid.s[k[0]] == pytest.approx(-2.0, abs=model.grid.hs)
        assert u0[k] <= 2.0 and u0[k] > 1.5

    def test_nehari_scaled(self):
        cfg = parse_config(config_with(init__kind="nehari-scaled", init__amplitude=1.0))
        model = build_model(cfg)
        u0, _ = initial_data(cfg, model, compute_constants(cfg, model))
        assert abs(functional_I(u0, model)) < 1e-10

    def test_seeded_noise(self):
        cfg = parse_config(config_with(init__noise=0.1, init__seed=9))
        model = build_model(cfg)
        c = compute_constants(cfg, model)
        a, _ = initial_data(cfg, model, c)
        b, _ = initial_data(cfg, model, c)
        other, _ = initial_data(dataclasses.replace(cfg, seed=10), model, c)
        assert np.array_equal(a, b) and not np.array_equal(a, other)


class TestRun:
    def test_zero_data(self, tmp_path):
        cfg = parse_config(config_with(init__amplitude=0))
        out = run(cfg, tmp_path)
        assert out.classification == "global" and out.exit_code == EXIT_OK
        series = EnergySeries.from_csv(out.series_path.read_text())
        assert np.all(series.column("E") == 0) and np.all(series.column("L2") == 0)

    def test_well_decay(self, tmp_path):
        cfg = parse_config(config_with(scheme__t_max=20, init__amplitude=2.0, outputs__record_every=4))
        out = run(cfg, tmp_path)
        assert out.classification == "global-decay"
        assert float(out.summary["decay.rate"]) > 0
        assert "constants.theta" in out.summary
        assert out.summary["monitor.violations"] == "0"

    def test_summary_matches_series(self, tmp_path):
        out = run(parse_config(MINIMAL), tmp_path)
        text = out.series_path.read_text()
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        first_E = lines[1].split(",")[1]
        summary = dict(ln.split(" = ", 1) for ln in out.summary_path.read_text().splitlines())
        assert summary["E0"] == first_E
        assert summary["prng"] == PRNG_NAME
        series = EnergySeries.from_csv(text)
        assert np.all(np.diff(series.column("t")) > 0)
        assert np.all(np.diff(series.column("damping_integral")) >= 0)
        assert series.to_csv() == text

    def test_blowup_exit_code(self, tmp_path):
        cfg = parse_config(config_with(init__amplitude=40, scheme__t_max=20))
        out = run(cfg, tmp_path)
        assert out.classification == "blow-up" and out.exit_code == EXIT_BLOWUP
        assert math.isfinite(float(out.summary["blowup_time"]))
        assert "subcritical.L0" in out.summary

    def test_determinism(self, tmp_path):
        cfg = parse_config(config_with(init__kind="gaussian-bump", init__noise=0.05, init__seed=3))
        a = run(cfg, tmp_path / "a")
        b = run(cfg, tmp_path / "b")
        assert a.series_path.read_bytes() == b.series_path.read_bytes()
        assert a.summary_path.read_bytes() == b.summary_path.read_bytes()


class TestSweep:
    TEXT = config_with(init__kind="nehari-scaled", scheme__t_max=15) + (
        "sweep.axis = amplitude\nsweep.values = 0.3, 0.8, 1.3, 2.0\n"
    )

    def test_phase_table(self, tmp_path):
        sc = parse_sweep_config(self.TEXT)
        path = sweep(sc, tmp_path)
        rows = path.read_text().splitlines()
        assert rows[0] == ",".join(PHASE_COLUMNS)
        table = [dict(zip(PHASE_COLUMNS, r.split(","))) for r in rows[1:]]
        assert len(table) == 4
        assert table[0]["classification"].startswith("global")
        assert table[-1]["classification"] == "blow-up"
        assert all(r["consistent"] == "true" for r in table if r["resolved"] == "true")
        for k in range(4):
            assert (tmp_path / f"run_{k:03d}" / "series.csv").exists()

    def test_parallel_matches_serial(self, tmp_path):
        sc = parse_sweep_config(self.TEXT)
        a = sweep(sc, tmp_path / "serial")
        b = sweep(dataclasses.replace(sc, workers=2), tmp_path / "parallel")
        assert a.read_bytes() == b.read_bytes()
        for k in range(4):
            name = f"run_{k:03d}/series.csv"
            assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "parallel" / name).read_bytes()


class TestCli:
    def test_constants(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(MINIMAL)
        assert main(["constants", "--config", str(cfg)]) == EXIT_OK
        out = dict(ln.split(" = ") for ln in capsys.readouterr().out.splitlines())
        assert {"lambda1", "d"} <= set(out)
        assert float(out["d"]) > 0

    def test_run_and_seed(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(config_with(init__noise=0.01))
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "7"]) == EXIT_OK
        summary = (tmp_path / "o" / "summary.txt").read_text()
        assert "seed = 7\n" in summary

    def test_blowup_code(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(config_with(init__amplitude=40, scheme__t_max=20))
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_BLOWUP

    def test_config_error(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(config_with(model__p=1.5))
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
        assert "model.p" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "absent.cfg")]) == EXIT_CONFIG

    def test_sweep(self, tmp_path, capsys):
        cfg = tmp_path / "s.cfg"
        cfg.write_text(config_with(scheme__t_max=1) + "sweep.axis = amplitude\nsweep.values = 0.1, 0.2\n")
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
        assert Path(capsys.readouterr().out.strip()).name == "phase.csv"

    @pytest.mark.parametrize("name", ["well_decay", "negative_energy", "high_energy", "amplitude_sweep"])
    def test_demo_configs_parse(self, name):
        path = Path(__file__).parents[1] / "demos" / "configs" / f"{name}.cfg"
        text = path.read_text()
        (parse_sweep_config if "sweep.axis" in text else parse_config)(text)
