import json
from pathlib import Path

import pytest
from django.test import override_settings

from quantamimo import cli, status
from quantamimo.channel import GeometryConfig
from quantamimo.config import PERFECT, SimConfig
from quantamimo.exceptions import InvalidConfig
from quantamimo.experiments import SweepResult, SweepRow, Variant
from quantamimo.rate_mc import RateEstimate

TINY = """\
antennas = 4
users = 1
coherence = 20
constellation = "qpsk"
pilots_per_user = 1
channel_realizations = 1
noise_trials = 50
grid_bins = 8
snrs_db = [0, 10]
"""


def write_config(tmp_path, text, name="config.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_empty_config_gives_defaults(tmp_path):
    parsed = cli.parse_config(write_config(tmp_path, ""))
    sim = parsed.sim
    assert (sim.antennas, sim.users, sim.coherence) == (200, 10, 1142)
    assert parsed.variants == (Variant(1, "zf", "16qam"),)
    assert parsed.sweep.drops == 1000
    assert parsed.geometry.cell_radius_m == 335.0


def test_documented_example_holds_the_defaults():
    path = Path(__file__).resolve().parents[2] / "docs" / "example.toml"
    parsed = cli.parse_config(path)
    assert parsed.sim == SimConfig()
    assert parsed.geometry == GeometryConfig()
    assert parsed.sweep == cli.SweepSpec()


def test_parse_pilots_per_user(tmp_path):
    parsed = cli.parse_config(write_config(tmp_path, "pilots_per_user = 3\n"))
    assert parsed.sim.pilot_count == 30
    parsed = cli.parse_config(write_config(tmp_path, 'pilots_per_user = "optimize"\n'))
    assert parsed.sim.optimize_pilots


def test_parse_variant_lists(tmp_path):
    text = 'bits = [0, 1]\ndetector = ["mrc", "zf"]\nconstellation = 64\n'
    parsed = cli.parse_config(write_config(tmp_path, text))
    assert parsed.variants == (
        Variant(0, "mrc", "64qam"),
        Variant(1, "mrc", "64qam"),
        Variant(0, "zf", "64qam"),
        Variant(1, "zf", "64qam"),
    )
    assert parsed.sim.bits == 0
    assert parsed.sim.detector == "mrc"


def test_parse_powers_and_geometry(tmp_path):
    text = "users = 2\npowers_db = [0, 10]\ncell_radius_m = 500.0\n"
    parsed = cli.parse_config(write_config(tmp_path, text))
    assert parsed.sim.powers == pytest.approx((1.0, 10.0))
    assert parsed.geometry.cell_radius_m == 500.0


@pytest.mark.parametrize(
    "text, key, line",
    [
        ("antennas = 64\nbits = -1\n", "bits", 2),
        ("\n\nfrequency = 2.4\n", "frequency", 3),
        ('antennas = "many"\n', "antennas", 1),
        ("dither = 1\n", "dither", 1),
        ("bits = [1, 2.5]\n", "bits", 1),
        ('pilots_per_user = "auto"\n', "pilots_per_user", 1),
        ("users = 2\npowers_db = [0.0]\n", "powers_db", 2),
        ('constellation = "8psk"\n', "constellation", 1),
        ('scenario = "urban"\n', "scenario", 1),
        ("antennas_list = [2, 200]\n", "antennas_list", 1),
        ("drops = 0\n", "drops", 1),
        ("csi = [\"estimated\", \"partial\"]\n", "csi", 1),
        ("min_distance_m = 400.0\n", "min_distance_m", 1),
        ("[geometry]\ncell_radius_m = 1.0\n", "geometry", None),
    ],
)
def test_parse_rejections_name_key_and_line(tmp_path, text, key, line):
    with pytest.raises(InvalidConfig) as e_info:
        cli.parse_config(write_config(tmp_path, text))
    assert e_info.value.key == key
    assert e_info.value.line == line
    assert key in str(e_info.value)


def test_parse_malformed_toml_reports_line(tmp_path):
    with pytest.raises(InvalidConfig) as e_info:
        cli.parse_config(write_config(tmp_path, "users = 2\nbits = = 1\n"))
    assert e_info.value.line == 2


def test_parse_overrides(tmp_path):
    parsed = cli.parse_config(write_config(tmp_path, "seed = 1\n"), {"seed": 7})
    assert parsed.sim.seed == 7
    assert parsed.mapping == {"seed": 7}


def sweep_result(with_approx=False):
    variant = Variant(1, "zf", "qpsk")
    twin = Variant(0, "zf", "qpsk", PERFECT)
    rows = [
        SweepRow(
            sweep_value=value,
            variant=v,
            estimate=RateEstimate(1.23456789 * (i + 1), 0.0123456789, 10, (300, 3000)),
            seed=0,
            approx=(
                RateEstimate(1.0 / 3.0, 0.1 + 0.2, 20, (30, 400))
                if with_approx and i == 0
                else None
            ),
        )
        for value in (-10.0, 0.5)
        for i, v in enumerate((variant, twin))
    ]
    return SweepResult("snr_db", (-10.0, 0.5), rows)


def test_emit_csv_format(tmp_path):
    path = cli.emit_csv(sweep_result(), tmp_path / "results.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(cli.CSV_COLUMNS)
    assert lines[1] == (
        "snr_db,-10.0,1,zf,qpsk,1.23456789,0.0123456789,10,0,estimated,300,3000"
    )
    assert lines[2].split(",")[9] == PERFECT
    assert len(lines) == 5


def test_emit_csv_empty_sweep_is_header_only(tmp_path):
    path = cli.emit_csv(SweepResult("snr_db", (), []), tmp_path / "results.csv")
    assert path.read_text(encoding="utf-8") == ",".join(cli.CSV_COLUMNS) + "\n"


def test_emit_csv_with_approximation(tmp_path):
    path = cli.emit_csv(sweep_result(with_approx=True), tmp_path / "results.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    assert header == cli.CSV_COLUMNS + cli.APPROX_COLUMNS
    assert lines[1].split(",")[-5:] == [
        repr(1.0 / 3.0),
        repr(0.1 + 0.2),
        "20",
        "30",
        "400",
    ]
    assert lines[2].split(",")[-5:] == [""] * 5


def test_csv_round_trip(tmp_path):
    result = sweep_result(with_approx=True)
    first = cli.emit_csv(result, tmp_path / "a.csv")
    parsed = cli.read_csv(first)
    assert parsed == result
    assert parsed.rows[0].approx.rate == 1.0 / 3.0
    assert parsed.rows[0].approx.trials == (30, 400)
    assert parsed.rows[1].approx is None
    second = cli.emit_csv(parsed, tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()


@pytest.mark.parametrize(
    "value", [1e-300, 5e-324, 123456789.123456789, -0.0, 2.0 ** 0.5, 7.0]
)
def test_csv_keeps_every_float_digit(tmp_path, value):
    row = SweepRow(
        sweep_value=value,
        variant=Variant(1, "mrc", "16qam"),
        estimate=RateEstimate(value, abs(value), 1, (1, 1)),
        seed=3,
    )
    result = SweepResult("snr_db", (value,), [row])
    parsed = cli.read_csv(cli.emit_csv(result, tmp_path / "results.csv"))
    assert parsed == result
    assert repr(parsed.rows[0].estimate.rate) == repr(value)


def test_csv_round_trip_of_empty_sweep(tmp_path):
    path = cli.emit_csv(SweepResult("snr_db", (), []), tmp_path / "results.csv")
    assert cli.read_csv(path).rows == []


def test_run_quantizer_table(tmp_path):
    config = write_config(tmp_path, "quantizer_bits = [1, 2]\n")
    out = tmp_path / "out"
    assert cli.run("quantizer-table", config, out) == status.EXIT_OK
    lines = (out / "results.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "bits,variance,kind,index,value"
    values = {}
    for line in lines[1:]:
        bits, _, kind, index, value = line.split(",")
        values[(int(bits), kind, int(index))] = float(value)
    assert values[(1, "label", 0)] == pytest.approx(-0.797885, abs=1e-6)
    assert values[(1, "threshold", 0)] == pytest.approx(0.0, abs=1e-6)
    assert values[(2, "label", 3)] == pytest.approx(1.5104, abs=1e-3)
    assert values[(2, "distortion", 0)] == pytest.approx(0.1175, abs=1e-3)
    assert (out / "plot.svg").exists()
    manifest = json.loads((out / "run_manifest.json").read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "quantizer-table"
    assert str(out / "results.csv") in manifest["outputs"]


def test_run_sweep_snr_and_replay_manifest(tmp_path):
    config = write_config(tmp_path, TINY)
    first, second = tmp_path / "first", tmp_path / "second"
    assert cli.run("sweep-snr", config, first, plot=False) == status.EXIT_OK
    assert not (first / "plot.svg").exists()

    manifest = cli.RunManifest.read(first / "run_manifest.json")
    assert manifest.seed == 0
    assert len(manifest.point_wall_times) == 2
    assert manifest.config["snrs_db"] == [0, 10]

    manifest_path = first / "run_manifest.json"
    code = cli.run("sweep-snr", out_dir=second, manifest_path=manifest_path)
    assert code == status.EXIT_OK
    assert (first / "results.csv").read_bytes() == (second / "results.csv").read_bytes()
    assert (second / "plot.svg").exists()


def test_run_seed_override_is_recorded(tmp_path):
    config = write_config(tmp_path, TINY)
    out = tmp_path / "out"
    assert cli.run("sweep-snr", config, out, seed=5, plot=False) == status.EXIT_OK
    manifest = cli.RunManifest.read(out / "run_manifest.json")
    assert manifest.seed == 5
    assert manifest.config["seed"] == 5
    rows = cli.read_csv(out / "results.csv").rows
    assert {row.seed for row in rows} == {5}


@override_settings(QUANTAMIMO={"PROFILES": {"tiny": {"noise_trials": 60}}})
def test_run_profile_overrides_trials(tmp_path):
    config = write_config(tmp_path, TINY)
    out = tmp_path / "out"
    assert cli.run("sweep-snr", config, out, profile="tiny", plot=False) == 0
    rows = cli.read_csv(out / "results.csv").rows
    assert {row.estimate.trials for row in rows} == {(1, 60)}
    assert cli.RunManifest.read(out / "run_manifest.json").profile == "tiny"


@pytest.mark.parametrize(
    "name, extra, sweep_var",
    [
        ("sweep-n", "antennas_list = [2, 4]\n", "antennas"),
        ("sweep-t", "coherence_list = [2, 20]\n", "coherence"),
        ("sweep-sir", "users = 2\nsirs_db = [0, -10]\n", "sir_db"),
        ("drops", "users = 2\nspreads_m = [0, 50]\ndrops = 2\n", "spread_m"),
    ],
)
def test_run_sweeps(tmp_path, name, extra, sweep_var):
    text = TINY.replace("users = 1\n", "") if "users" in extra else TINY
    config = write_config(tmp_path, text + extra)
    out = tmp_path / "out"
    assert cli.run(name, config, out, plot=False) == status.EXIT_OK
    result = cli.read_csv(out / "results.csv")
    assert result.sweep_var == sweep_var
    assert len(result.values) == 2


def test_run_sweep_sir_pilot_budget(tmp_path):
    text = TINY.replace("users = 1\n", "users = 2\n") + "sirs_db = [0]\n"
    out = tmp_path / "out"
    assert cli.run("sweep-sir", write_config(tmp_path, text), out, plot=False) == 0
    assert cli.read_csv(out / "results.csv").rows[0].estimate.pilots_used == 10

    text += "sir_pilots = 4\n"
    out = tmp_path / "budget"
    assert cli.run("sweep-sir", write_config(tmp_path, text), out, plot=False) == 0
    assert cli.read_csv(out / "results.csv").rows[0].estimate.pilots_used == 4


def test_run_scatter(tmp_path):
    text = TINY + 'scenario = ["iid", "nonfading+dither"]\nscatter_symbols = 32\n'
    out = tmp_path / "out"
    assert cli.run("scatter", write_config(tmp_path, text), out) == status.EXIT_OK
    lines = (out / "results.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(cli.SCATTER_COLUMNS)
    assert len(lines) == 1 + 2 * 32
    assert (out / "scatter_1_iid.svg").exists()
    assert (out / "scatter_2_nonfading_dither.svg").exists()


def test_reference_scatter_panels(tmp_path):
    parsed = cli.parse_config(write_config(tmp_path, ""))
    panels = cli.scatter_panels(parsed)
    assert len(panels) == 6
    assert panels[0] == (1, 20, 0.0, "iid")
    assert panels[-1] == (6, 200, 20.0, "nonfading+dither")
    config = cli._scatter_config(parsed, 1, 20, 0.0)
    assert (config.users, config.antennas, config.pilot_count) == (1, 20, 20)


def test_run_invalid_config(tmp_path, capsys):
    config = write_config(tmp_path, "antennas = 64\nbits = -1\n")
    code = cli.run("sweep-snr", config, tmp_path / "out")
    assert code == status.EXIT_INVALID_CONFIG
    err = capsys.readouterr().err.strip()
    assert err.startswith("quantamimo: error: ")
    assert '"bits"' in err and "line 2" in err
    assert "\n" not in err


def test_run_missing_config(tmp_path, capsys):
    code = cli.run("sweep-snr", tmp_path / "missing.toml", tmp_path / "out")
    assert code == status.EXIT_IO_FAILURE
    assert "missing.toml" in capsys.readouterr().err


def test_run_usage_errors(tmp_path):
    config = write_config(tmp_path, TINY)
    assert cli.run("sweep-x", config, tmp_path) == status.EXIT_USAGE
    assert cli.run("sweep-snr", None, tmp_path) == status.EXIT_USAGE
    assert cli.run("sweep-snr", config, tmp_path, profile="nope") == status.EXIT_USAGE


def test_run_unexpected_error(tmp_path, capsys, caplog, mocker):
    mocker.patch.object(cli.experiments, "sweep_snr", side_effect=KeyError("lost"))
    config = write_config(tmp_path, TINY)
    with caplog.at_level("ERROR", logger="quantamimo.cli"):
        code = cli.run("sweep-snr", config, tmp_path / "out", plot=False)
    assert code == status.EXIT_INTERNAL_ERROR
    err = capsys.readouterr().err.strip()
    assert err == "quantamimo: error: internal error: KeyError: 'lost'"
    assert "Unexpected failure in subcommand sweep-snr" in caplog.text
    assert "Traceback" in caplog.text


def test_run_manifest_for_another_subcommand(tmp_path):
    out = tmp_path / "out"
    cli.run("quantizer-table", write_config(tmp_path, ""), out, plot=False)
    code = cli.run(
        "sweep-snr", out_dir=tmp_path / "b", manifest_path=out / "run_manifest.json"
    )
    assert code == status.EXIT_INVALID_CONFIG


def test_manifest_rejects_unknown_fields(tmp_path):
    path = tmp_path / "run_manifest.json"
    path.write_text('{"subcommand": "drops", "config": {}, "seed": 0, "x": 1}')
    with pytest.raises(InvalidConfig):
        cli.RunManifest.read(path)
    path.write_text("{not json")
    with pytest.raises(InvalidConfig):
        cli.RunManifest.read(path)


def test_main(tmp_path):
    config = write_config(tmp_path, "quantizer_bits = [1]\n")
    argv = ["quantizer-table", "--config", str(config), "--out", str(tmp_path / "o")]
    assert cli.main(argv + ["--no-plot", "--no-progress"]) == status.EXIT_OK
    assert (tmp_path / "o" / "results.csv").exists()


def test_main_usage_error():
    with pytest.raises(SystemExit) as e_info:
        cli.main(["sweep-snr"])
    assert e_info.value.code == status.EXIT_USAGE
