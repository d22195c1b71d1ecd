import json

import pytest

from izhifit.cli import main


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


def test_simulate_writes_trace_and_spikes(tmp_path):
    assert main(["--quiet", "--out", str(tmp_path), "simulate", "--pattern", "tonic_spiking"]) == 0
    out = files(tmp_path)
    assert set(out) == {"trace.csv", "spikes.csv"}
    assert out["trace.csv"].startswith(b"time_ms,v_mV\n")


def test_catalog_params_output(tmp_path, capsys):
    assert main(["catalog", "params"]) == 0
    text = capsys.readouterr().out
    assert "tonic_spiking,optimized,0.01877,0.26801,-66.3083,12.4662" in text
    assert main(["--quiet", "--out", str(tmp_path), "catalog", "regions"]) == 0
    assert "possible_count,7,3" in (tmp_path / "catalog_regions.csv").read_text()


def test_classify_trace(tmp_path, capsys):
    main(["--quiet", "--out", str(tmp_path), "simulate", "--pattern", "phasic_spiking"])
    assert main(["classify", str(tmp_path / "trace.csv"), "--pattern", "phasic_spiking"]) == 0
    assert json.loads(capsys.readouterr().out)["pattern"] == "phasic_spiking"


@pytest.mark.parametrize("argv", [
    ["fit", "TARGET", "--pattern", "tonic_spiking", "--generations", "3", "--population", "10"],
    ["synth", "recording", "--duration-s", "1"],
    ["synth", "target", "--pattern", "tonic_spiking"],
])
def test_seeded_commands_are_byte_reproducible(tmp_path, argv):
    target = tmp_path / "target.csv"
    main(["--quiet", "--out", str(tmp_path), "--seed", "5", "synth", "target",
          "--pattern", "tonic_spiking", "--name", "target.csv"])
    runs = []
    for name in ("a", "b"):
        d = tmp_path / name
        args = [str(target) if x == "TARGET" else x for x in argv]
        assert main(["--quiet", "--seed", "7", "--out", str(d)] + args) == 0
        runs.append(files(d))
    assert runs[0] == runs[1] and runs[0]


def test_seed_before_and_after_command_agree(tmp_path):
    main(["--quiet", "--seed", "3", "--out", str(tmp_path / "a"), "synth", "target",
          "--pattern", "tonic_spiking"])
    main(["synth", "target", "--pattern", "tonic_spiking", "--quiet", "--seed", "3",
          "--out", str(tmp_path / "b")])
    assert files(tmp_path / "a") == files(tmp_path / "b")


def test_sort_and_compare(tmp_path):
    assert main(["--quiet", "--out", str(tmp_path), "synth", "recording", "--duration-s", "5"]) == 0
    assert main(["--quiet", "--out", str(tmp_path / "s"), "sort",
                 str(tmp_path / "recording.f32")]) == 0
    summary = json.loads((tmp_path / "s" / "sort_summary.json").read_text())
    assert "cross_correlograms" in summary
    main(["--quiet", "--out", str(tmp_path), "synth", "target", "--pattern", "tonic_spiking",
          "--set", "optimized"])
    assert main(["--quiet", "--out", str(tmp_path / "c"), "compare",
                 str(tmp_path / "target_tonic_spiking.csv"), "--pattern", "tonic_spiking",
                 "--svg"]) == 0
    assert set(files(tmp_path / "c")) == {"compare_tonic_spiking.csv",
                                          "compare_tonic_spiking.json",
                                          "compare_tonic_spiking.svg"}


def test_validation_error_exit_code_and_no_output(tmp_path):
    out = tmp_path / "o"
    assert main(["--quiet", "--out", str(out), "simulate", "--pattern", "tonic_bursting"]) == 2
    assert main(["--quiet", "--out", str(out), "simulate"]) == 2
    assert main(["--quiet", "--out", str(out), "simulate", "--pattern", "nope"]) == 2
    assert main(["--quiet", "--out", str(out), "simulate", "--params", "0.02", "0.2", "-65",
                 "6", "--step", "10", "0", "100", "--dt", "-1"]) == 2
    assert not out.exists()


def test_divergence_exit_code(tmp_path):
    out = tmp_path / "o"
    code = main(["--quiet", "--out", str(out), "simulate", "--params", "0.02", "0.2", "-65", "6",
                 "--step", "1e7", "0", "50"])
    assert code == 3 and not out.exists()


def test_io_error_exit_code(tmp_path):
    assert main(["--quiet", "classify", str(tmp_path / "missing.csv"),
                 "--pattern", "tonic_spiking"]) == 4


def test_config_is_checked(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 1, "sim": {"bogus": 1}}))
    assert main(["--quiet", "--config", str(bad), "catalog"]) == 2
    bad.write_text(json.dumps({"version": 2}))
    assert main(["--quiet", "--config", str(bad), "catalog"]) == 2


def test_shipped_configs_load():
    from pathlib import Path

    from izhifit.cli import load_config
    for path in sorted((Path(__file__).parents[1] / "configs").glob("*.json")):
        assert set(load_config(str(path))) >= {"sim", "ga", "classifier", "sort"}
