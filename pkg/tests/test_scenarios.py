import numpy as np
import pytest
import yaml

from wiredyn.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from wiredyn.io import read_csv, read_yaml, write_yaml
from wiredyn.scenarios import (ConfigError, apply_overrides, load_config, resolve_config, run)


def small_switch(tmp_path, **extra):
    cfg = {
        "incident": {"energy_meV": 54},
        "barrier": {"length_nm": 2},
        "grid": {"pad_nm": 20, "margin_nm": 5},
        "run": {"t_end_fs": 30, "density_stride_fs": 5},
        "output": {"directory": str(tmp_path / "switch")},
    }
    for section, block in extra.items():
        cfg.setdefault(section, {}).update(block)
    return cfg


def small_pulse(tmp_path):
    return {
        "incident": {"energy_meV": [50, 54]},
        "pulse": {"length_nm": 10},
        "run": {"t_end_fs": 60, "density_stride_fs": 5},
        "superpose": {"weights": [0.5, 0.5]},
        "output": {"directory": str(tmp_path / "pulse")},
    }


class TestConfig:
    def test_defaults_filled(self):
        cfg = resolve_config({"barrier": {}})
        assert cfg["excitation"] == "barrier"
        assert cfg["grid"]["spacing_nm"] == 0.05
        assert cfg["incident"]["energy_meV"] == [54.0]
        assert "pulse" not in cfg

    @pytest.mark.parametrize("raw, match", [
        ({"barrier": {}, "bogus": {}}, "unknown section"),
        ({"barrier": {"height": 1}}, "unknown key"),
        ({}, "exactly one excitation"),
        ({"barrier": {}, "pulse": {}}, "exactly one excitation"),
        ({"pulse": {}, "switch": {}}, "only applies"),
        ({"barrier": {"shape": "square"}}, "not one of"),
        ({"barrier": {}, "incident": {"energy_meV": -1}}, "positive"),
        ({"barrier": {"target_T": 1.5}}, "target_T"),
        ({"pulse": {}, "run": {"workers": 1.5}}, "integer"),
        ({"pulse": {}, "superpose": {"weights": [1, 2]}}, "weights"),
        ({"pulse": {"uniform": "yes"}}, "true or false"),
        ([1, 2], "mapping"),
    ])
    def test_rejections(self, raw, match):
        with pytest.raises(ConfigError, match=match):
            resolve_config(raw)

    def test_overrides(self):
        raw = apply_overrides({"barrier": {}}, ["incident.energy_meV=[27, 108]", "grid.spacing_nm=0.1"])
        cfg = resolve_config(raw)
        assert cfg["incident"]["energy_meV"] == [27.0, 108.0]
        assert cfg["grid"]["spacing_nm"] == 0.1
        with pytest.raises(ConfigError):
            apply_overrides({}, ["gridspacing=1"])
        with pytest.raises(ConfigError):
            apply_overrides({}, ["grid.spacing_nm"])

    def test_verb_supplies_block(self):
        assert load_config(None, (), "pulse")["excitation"] == "pulse"
        assert load_config(None, (), "calibrate")["excitation"] == "barrier"

    def test_manifest_section_ignored(self, tmp_path):
        cfg = resolve_config({"pulse": {}})
        doc = dict(cfg, manifest={"verb": "pulse"})
        path = write_yaml(tmp_path / "m.yaml", doc)
        assert load_config(path) == cfg

    @pytest.mark.parametrize("path", ["switch_on", "switch_energy_scan", "gate_pulse", "pulse",
                                      "pulse_length_scan", "pulse_energy_scan", "superpose",
                                      "rect_barrier"])
    def test_presets_validate(self, path):
        from pathlib import Path
        cfg = load_config(Path(__file__).parents[1] / "configs" / f"{path}.yaml")
        assert cfg["excitation"] in ("barrier", "pulse")


class TestRuns:
    def test_calibrate(self, tmp_path):
        cfg = resolve_config(small_switch(tmp_path, incident={"energy_meV": [27, 108]}))
        res = run("calibrate", cfg)
        header, data = read_csv(res.directory / "calibration.csv")
        assert header == ["energy_eV", "lattice_energy_eV", "phi_max_V", "T"]
        np.testing.assert_allclose(data[:, 3], 0.5, atol=1e-6)
        assert data[0, 2] < data[1, 2]

    def test_calibrate_rejects_fixed_height(self, tmp_path):
        cfg = resolve_config(small_switch(tmp_path, barrier={"phi_max_V": 0.05}))
        with pytest.raises(ConfigError):
            run("calibrate", cfg)

    def test_static_scan(self, tmp_path):
        cfg = resolve_config({"barrier": {"phi_max_V": 0.06, "length_nm": 10, "shape": "rect"},
                              "static": {"points": 20},
                              "output": {"directory": str(tmp_path)}})
        res = run("static-scan", cfg)
        _, data = read_csv(res.directory / "transmission.csv")
        assert data.shape == (20, 2)
        assert np.all((data[:, 1] >= 0) & (data[:, 1] <= 1 + 1e-12))
        assert (res.directory / "steady_density_E54meV.csv").exists()

    def test_wrong_excitation(self, tmp_path):
        with pytest.raises(ConfigError):
            run("switch", resolve_config(small_pulse(tmp_path)))

    def test_switch_outputs_and_determinism(self, tmp_path):
        cfg = resolve_config(small_switch(tmp_path))
        first = run("switch", cfg)
        names = set(first.files)
        assert {"D_E54meV.csv", "density_E54meV.csv", "barrier_profile.csv",
                "switch_envelope.csv"} <= names
        blobs = {n: (first.directory / n).read_bytes() for n in first.files}
        again = run("switch", load_config(first.directory / "manifest.yaml"))
        for n in again.files:
            assert (again.directory / n).read_bytes() == blobs[n], n
        manifest = read_yaml(first.directory / "manifest.yaml")
        assert set(manifest["manifest"]["outputs"]) == names

    def test_superpose_is_linear(self, tmp_path):
        cfg = resolve_config(small_pulse(tmp_path))
        res = run("superpose", cfg)
        d = res.directory
        probe = [n for n in res.files if n.startswith("superposed_")][0]
        _, total = read_csv(d / probe)
        _, a = read_csv(d / "trace_L10nm_E50meV_x20nm.csv")
        _, b = read_csv(d / "trace_L10nm_E54meV_x20nm.csv")
        np.testing.assert_allclose(total[:, 1], 0.5 * a[:, 2] + 0.5 * b[:, 2], rtol=1e-7, atol=1e-12)

    def test_pulse_checkpoint(self, tmp_path):
        from wiredyn.io import read_checkpoint
        raw = small_pulse(tmp_path)
        raw["incident"]["energy_meV"] = 54
        raw.pop("superpose")
        raw["output"]["checkpoint"] = True
        res = run("pulse", resolve_config(raw))
        delta, t = read_checkpoint(res.directory / "checkpoint_L10nm_E54meV.bin")
        assert t == pytest.approx(60.0, abs=0.1)
        assert np.all(np.isfinite(delta))


class TestCli:
    def test_check_prints_config(self, tmp_path, capsys):
        assert main(["switch", "--check", "--set", "grid.spacing_nm=0.1"]) == EXIT_OK
        cfg = yaml.safe_load(capsys.readouterr().out)
        assert cfg["grid"]["spacing_nm"] == 0.1

    def test_bad_config_exit_code(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("barrier: {colour: red}\n")
        assert main(["switch", str(path)]) == EXIT_CONFIG
        assert main(["switch", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
        assert main(["nonsense"]) == EXIT_CONFIG

    def test_numerical_failure_exit_code(self, tmp_path):
        # a one-site barrier cannot push T down to 1e-3 inside the scanned heights
        args = ["calibrate", "--set", "barrier.length_nm=0.05", "--set", "barrier.shape=rect",
                "--set", "barrier.target_T=0.001", "--set", f"output.directory={tmp_path}"]
        assert main(args) == EXIT_NUMERICAL

    def test_run_and_plot(self, tmp_path, capsys):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump(small_switch(tmp_path)))
        assert main(["switch", str(path)]) == EXIT_OK
        out = tmp_path / "switch"
        assert (out / "manifest.yaml").exists()
        assert main(["plot", str(out)]) == EXIT_OK
        svgs = sorted(out.glob("*.svg"))
        assert svgs
        first = [p.read_bytes() for p in svgs]
        main(["plot", str(out)])
        assert [p.read_bytes() for p in svgs] == first
        assert main(["plot", str(tmp_path / "nowhere")]) == EXIT_CONFIG
