import importlib
from pathlib import Path

import pandas as pd
import pytest

import constants
import main as cli
from app import process
from app.config import load_experiment_spec
from app.process import (
    COST_MODEL_HEADER,
    PERFORMANCE_HEADER,
    TRAFFIC_HEADER,
    attack_targets,
    cost_model_rows,
    emit_plot_data,
    run_experiment,
    scheme_configs,
)
from model.enums import LayerVerify, MacResidency, NpuProfile
from model.experiment_model import ExperimentSpec
from tests.conftest import FIXTURES
from utils.exceptions import ConfigError, StageError

ROOT = Path(__file__).resolve().parent.parent
LOCAL_MODULES = {"decorator": "stage", "model": "enums", "utils": "exceptions", "app": "process"}

OUTPUT_FILES = [
    constants.TRAFFIC_CSV,
    constants.PERFORMANCE_CSV,
    constants.ATTACKS_CSV,
    constants.COST_MODEL_CSV,
    constants.OPTBLK_CSV,
    constants.PLOT_DATA_CSV,
]


def _spec(tmp_path, **kwargs) -> ExperimentSpec:
    values = {
        "model_dir": FIXTURES / "models",
        "out_dir": tmp_path / "out",
        "attack_trials": 2,
        "models": ["tiny"],
    }
    values.update(kwargs)
    return ExperimentSpec(**values)


def _read(path) -> pd.DataFrame:
    return pd.read_csv(path, dtype=str, keep_default_na=False)


class TestPlotData:
    def test_long_format(self, tmp_path):
        traffic = tmp_path / "traffic.csv"
        performance = tmp_path / "performance.csv"
        schemes = ["unprotected", "mgx_64", "mgx_512", "seda"]
        pd.DataFrame(
            {
                "workload": ["lenet"] * 4,
                "scheme": schemes,
                "normalized_traffic": ["1.0", "1.125", "1.015625", "1.0001"],
                "metadata_bytes": ["0", "800", "100", "16"],
            }
        ).to_csv(traffic, index=False)
        pd.DataFrame(
            {
                "workload": ["lenet"] * 4,
                "scheme": schemes,
                "normalized_runtime": ["1.0", "1.2", "1.05", "1.0"],
            }
        ).to_csv(performance, index=False)

        out = emit_plot_data(
            [(traffic, ["normalized_traffic", "metadata_bytes"]), (performance, ["normalized_runtime"])],
            tmp_path / "plot_data.csv",
        )
        frame = _read(out)
        assert list(frame.columns) == ["workload", "scheme", "metric", "value"]
        assert len(frame) == 12
        row = frame[(frame.scheme == "mgx_512") & (frame.metric == "normalized_traffic")].iloc[0]
        assert row.value == "1.015625"
        row = frame[(frame.scheme == "seda") & (frame.metric == "metadata_bytes")].iloc[0]
        assert row.value == "16"

    def test_no_reports(self, tmp_path):
        out = emit_plot_data([], tmp_path / "plot_data.csv")
        assert out.read_text() == "workload,scheme,metric,value\n"


class TestSchemeConfigs:
    def test_baseline_first_and_deduplicated(self, tmp_path):
        spec = _spec(tmp_path, schemes=["seda", "sgx_64", "unprotected", "seda"])
        assert [c.label for c in scheme_configs(spec)] == ["unprotected", "seda", "sgx_64"]

    def test_residency_reaches_seda(self, tmp_path):
        spec = _spec(tmp_path, schemes=["seda"], layer_mac_residency=MacResidency.on_chip)
        assert scheme_configs(spec)[1].layer_mac_residency is MacResidency.on_chip

    def test_unknown_scheme(self, tmp_path):
        with pytest.raises(StageError) as excinfo:
            scheme_configs(_spec(tmp_path, schemes=["tgx_64"]))
        assert excinfo.value.stage == "config"


class TestCostModel:
    def test_rows(self):
        rows = cost_model_rows()
        assert set(rows[0]) == set(COST_MODEL_HEADER)
        required = {(row["point"], row["variant"]): row["bandwidth_multiple"] for row in rows if row["point"] != "sweep"}
        assert required[("server", "B-AES")] == 14
        assert required[("edge", "T-AES")] == 3
        sweep = [row for row in rows if row["point"] == "sweep" and row["bandwidth_multiple"] == 16]
        by_variant = {row["variant"]: row for row in sweep}
        assert by_variant["B-AES"]["area_units"] < by_variant["T-AES"]["area_units"]

    def test_attack_matrix(self):
        labels = [target.label for target in attack_targets()]
        assert "seca_shared_otp_64B" in labels and "seca_pad_group_512B" in labels
        assert "repa_naive_64B" in labels and "repa_position_bound_64B" in labels
        assert len(labels) == len(set(labels)) == 6


class TestRunExperiment:
    def test_unprotected_only(self, tmp_path, keys):
        spec = _spec(tmp_path, schemes=["unprotected"], models=["lenet"])
        result = run_experiment(spec, keys)
        assert result.exit_status == constants.EXIT_OK
        assert [p.name for p in result.files] == OUTPUT_FILES
        performance = _read(spec.out_dir / constants.PERFORMANCE_CSV)
        assert list(performance.columns) == PERFORMANCE_HEADER
        assert performance.normalized_runtime.tolist() == ["1.0"]
        traffic = _read(spec.out_dir / constants.TRAFFIC_CSV)
        assert list(traffic.columns) == TRAFFIC_HEADER
        assert traffic.metadata_bytes.tolist() == ["0"]

    @pytest.mark.parametrize("profile", [NpuProfile.server, NpuProfile.edge])
    def test_all_schemes_hold_invariants(self, tmp_path, keys, profile):
        spec = _spec(tmp_path, profile=profile, models=["tiny", "lenet"])
        result = run_experiment(spec, keys)
        assert result.violations == []
        assert result.exit_status == constants.EXIT_OK
        traffic = _read(spec.out_dir / constants.TRAFFIC_CSV)
        assert len(traffic) == 2 * len(constants.DEFAULT_SCHEMES)
        assert traffic.scheme.tolist()[:6] == list(constants.DEFAULT_SCHEMES)
        sgx_512 = traffic[(traffic.workload == "lenet") & (traffic.scheme == "sgx_512")].iloc[0]
        assert sgx_512.delta_vs_64b_pct != "" and sgx_512.delta_vs_unprotected_pct != ""
        seda = traffic[(traffic.workload == "lenet") & (traffic.scheme == "seda")].iloc[0]
        assert float(seda.normalized_traffic) <= 1.01
        plot = _read(spec.out_dir / constants.PLOT_DATA_CSV)
        assert len(plot) == 3 * len(traffic)

    def test_stall_mode(self, tmp_path, keys):
        spec = _spec(tmp_path, schemes=["mgx_512", "seda"], layer_verify=LayerVerify.stall)
        result = run_experiment(spec, keys)
        assert result.exit_status == constants.EXIT_OK
        performance = _read(spec.out_dir / constants.PERFORMANCE_CSV)
        assert float(performance[performance.scheme == "seda"].normalized_runtime.iloc[0]) >= 1.0

    def test_reports_are_reproducible(self, tmp_path, keys):
        first = _spec(tmp_path / "a", models=["tiny", "lenet"])
        second = _spec(tmp_path / "b", models=["tiny", "lenet"], workers=2)
        run_experiment(first, keys)
        run_experiment(second, keys)
        for name in OUTPUT_FILES:
            assert (first.out_dir / name).read_bytes() == (second.out_dir / name).read_bytes(), name

    def test_missing_model(self, tmp_path, keys):
        with pytest.raises(StageError) as excinfo:
            run_experiment(_spec(tmp_path, models=["tiny", "vgg"]), keys)
        assert excinfo.value.stage == "load_models"
        assert "vgg.csv" in str(excinfo.value.cause)

    def test_keys_never_written(self, tmp_path, keys):
        spec = _spec(tmp_path, schemes=["seda", "mgx_64"])
        result = run_experiment(spec, keys, dump_trace_files=True)
        assert any(path.parent.name == "traces" for path in result.files)
        for path in result.files:
            text = path.read_text()
            assert keys.enc.key.hex() not in text
            assert keys.mac.key.hex() not in text

    def test_violations_exit_with_two(self, tmp_path, keys, monkeypatch):
        monkeypatch.setattr(process, "check_invariants", lambda result, layer_verify: ["forced"])
        result = run_experiment(_spec(tmp_path, schemes=["unprotected"]), keys)
        assert result.exit_status == constants.EXIT_INVARIANT_VIOLATION
        assert result.violations == ["forced"]


class TestSedaOverheadBound:
    def _lenet(self, tmp_path, **kwargs):
        spec = _spec(tmp_path, models=["lenet"], **kwargs)
        workload = process.load_workload("lenet", spec.model_dir, spec.npu())
        return spec, process.simulate_workload(spec, workload)

    def test_within_bound(self, tmp_path):
        _, result = self._lenet(tmp_path)
        assert process.check_invariants(result) == []

    def test_slow_seda_is_reported(self, tmp_path):
        _, result = self._lenet(tmp_path)
        seda = result.by_label()["seda"]
        seda.report = seda.report.model_copy(update={"normalized_runtime": 1.02})
        violations = process.check_invariants(result)
        assert any("seda runtime" in violation for violation in violations)

    def test_stall_mode_skips_the_runtime_bound(self, tmp_path):
        _, result = self._lenet(tmp_path, layer_verify=LayerVerify.stall)
        seda = result.by_label()["seda"]
        seda.report = seda.report.model_copy(update={"normalized_runtime": 1.02})
        assert process.check_invariants(result, LayerVerify.stall) == []

    def test_only_bundled_benchmarks_are_bounded(self, tmp_path):
        spec = _spec(tmp_path)
        result = process.simulate_workload(spec, process.load_workload("tiny", spec.model_dir, spec.npu()))
        seda = result.by_label()["seda"]
        seda.report = seda.report.model_copy(update={"normalized_runtime": 1.02})
        assert not any("overhead bound" in violation for violation in process.check_invariants(result))


@pytest.mark.slow
@pytest.mark.parametrize("profile", [NpuProfile.server, NpuProfile.edge])
@pytest.mark.parametrize("name", constants.BENCHMARK_MODELS)
def test_benchmark_suite_holds_invariants(tmp_path, profile, name):
    spec = _spec(tmp_path, profile=profile, model_dir=constants.MODEL_DIR, models=[name])
    result = process.simulate_workload(spec, process.load_workload(name, spec.model_dir, spec.npu()))
    assert process.check_invariants(result) == []
    by_label = result.by_label()
    baseline, seda = by_label["unprotected"].stats, by_label["seda"].stats
    assert seda.metadata_bytes <= constants.SEDA_OVERHEAD_BOUND * (baseline.data_bytes + baseline.metadata_bytes)
    assert by_label["seda"].report.normalized_runtime <= 1.0 + constants.SEDA_OVERHEAD_BOUND
    runtime = {label: scheme.report.normalized_runtime for label, scheme in by_label.items()}
    assert runtime["sgx_64"] >= runtime["mgx_64"] * (1 - process.RUNTIME_ORDER_TOLERANCE)
    assert runtime["mgx_512"] >= runtime["seda"] * (1 - process.RUNTIME_ORDER_TOLERANCE)


class TestConfig:
    def test_file_values_and_overrides(self):
        spec = load_experiment_spec(FIXTURES / "experiment.env", {"seed": 5, "workers": None})
        assert spec.profile is NpuProfile.edge
        assert spec.schemes == ["mgx_64", "seda"]
        assert spec.models == ["tiny"]
        assert spec.seed == 5
        assert spec.attack_trials == 4
        assert spec.workers == 1

    def test_defaults_without_file(self):
        spec = load_experiment_spec(None, {})
        assert spec.schemes == list(constants.DEFAULT_SCHEMES)
        assert spec.npu().name == "server"

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.env"
        path.write_text("EXPERIMENT_PROFILE=edge\nEXPERIMENT_COLOUR=blue\n")
        with pytest.raises(StageError) as excinfo:
            load_experiment_spec(path)
        assert excinfo.value.stage == "config"
        assert isinstance(excinfo.value.cause, ConfigError)
        assert "EXPERIMENT_COLOUR" in str(excinfo.value.cause)

    def test_missing_file(self, tmp_path):
        with pytest.raises(StageError):
            load_experiment_spec(tmp_path / "absent.env")

    def test_custom_profile(self, tmp_path):
        path = tmp_path / "custom.env"
        path.write_text(
            "EXPERIMENT_PROFILE=custom\nNPU_PE_ROWS=8\nNPU_PE_COLS=8\nNPU_SRAM_BYTES=65536\n"
            "NPU_FREQ_GHZ=1.5\nNPU_DRAM_CHANNELS=2\nNPU_DRAM_GBPS_PER_CHANNEL=3.2\n"
        )
        npu = load_experiment_spec(path).npu()
        assert (npu.pe_count, npu.sram_bytes, npu.dram_channels) == (64, 65536, 2)

    def test_custom_profile_needs_npu(self, tmp_path):
        path = tmp_path / "custom.env"
        path.write_text("EXPERIMENT_PROFILE=custom\n")
        with pytest.raises(StageError):
            load_experiment_spec(path)

    def test_named_profile_override(self, tmp_path):
        path = tmp_path / "edge.env"
        path.write_text("EXPERIMENT_PROFILE=edge\nNPU_SRAM_BYTES=65536\n")
        npu = load_experiment_spec(path).npu()
        assert npu.sram_bytes == 65536
        assert npu.pe_rows == 32


class TestMain:
    @pytest.fixture
    def config_file(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text(
            f"EXPERIMENT_MODEL_DIR={FIXTURES / 'models'}\n"
            f"EXPERIMENT_OUT_DIR={tmp_path / 'results'}\n"
            "EXPERIMENT_MODELS=tiny\n"
            "ATTACK_TRIALS=2\n"
        )
        return path

    def test_success(self, tmp_path, monkeypatch, config_file, capsys):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["--config", str(config_file), "--schemes", "mgx_64,seda"]) == constants.EXIT_OK
        assert (tmp_path / "results" / constants.TRAFFIC_CSV).exists()
        assert "Done" in capsys.readouterr().out

    def test_missing_model(self, tmp_path, monkeypatch, config_file, capsys):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["--config", str(config_file), "--models", "vgg"]) == constants.EXIT_CONFIG_ERROR
        assert "load_models" in capsys.readouterr().err

    def test_bad_key_in_settings(self, tmp_path, monkeypatch, config_file):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("SEDA_MAC_KEY", "not-hex")
        assert cli.main(["--config", str(config_file)]) == constants.EXIT_CONFIG_ERROR

    def test_invariant_violation(self, tmp_path, monkeypatch, config_file):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setattr(process, "check_invariants", lambda result, layer_verify: ["forced"])
        assert cli.main(["--config", str(config_file), "--schemes", "unprotected"]) == constants.EXIT_INVARIANT_VIOLATION


class TestPackages:
    @pytest.mark.parametrize("name", ["decorator", "model", "utils", "app"])
    def test_local_package_wins(self, name):
        package = importlib.import_module(name)
        assert package.__file__ is not None
        assert Path(package.__file__).resolve().parent == ROOT / name
        importlib.import_module(f"{name}.{LOCAL_MODULES[name]}")
