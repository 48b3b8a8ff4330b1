"""Experiment orchestration: the (workload x scheme) matrix, attack campaigns and CSV reports."""
import logging
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from pathlib import Path
from typing import Iterable

import pandas as pd
from pydantic import BaseModel, ConfigDict

import constants
from app.adversary import run_attack_campaign
from app.cipher_core import engine_cost, required_bandwidth_multiple
from app.memsim import normalize, simulate
from app.schemes import process_trace
from app.workload import (
    build_tiling_plan,
    emit_trace,
    load_layer_table,
    model_compute_cycles,
    select_model_opt_blks,
    write_trace_file,
)
from decorator.stage import STAGE_FAILURES, stage
from decorator.time_execution import time_execution
from model.crypto_model import EngineCostModel, KeySet
from model.enums import AesVariant, AttackKind, LayerVerify, MacMode, PadMode, SchemeKind
from model.experiment_model import AttackReport, AttackTarget, ExperimentSpec, SparseTensorSample
from model.scheme_model import CycleReport, DramConfig, SchemeConfig, SchemeStats
from model.workload_model import LayerDescriptor, NpuConfig, OptBlkChoice, TilingPlan
from utils.exceptions import InvariantViolation, LayerTooLargeForSram
from utils.table_io import update_models_to_csv, write_csv_rows

logger = logging.getLogger(__name__)

TRAFFIC_HEADER = [
    "workload", "scheme", "granularity",
    "data_read_bytes", "data_write_bytes",
    "vn_bytes", "mac_bytes", "tree_bytes", "metadata_bytes", "total_bytes",
    "normalized_traffic", "delta_vs_unprotected_pct", "delta_vs_64b_pct",
]
PERFORMANCE_HEADER = [
    "workload", "scheme", "granularity",
    "total_cycles", "compute_cycles", "normalized_runtime",
    "bandwidth_utilization", "max_channel_busy_cycles", "baseline",
]
ATTACKS_HEADER = [
    "scheme_label", "workload", "attack", "attempts", "successes",
    "recovered_fraction", "segments_total", "segments_recovered",
]
COST_MODEL_HEADER = ["point", "variant", "bandwidth_multiple", "area_units", "power_units"]
OPTBLK_HEADER = ["workload", "layer_id", "block_bytes", "redundant_mac_bytes"] + [
    f"mac_bytes_{size}" for size in constants.OPT_BLK_CANDIDATES
]
PLOT_DATA_HEADER = ["workload", "scheme", "metric", "value"]

PLOT_METRICS = {
    constants.TRAFFIC_CSV: ["normalized_traffic", "metadata_bytes"],
    constants.PERFORMANCE_CSV: ["normalized_runtime"],
}

# (heavier, lighter): metadata bytes and runtime of the first never fall below the second
DOMINANCE_PAIRS = [
    ("sgx_64", "mgx_64"),
    ("mgx_64", "mgx_512"),
    ("mgx_512", "seda"),
    ("sgx_64", "sgx_512"),
]
# runs whose metadata differs in address placement can finish a few cycles apart
RUNTIME_ORDER_TOLERANCE = 1e-3

LOAD_FAILURES = STAGE_FAILURES + (LayerTooLargeForSram,)


class Workload(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    layers: list[LayerDescriptor]
    plans: list[TilingPlan]


class SchemeResult(BaseModel):
    config: SchemeConfig
    stats: SchemeStats
    report: CycleReport


class WorkloadResult(BaseModel):
    name: str
    opt_blks: list[OptBlkChoice]
    results: list[SchemeResult]

    def by_label(self) -> dict[str, SchemeResult]:
        return {result.config.label: result for result in self.results}


class ExperimentResult(BaseModel):
    exit_status: int
    files: list[Path]
    violations: list[str]


@stage("config")
def scheme_configs(spec: ExperimentSpec) -> list[SchemeConfig]:
    """Unprotected first (it is the normalization baseline), then the requested schemes in order."""
    labels = ["unprotected"] + [name.strip().lower() for name in spec.schemes]
    configs: list[SchemeConfig] = []
    for label in dict.fromkeys(labels):
        configs.append(SchemeConfig.from_name(label, spec.layer_mac_residency))
    return configs


def load_workload(name: str, model_dir: Path, npu: NpuConfig) -> Workload:
    layers = load_layer_table(Path(model_dir) / f"{name}.csv")
    plans = [build_tiling_plan(layer, npu) for layer in layers]
    return Workload(name=name, layers=layers, plans=plans)


@stage("load_models", exceptions=LOAD_FAILURES)
def load_workloads(spec: ExperimentSpec) -> list[Workload]:
    npu = spec.npu()
    workloads = [load_workload(name, spec.model_dir, npu) for name in spec.models]
    for workload in workloads:
        logger.info("Loaded %s: %d layers", workload.name, len(workload.layers))
    return workloads


def simulate_workload(spec: ExperimentSpec, workload: Workload) -> WorkloadResult:
    npu = spec.npu()
    dram = DramConfig.from_npu(npu, spec.dram_latency_ns)
    trace = emit_trace(workload.plans, npu)
    compute_cycles = model_compute_cycles(workload.plans, npu)

    results: list[SchemeResult] = []
    baseline: CycleReport | None = None
    for config in scheme_configs(spec):
        augmented, stats = process_trace(config, trace)
        stall = spec.layer_verify is LayerVerify.stall and config.kind is SchemeKind.seda
        report = simulate(
            dram,
            augmented,
            compute_cycles,
            layer_barrier=stall,
            workload=workload.name,
            scheme=config.label,
        )
        if baseline is None:
            baseline = report
        results.append(SchemeResult(config=config, stats=stats, report=normalize(report, baseline)))
        logger.info("%s/%s: %d cycles", workload.name, config.label, report.total_cycles)
    return WorkloadResult(name=workload.name, opt_blks=select_model_opt_blks(workload.plans), results=results)


def run_matrix(spec: ExperimentSpec, workloads: list[Workload]) -> list[WorkloadResult]:
    if spec.workers > 1 and len(workloads) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            # map keeps submission order, so reports do not depend on scheduling
            return list(pool.map(simulate_workload, repeat(spec), workloads))
    return [simulate_workload(spec, workload) for workload in workloads]


def attack_targets() -> list[AttackTarget]:
    targets = [
        AttackTarget(
            label=f"seca_{pad_mode.value}_{block_bytes}B",
            attack=AttackKind.seca,
            pad_mode=pad_mode,
            block_bytes=block_bytes,
        )
        for block_bytes in constants.PROTECTION_BLOCK_CHOICES
        for pad_mode in PadMode
    ]
    targets += [
        AttackTarget(label=f"repa_{mac_mode.value}_64B", attack=AttackKind.repa, mac_mode=mac_mode)
        for mac_mode in MacMode
    ]
    return targets


@stage("attacks")
def run_attacks(spec: ExperimentSpec, keys: KeySet) -> list[AttackReport]:
    sample = SparseTensorSample(
        zero_fraction=spec.attack_zero_fraction,
        blocks_per_trial=spec.attack_blocks_per_trial,
    )
    return [run_attack_campaign(target, sample, spec.attack_trials, spec.seed, keys) for target in attack_targets()]


def cost_model_rows(model: EngineCostModel | None = None) -> list[dict]:
    model = model or EngineCostModel()
    points = [("sweep", multiple) for multiple in constants.COST_MODEL_MULTIPLES]
    points += [
        (profile, required_bandwidth_multiple(NpuConfig.from_profile(profile), model))
        for profile in constants.NPU_PROFILES
    ]
    rows = []
    for point, multiple in points:
        for variant in AesVariant:
            area, power = engine_cost(model, multiple, variant)
            rows.append(
                {
                    "point": point,
                    "variant": variant.value,
                    "bandwidth_multiple": multiple,
                    "area_units": area,
                    "power_units": power,
                }
            )
    return rows


def _pct_delta(value: int, reference: int) -> float | None:
    if not reference:
        return None
    return (value / reference - 1.0) * 100.0


def traffic_rows(result: WorkloadResult) -> list[dict]:
    by_label = result.by_label()
    baseline = result.results[0].stats
    rows = []
    for scheme in result.results:
        stats, config = scheme.stats, scheme.config
        total = stats.data_bytes + stats.metadata_bytes
        baseline_total = baseline.data_bytes + baseline.metadata_bytes
        counterpart = by_label.get(f"{config.label.split('_')[0]}_64") if config.protection_block_bytes != 64 else None
        rows.append(
            {
                "workload": result.name,
                "scheme": config.label,
                "granularity": config.granularity_label,
                "data_read_bytes": stats.data_read_bytes,
                "data_write_bytes": stats.data_write_bytes,
                "vn_bytes": stats.vn_bytes,
                "mac_bytes": stats.mac_bytes,
                "tree_bytes": stats.tree_bytes,
                "metadata_bytes": stats.metadata_bytes,
                "total_bytes": total,
                "normalized_traffic": total / baseline_total if baseline_total else 1.0,
                "delta_vs_unprotected_pct": _pct_delta(total, baseline_total),
                "delta_vs_64b_pct": (
                    _pct_delta(total, counterpart.stats.data_bytes + counterpart.stats.metadata_bytes)
                    if counterpart
                    else None
                ),
            }
        )
    return rows


def performance_rows(result: WorkloadResult) -> list[dict]:
    return [
        {
            "workload": result.name,
            "scheme": scheme.config.label,
            "granularity": scheme.config.granularity_label,
            "total_cycles": scheme.report.total_cycles,
            "compute_cycles": scheme.report.compute_cycles,
            "normalized_runtime": scheme.report.normalized_runtime,
            "bandwidth_utilization": scheme.report.bandwidth_utilization,
            "max_channel_busy_cycles": max(scheme.report.channel_busy_cycles, default=0.0),
            "baseline": scheme.report.baseline,
        }
        for scheme in result.results
    ]


def optblk_rows(result: WorkloadResult) -> list[dict]:
    return [
        {
            "workload": result.name,
            "layer_id": choice.layer_id,
            "block_bytes": choice.block_bytes,
            "redundant_mac_bytes": choice.redundant_mac_bytes,
            **{f"mac_bytes_{size}": choice.scores.get(size) for size in constants.OPT_BLK_CANDIDATES},
        }
        for choice in result.opt_blks
    ]


def check_invariants(
    result: WorkloadResult,
    layer_verify: LayerVerify = LayerVerify.speculative,
    strict: bool = False,
) -> list[str]:
    """Conservation, dominance, runtime ordering, cache sanity and the SeDA overhead bound; strict raises."""
    violations: list[str] = []
    baseline = result.results[0].stats
    for scheme in result.results:
        stats, label = scheme.stats, scheme.config.label
        if (stats.data_read_bytes, stats.data_write_bytes) != (baseline.data_read_bytes, baseline.data_write_bytes):
            violations.append(f"{result.name}/{label}: data bytes {stats.data_bytes} != {baseline.data_bytes}")
        for cache in stats.caches:
            if not cache.consistent:
                violations.append(f"{result.name}/{label}: {cache.name} counters inconsistent")
            if not cache.within_capacity:
                violations.append(
                    f"{result.name}/{label}: {cache.name} held {cache.peak_occupancy_bytes} B > {cache.capacity_bytes} B"
                )

    by_label = result.by_label()
    for heavy, light in DOMINANCE_PAIRS:
        if heavy not in by_label or light not in by_label:
            continue
        heavy_result, light_result = by_label[heavy], by_label[light]
        if heavy_result.stats.metadata_bytes < light_result.stats.metadata_bytes:
            violations.append(
                f"{result.name}: metadata {heavy} {heavy_result.stats.metadata_bytes} "
                f"< {light} {light_result.stats.metadata_bytes}"
            )
        if light == "seda" and layer_verify is LayerVerify.stall:
            # stalling verification trades runtime for early detection
            continue
        heavy_runtime = heavy_result.report.normalized_runtime or 0.0
        light_runtime = light_result.report.normalized_runtime or 0.0
        if heavy_runtime < light_runtime * (1.0 - RUNTIME_ORDER_TOLERANCE):
            violations.append(f"{result.name}: runtime {heavy} {heavy_runtime:.6f} < {light} {light_runtime:.6f}")

    seda = by_label.get("seda")
    if seda is not None and result.name in constants.BENCHMARK_MODELS:
        violations.extend(_seda_overhead_violations(result.name, seda, baseline, layer_verify))
    if strict and violations:
        raise InvariantViolation("; ".join(violations))
    return violations


def _seda_overhead_violations(
    name: str,
    seda: SchemeResult,
    baseline: SchemeStats,
    layer_verify: LayerVerify,
) -> list[str]:
    """Layer-MAC protection stays within SEDA_OVERHEAD_BOUND of the unprotected run on the bundled benchmarks."""
    violations = []
    baseline_total = baseline.data_bytes + baseline.metadata_bytes
    if baseline_total:
        traffic = (seda.stats.data_bytes + seda.stats.metadata_bytes) / baseline_total
        if traffic > 1.0 + constants.SEDA_OVERHEAD_BOUND:
            violations.append(f"{name}: seda traffic {traffic:.6f} above the overhead bound")
    runtime = seda.report.normalized_runtime or 1.0
    if layer_verify is LayerVerify.speculative and runtime > 1.0 + constants.SEDA_OVERHEAD_BOUND:
        violations.append(f"{name}: seda runtime {runtime:.6f} above the overhead bound")
    return violations


def emit_plot_data(
    reports: Iterable[tuple[str | Path, list[str]]],
    out_path: str | Path,
) -> Path:
    """Long-format (workload, scheme, metric, value) rows; values are copied as written."""
    frames = []
    for path, metrics in reports:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        frames.append(
            frame.melt(id_vars=["workload", "scheme"], value_vars=metrics, var_name="metric", value_name="value")
        )
    rows = pd.concat(frames, ignore_index=True).to_dict(orient="records") if frames else []
    return write_csv_rows(out_path, PLOT_DATA_HEADER, rows)


@stage("write_reports")
def write_reports(
    out_dir: Path,
    results: list[WorkloadResult],
    attack_reports: list[AttackReport],
) -> list[Path]:
    out_dir = Path(out_dir)
    files = [
        write_csv_rows(out_dir / constants.TRAFFIC_CSV, TRAFFIC_HEADER, (row for r in results for row in traffic_rows(r))),
        write_csv_rows(
            out_dir / constants.PERFORMANCE_CSV, PERFORMANCE_HEADER, (row for r in results for row in performance_rows(r))
        ),
        update_models_to_csv(out_dir / constants.ATTACKS_CSV, attack_reports, ATTACKS_HEADER),
        write_csv_rows(out_dir / constants.COST_MODEL_CSV, COST_MODEL_HEADER, cost_model_rows()),
        write_csv_rows(out_dir / constants.OPTBLK_CSV, OPTBLK_HEADER, (row for r in results for row in optblk_rows(r))),
    ]
    files.append(
        emit_plot_data(
            [(out_dir / name, metrics) for name, metrics in PLOT_METRICS.items()],
            out_dir / constants.PLOT_DATA_CSV,
        )
    )
    return files


@stage("write_traces")
def dump_traces(spec: ExperimentSpec, workloads: list[Workload]) -> list[Path]:
    npu = spec.npu()
    return [
        write_trace_file(Path(spec.out_dir) / "traces" / f"{workload.name}.csv", emit_trace(workload.plans, npu))
        for workload in workloads
    ]


@time_execution
def run_experiment(spec: ExperimentSpec, keys: KeySet, dump_trace_files: bool = False) -> ExperimentResult:
    scheme_configs(spec)
    workloads = load_workloads(spec)
    results = run_matrix(spec, workloads)
    attack_reports = run_attacks(spec, keys)

    violations = [v for result in results for v in check_invariants(result, spec.layer_verify)]
    for violation in violations:
        logger.error("Invariant violated: %s", violation)

    files = write_reports(spec.out_dir, results, attack_reports)
    if dump_trace_files:
        files += dump_traces(spec, workloads)
    status = constants.EXIT_INVARIANT_VIOLATION if violations else constants.EXIT_OK
    return ExperimentResult(exit_status=status, files=files, violations=violations)
