import argparse
import sys

import constants
from app.config import load_experiment_spec, load_keys
from app.process import run_experiment
from utils.exceptions import SedaSimError, StageError
from utils.logger import setup_logging


### FUNCTIONS ###


def _csv_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seda-sim",
        description="Memory-protection traffic and runtime study for DNN accelerators.",
    )
    parser.add_argument("--config", help="key/value experiment file (EXPERIMENT_*, NPU_*, DRAM_*, SEDA_*, ATTACK_*, RUN_*)")
    parser.add_argument("--profile", choices=["server", "edge", "custom"])
    parser.add_argument("--schemes", type=_csv_list, help="comma list, e.g. sgx_64,mgx_512,seda")
    parser.add_argument("--models", type=_csv_list, help="comma list of model tables, e.g. lenet,alexnet")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", dest="out_dir", help="report directory")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--residency", dest="layer_mac_residency", choices=["on_chip", "off_chip"])
    parser.add_argument("--layer-verify", dest="layer_verify", choices=["speculative", "stall"])
    parser.add_argument("--trials", dest="attack_trials", type=int)
    parser.add_argument("--dump-traces", action="store_true", help="also write each workload's data trace")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()

    overrides = {
        key: getattr(args, key)
        for key in (
            "profile", "schemes", "models", "seed", "out_dir",
            "workers", "layer_mac_residency", "layer_verify", "attack_trials",
        )
    }
    try:
        spec = load_experiment_spec(args.config, overrides)
        keys = load_keys()
        print(f"Running {len(spec.models)} model(s) x {len(spec.schemes)} scheme(s) on {spec.profile.value}...")
        result = run_experiment(spec, keys, dump_trace_files=args.dump_traces)
    except StageError as e:
        print(f"Error in stage '{e.stage}': {e.cause}", file=sys.stderr)
        return constants.EXIT_CONFIG_ERROR
    except SedaSimError as e:
        print(f"Error: {e}", file=sys.stderr)
        return constants.EXIT_CONFIG_ERROR

    for path in result.files:
        print(f"Wrote {path}")
    for violation in result.violations:
        print(f"Invariant violated: {violation}", file=sys.stderr)
    print("Done")
    return result.exit_status


### MAIN ###

if __name__ == "__main__":
    sys.exit(main())
