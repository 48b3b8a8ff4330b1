import logging
from pathlib import Path

from dotenv import dotenv_values
from pydantic import ValidationError

import constants
from decorator.stage import stage
from model.crypto_model import AesKey, KeySet, MacKey
from model.experiment_model import ExperimentConfigFile, ExperimentSpec
from utils.common_utils import get_hex_secret
from utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


def read_config_file(path: str | Path | None) -> ExperimentConfigFile:
    if path is None:
        return ExperimentConfigFile()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing config file: {path}")
    values = {key: value for key, value in dotenv_values(path).items() if value not in (None, "")}
    try:
        return ExperimentConfigFile.model_validate(values)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"])
        raise ConfigError(f"{path}: {key}: {error['msg']}") from e


@stage("config")
def load_experiment_spec(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentSpec:
    """File values first, CLI flags on top, defaults from constants for the rest."""
    file_config = read_config_file(path)
    try:
        spec = file_config.to_spec(overrides)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or "spec"
        raise ConfigError(f"{key}: {error['msg']}") from e
    logger.info(
        "Experiment: profile=%s schemes=%s models=%s seed=%d out=%s",
        spec.profile.value, ",".join(spec.schemes), ",".join(spec.models), spec.seed, spec.out_dir,
    )
    return spec


@stage("keys")
def load_keys() -> KeySet:
    # settings.env is loaded by setup_logging; the values are never logged
    try:
        return KeySet(
            enc=AesKey(key=get_hex_secret("SEDA_ENC_KEY", constants.DEFAULT_ENC_KEY_HEX)),
            mac=MacKey(key=get_hex_secret("SEDA_MAC_KEY", constants.DEFAULT_MAC_KEY_HEX)),
        )
    except ValidationError as e:
        raise ConfigError(f"SEDA_ENC_KEY/SEDA_MAC_KEY: {e.errors()[0]['msg']}") from e
