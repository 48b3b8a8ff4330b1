from dotenv import load_dotenv
import logging
import os
from datetime import datetime

import constants


def setup_logging(log_dir: str | None = None) -> str:
    # settings.env also carries the SEDA_* keys read later by app.config
    load_dotenv(constants.SETTINGS_PATH)

    log_level = os.getenv("LOG_LEVEL", constants.LOG_LEVEL).upper()
    log_dir = log_dir or os.getenv("LOG_DIR", constants.LOG_DIR)
    os.makedirs(log_dir, exist_ok=True)

    # One file per day, shared by every run of that day
    log_file = os.path.join(log_dir, f"{datetime.now().strftime('%Y-%m-%d')}_{constants.LOG_FILE}")
    logging.basicConfig(filename=log_file, level=log_level, format=constants.LOG_FORMAT)
    return log_file
