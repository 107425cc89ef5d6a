"""Runtime settings"""

import logging
import os
import pathlib

import ska_ser_logging
from starlette.config import Config

# pylint: disable=consider-using-from-import
import sciml_priors.cli as cli

# Settings come from the optional sciml.env file only. The process environment is never read.
SETTINGS_FILE_PATH: pathlib.Path = pathlib.Path("sciml.env")
config = Config(SETTINGS_FILE_PATH if SETTINGS_FILE_PATH.is_file() else None, environ={})

DEBUG: bool = config("SCIML_VERBOSE", cast=bool, default=False)
LOGGING_LEVEL = logging.DEBUG if DEBUG else logging.WARNING
ska_ser_logging.configure_logging(LOGGING_LEVEL)
logger = logging.getLogger(__name__)
logger.info("Logging started for sciml_priors at level %s", LOGGING_LEVEL)


OUTPUT_ROOT: pathlib.Path = pathlib.Path(config("SCIML_OUTPUT_ROOT", default="./runs"))

THREADS: int = int(config("SCIML_THREADS", default=os.cpu_count() or 1))

CSV_DIGITS: int = int(config("SCIML_CSV_DIGITS", default=17))

CONFIGURATION_FILES_PATH: pathlib.Path = pathlib.Path(__file__).parent

PRESETS_PATH: pathlib.Path = CONFIGURATION_FILES_PATH / "presets"

VERSION: str = config("SCIML_VERSION", default=cli.__version__)

LATEST_POINTER_NAME: str = "latest"

CONFIG_ECHO_NAME: str = "config.yaml"


def set_verbose(verbose: bool) -> None:
    """Reconfigures logging for a command line run: DEBUG when verbose, INFO otherwise."""
    level = logging.DEBUG if verbose or DEBUG else logging.INFO
    ska_ser_logging.configure_logging(level)
    logger.debug("Logging reconfigured at level %s", level)
