import inspect
import logging.config
import os

from ruamel.yaml import YAML

LOGGER_NAME = "mnarlbm"


def config_logger(level: str = None):
    """Configures the package logger from :file:`logger-config.yaml`.

    :param level: A level name overriding the configured level of the
      :const:`mnarlbm` logger, defaults to :const:`None`
    :type level: str, optional
    """
    config_file_path = os.path.join(os.path.dirname(__file__), "logger-config.yaml")

    with open(config_file_path) as f:
        config = YAML(typ="safe").load(f)

    if level:
        config["loggers"][LOGGER_NAME]["level"] = level.upper()

    logging.config.dictConfig(config)

    global logger
    logger = logging.getLogger(LOGGER_NAME)


# =======================================================================================
# Hack to ensure correct logging from sphinx-build
# =======================================================================================
stack = inspect.stack()
path_splits = stack[len(stack) - 1].filename.rsplit("/", 1)
main_filename = path_splits[len(path_splits) - 1]
logger = logging.getLogger(LOGGER_NAME)

if main_filename != "sphinx-build":
    config_logger()
# =======================================================================================
