"""Configuration of the commands.

The configuration is a flat mapping built in four layers, each one overriding the
previous: the defaults of :file:`default-config.yaml`, an optional custom YAML file,
the :envvar:`SEED` and :envvar:`THREADS` environment variables and the command-line
flags.
"""
import os
from collections.abc import Mapping
from typing import Any, Dict, Optional

from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "default-config.yaml")

ENVIRONMENT_KEYS = {"SEED": "seed", "THREADS": "n_jobs"}


class ConfigError(Exception):
    """Raised when a configuration cannot be built.

    :ivar str message: What is wrong with the configuration

    """

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self):
        return f"Error parsing configuration due to {self.message}."


def _load_yaml(path: str) -> Dict[str, Any]:
    try:
        with open(path) as f:
            document = YAML(typ="safe").load(f)
    except OSError as e:
        raise ConfigError(f"unreadable file '{path}' ({e.strerror or e})") from None
    except YAMLError as e:
        raise ConfigError(f"malformed YAML in '{path}' ({e})") from None

    if document is None:
        return {}

    if not isinstance(document, Mapping):
        raise ConfigError(f"'{path}' not holding a flat key/value document")

    nested = [k for k, v in document.items() if isinstance(v, Mapping)]

    if nested:
        raise ConfigError(f"nested keys {nested} in '{path}'")

    return dict(document)


def load_defaults() -> Dict[str, Any]:
    return _load_yaml(DEFAULT_CONFIG_PATH)


def _environment() -> Dict[str, Any]:
    values = {}

    for variable, key in ENVIRONMENT_KEYS.items():
        raw = os.environ.get(variable)

        if raw is None or not raw.strip():
            continue

        try:
            values[key] = int(raw)
        except ValueError:
            raise ConfigError(
                f"environment variable {variable} expecting an integer, got '{raw}'"
            ) from None

    return values


def build_config(
    config_path: Optional[str] = None, overrides: Optional[Mapping] = None
) -> Dict[str, Any]:
    """Builds the configuration of a command.

    :param config_path: Path to a custom configuration file, defaults to
      :const:`None`
    :type config_path: str, optional
    :param overrides: Values given on the command line; :const:`None` values are
      ignored, defaults to :const:`None`
    :type overrides: collections.abc.Mapping, optional
    :return: The merged configuration
    :rtype: dict[str, Any]

    :raises ConfigError: The custom file is malformed or holds unknown keys, or an
      environment variable is not an integer
    """
    config = load_defaults()

    if config_path:
        custom = _load_yaml(config_path)
        unknown = sorted(set(custom) - set(config))

        if unknown:
            raise ConfigError(f"unknown keys {unknown} in '{config_path}'")

        config.update(custom)

    config.update(_environment())
    config.update({k: v for k, v in (overrides or {}).items() if v is not None})

    return config
