import json
import os

import toml
from loguru import logger

from utils.colors import Colors

from .settings_constants import DEFAULTS

APP_NAME = "rdslc"

CONFIG_DIR = os.path.expanduser(f"~/.config/{APP_NAME}")
CONFIG_FILE = os.path.join(CONFIG_DIR, "config.toml")
VERSION_FILE = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "version.json")

SEED_ENV = "RDSLC_SEED"


def deep_update(target: dict, update: dict) -> dict:
    """
    Recursively update a nested dictionary with values from another dictionary.
    Modifies target in-place.
    """
    for key, value in update.items():
        if isinstance(value, dict) and key in target and isinstance(target[key], dict):
            deep_update(target[key], value)
        else:
            target[key] = value
    return target


def load_config(path: str = CONFIG_FILE) -> dict:
    """Load user settings from config.toml; a missing or broken file yields {}."""
    if not os.path.exists(path):
        return {}
    try:
        with open(path, "r") as f:
            data = toml.load(f)
    except (toml.TomlDecodeError, OSError) as e:
        logger.warning(f"{Colors.WARNING}[CONFIG] ignoring {path}: {e}{Colors.RESET}")
        return {}
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        logger.warning(f"{Colors.WARNING}[CONFIG] unknown settings in {path}: {', '.join(unknown)}{Colors.RESET}")
    return data


def get_local_version():
    """
    Reads the local version file and returns (version, changelog).
    """
    if os.path.exists(VERSION_FILE):
        try:
            with open(VERSION_FILE, "r") as f:
                data_content = json.load(f)
                return data_content.get("version", "0.0.0"), data_content.get("changelog", [])
        except (json.JSONDecodeError, OSError) as e:
            logger.warning(f"{Colors.WARNING}[CONFIG] cannot read {VERSION_FILE}: {e}{Colors.RESET}")
    return "0.0.0", []


config = load_config()


def get_default(setting_str: str):
    return DEFAULTS[setting_str] if setting_str in DEFAULTS else ""


def _get_config_var(setting_str: str):
    return config.get(setting_str, get_default(setting_str))


def settings(overrides: dict = None) -> dict:
    """DEFAULTS, then config.toml, then `overrides`."""
    merged = deep_update(dict(DEFAULTS), config)
    return deep_update(merged, overrides or {})


TOOL_VERSION, CHANGELOG = get_local_version()

VERIFY_PERIODS = _get_config_var("verify_periods")
VERIFY_SEEDS = _get_config_var("verify_seeds")
GUARD_ACTION_COST = _get_config_var("guard_action_cost")
MAX_CALL_DEPTH = _get_config_var("max_call_depth")
PERIOD_VARIABLE = _get_config_var("period_variable")
GANTT_COLUMNS = _get_config_var("gantt_columns")
SVG_LANE_HEIGHT = _get_config_var("svg_lane_height")
SVG_CHART_WIDTH = _get_config_var("svg_chart_width")
LOG_LEVEL = _get_config_var("log_level")
