"""Configuration, orchestration and data export."""

from .config import RunConfig, config_hash, dump_config, load_config, parse_config
from .runner import run

__all__ = ["RunConfig", "config_hash", "dump_config", "load_config", "parse_config", "run"]
