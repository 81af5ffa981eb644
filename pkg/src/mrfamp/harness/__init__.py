"""Experiment harness: configs, seeded streams, persistence, plots and the CLI."""

from .config import ExperimentConfig, dump_config, load_config, parse_config
from .rng import stream, stream_seed

__all__ = ["ExperimentConfig", "load_config", "parse_config", "dump_config", "stream", "stream_seed"]
