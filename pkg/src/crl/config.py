"""Experiment configuration: training settings plus seeds and file locations.

Stored as flat ``key=value`` text.  Values resolve flags > file > defaults.
"""
import os
from dataclasses import dataclass, field, fields

from .training.config import TrainConfig, parse_flat

OUTPUT_ROOT_ENV = "CRL_OUTPUT_ROOT"
RUN_KEYS = ("seeds", "data", "data_seed", "output")


@dataclass
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: int = 1
    data: str = ""
    data_seed: int = 0
    output: str = ""

    def __post_init__(self):
        if self.seeds < 1:
            raise ValueError("seeds must be at least 1")

    def seed_configs(self):
        """One TrainConfig per run, seeds ``train.seed .. train.seed + seeds - 1``."""
        return [self.train.replace(seed=self.train.seed + i) for i in range(self.seeds)]

    def to_text(self):
        head = "".join(f"{k}={getattr(self, k)}\n" for k in RUN_KEYS)
        return head + self.train.to_text()

    @classmethod
    def from_dict(cls, values):
        values = {k.replace("-", "_"): v for k, v in values.items()}
        run = {k: values.pop(k) for k in RUN_KEYS if k in values}
        for k in ("seeds", "data_seed"):
            if k in run:
                run[k] = int(run[k])
        return cls(TrainConfig.from_dict(values), **run)

    @classmethod
    def from_text(cls, text):
        return cls.from_dict(parse_flat(text))


def resolve(file_text=None, overrides=None):
    """Merge defaults, then the file's keys, then explicit overrides."""
    values = parse_flat(file_text) if file_text else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_dict(values)


def output_root():
    return os.environ.get(OUTPUT_ROOT_ENV, "runs")


def config_keys():
    return list(RUN_KEYS) + [f.name for f in fields(TrainConfig)]
