"""Run configuration: one flat ``key = value`` file, task-dependent defaults."""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

TASKS = ("frame_srl", "propbank_srl", "coref")

TASK_DEFAULTS = {
    "frame_srl": dict(max_span_width=15, delta=1.0, word_dim=300, freeze_embeddings=True,
                      class1=("NP", "PP")),
    "propbank_srl": dict(max_span_width=13, delta=1.0, word_dim=100, freeze_embeddings=False,
                         class1=("NP", "PP")),
    "coref": dict(max_span_width=10, delta=0.1, word_dim=300, freeze_embeddings=True,
                  class1=("NP",)),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "frame_srl"
    scaffold_scheme: str = "none"
    delta: float = 1.0
    max_span_width: int = 15
    class1: tuple = ("NP", "PP")
    word_dim: int = 300
    target_dim: int = 100
    hidden_dim: int = 300
    layers: int = 6
    lstm_dropout: float = 0.1
    freeze_embeddings: bool = True
    ffn_dim: int = 150
    ffn_depth: int = 2
    ffn_dropout: float = 0.2
    feature_dim: int = 20
    antecedent_window: int = 50
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    clip_norm: float = 1.0
    epochs: int = 20
    patience: int = 0
    stop_at: float = 0.0
    seed: int = 1
    train_path: str = ""
    dev_path: str = ""
    treebank_path: str = ""
    embeddings_path: str = ""
    out_dir: str = "run"
    figures: bool = True

    def __post_init__(self):
        self.class1 = tuple(self.class1)
        self.validate()

    def validate(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if self.max_span_width < 1:
            raise ConfigError("max_span_width must be >= 1")
        for name in ("lr", "clip_norm"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")

    @property
    def is_srl(self):
        return self.task != "coref"

    @property
    def early_stopping_metric(self):
        return "conll_average" if self.task == "coref" else "argument_f1"

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["class1"] = list(self.class1)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def for_task(cls, task, **overrides):
        if task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
        values = dict(TASK_DEFAULTS[task], task=task)
        values.update(overrides)
        return cls(**values)


def _coerce(name, raw):
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    if name not in fields:
        raise ConfigError(f"unknown config key {name!r}")
    kind = type(getattr(RunConfig(), name))
    raw = raw.strip()
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
        if kind is tuple:
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return {k: _coerce(k, v) for k, v in parser["run"].items()}


def load_config(path=None, **overrides):
    """Defaults for the task, then the file, then explicit overrides (None values ignored)."""
    values = {}
    if path:
        with open(path, encoding="utf-8") as f:
            values = parse_config_text(f.read())
    values.update({k: v for k, v in overrides.items() if v is not None})
    task = values.pop("task", "frame_srl")
    return RunConfig.for_task(task, **values)


def format_config(config):
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            value = ",".join(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
