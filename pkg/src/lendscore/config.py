"""Run configuration: a flat ``key = value`` text file plus flag overrides.

File format: one ``key = value`` per line, ``#`` starts a comment, blank
lines are ignored. Keys use dots for grouping (``stage1.steps``), and
``colmap.<field> = <csv column>`` remaps an input column. Unknown keys are
an error. Precedence, lowest first: built-in defaults, the config file,
command-line flags.

One ``seed`` drives the generator, the train/test split, resampling and
both stages, so a run is fixed by its config.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from .errors import LendscoreError
from .features import FeatureConfig
from .resample import Method, ResamplePlan
from .synth import SynthConfig
from .widedeep import Components, Loss, TrainConfig


class ConfigError(LendscoreError):
    exit_code = 1


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1
    out_dir: str = "out"
    loans: str = ""
    payments: str = ""
    listings: str = ""
    models: str = ""
    cohort_first_year: int = 2008
    cohort_last_year: int = 2013
    train_fraction: float = 0.8
    validation_fraction: float = 0.0
    resample: str = "smote"
    k_neighbors: int = 5
    gamma: float = 0.5
    top_k: int = 30
    never_indicator: bool = True
    evaluate_methods: tuple = ("undersample", "oversample", "smote")
    synth_n_loans: int = 20000
    synth_default_rate_target: float = 0.15
    synth_signal: float = 3.0
    synth_prepay_fraction: float = 0.2
    stage1_steps: int = 1000
    stage1_batch_size: int = 100
    stage1_learning_rate: float = 0.002
    stage1_dropout_rate: float = 0.2
    stage1_hidden_layers: tuple = (100, 50, 10)
    stage1_components: str = "wide_deep"
    stage1_reduction: str = "sum"
    stage2_steps: int = 1000
    stage2_batch_size: int = 100
    stage2_learning_rate: float = 0.002
    stage2_dropout_rate: float = 0.2
    stage2_hidden_layers: tuple = (100, 50, 10)
    stage2_components: str = "wide_deep"
    stage2_reduction: str = "sum"
    cart_max_depth: int = 6
    cart_min_leaf: int = 20
    colmap: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            Method(self.resample)
            for m in self.evaluate_methods:
                Method(m)
            Components(self.stage1_components)
            Components(self.stage2_components)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if not 0 <= self.gamma <= 1:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")

    def synth_config(self):
        return SynthConfig(
            n_loans=self.synth_n_loans,
            default_rate_target=self.synth_default_rate_target,
            seed=self.seed,
            prepay_fraction=self.synth_prepay_fraction,
            first_year=self.cohort_first_year,
            last_year=self.cohort_last_year,
            signal=self.synth_signal,
        )

    def resample_plan(self, method=None):
        return ResamplePlan(Method(method or self.resample), self.k_neighbors, self.seed)

    def feature_config(self):
        return FeatureConfig(never_indicator=self.never_indicator)

    def train_config(self, stage, components=None):
        g = lambda k: getattr(self, f"stage{stage}_{k}")
        return TrainConfig(
            steps=g("steps"),
            batch_size=g("batch_size"),
            learning_rate=g("learning_rate"),
            dropout_rate=g("dropout_rate"),
            hidden_layers=tuple(g("hidden_layers")),
            seed=self.seed,
            loss=Loss.CROSS_ENTROPY if stage == 1 else Loss.MSE,
            components=Components(components or g("components")),
            reduction=g("reduction"),
        )

    def column_map(self):
        from .ingest import default_column_map

        cm = default_column_map()
        unknown = set(self.colmap) - set(cm)
        if unknown:
            raise ConfigError(f"colmap names unknown fields: {sorted(unknown)}")
        cm.update(self.colmap)
        return cm

    def to_dict(self):
        """Resolved config in file-key form (dots), JSON-ready."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out[file_key(f.name)] = dict(sorted(v.items())) if isinstance(v, dict) else v
        return out


_GROUPS = ("synth_", "stage1_", "stage2_", "cart_", "evaluate_")


def file_key(name):
    for g in _GROUPS:
        if name.startswith(g):
            return g[:-1] + "." + name[len(g):]
    return name


def field_name(key):
    return key.replace(".", "_")


def _coerce(f, text):
    text = text.strip()
    default = f.default if f.default is not dataclasses.MISSING else None
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {text!r}")
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            return tuple(int(t) for t in items) if default and isinstance(default[0], int) else tuple(items)
    except ValueError as e:
        raise ConfigError(f"{file_key(f.name)}: {e}") from None
    return text


_FIELDS = {f.name: f for f in fields(RunConfig)}


def parse_pairs(pairs):
    """Turn ``(key, text)`` pairs into RunConfig keyword arguments."""
    kwargs, colmap = {}, {}
    for key, text in pairs:
        key = key.strip()
        if key.startswith("colmap."):
            colmap[key[len("colmap."):]] = text.strip()
            continue
        name = field_name(key)
        if name not in _FIELDS or name == "colmap":
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[name] = _coerce(_FIELDS[name], text)
    if colmap:
        kwargs["colmap"] = colmap
    return kwargs


def read_config_file(path):
    pairs = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = line.split("=", 1)
        pairs.append((key, value))
    return parse_pairs(pairs)


def resolve(path=None, overrides=None):
    """Defaults, then the file at ``path``, then ``overrides`` (already typed)."""
    kwargs = read_config_file(path) if path else {}
    for k, v in (overrides or {}).items():
        if v is not None:
            kwargs[k] = v
    return RunConfig(**kwargs)
