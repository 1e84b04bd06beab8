"""
Experiment configuration.

Precedence: built-in defaults < preset < config file < command-line flags.
Config files hold one ``key = value`` per line; ``#`` starts a comment.  Keys
are the field names of ``ExperimentConfig`` and match the CLI flags.
"""

from dataclasses import dataclass, fields, replace

from .errors import ConfigError
from .models import ModelSpec
from .training import TrainConfig

SMALL_CATEGORIES = "alt.atheism,comp.graphics,sci.med,soc.religion.christian"

PRESETS = {
    "paper": {},
    "small": dict(categories=SMALL_CATEGORIES, sl=150, embed_dim=50, lstm_hidden=64,
                  hidden=64, epochs=5),
}


@dataclass
class ExperimentConfig:
    preset: str = "paper"
    data_root: str = ""
    out_dir: str = "run"
    categories: str = ""            # comma-separated; empty = every category
    theta: float = 0.85
    sl: int = 0                     # 0 = choose from the length distribution
    min_count: int = 5
    test_fraction: float = 0.1
    embed_source: str = "train"     # train | load | random
    embed_path: str = ""
    embed_dim: int = 200
    sg_window: int = 5
    sg_negatives: int = 5
    sg_epochs: int = 5
    sg_lr: float = 0.025
    kind: str = "wrnn"
    lstm_hidden: int = 128
    hidden: int = 128
    candidate: str = "tanh"
    pool_norm: str = "none"
    freeze_embeddings: bool = False
    lr: float = 0.01
    batch_size: int = 128
    epochs: int = 10
    l2: float = 0.01
    clip_norm: float = 5.0
    seed: int = 1
    deterministic: bool = False
    threads: int = 0                # 0 = all available cores

    def category_list(self):
        return [c.strip() for c in self.categories.split(",") if c.strip()]

    def train_config(self):
        return TrainConfig(lr=self.lr, batch_size=self.batch_size, epochs=self.epochs, l2=self.l2,
                           clip_norm=self.clip_norm, seed=self.seed,
                           deterministic=self.deterministic)

    def model_spec(self, seq_len, vocab_size, n_classes):
        return ModelSpec(kind=self.kind, seq_len=seq_len, vocab_size=vocab_size,
                         embed_dim=self.embed_dim, lstm_hidden=self.lstm_hidden,
                         hidden=self.hidden, n_classes=n_classes, candidate=self.candidate,
                         pool_norm=self.pool_norm, freeze_embeddings=self.freeze_embeddings)


FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def coerce(key, value):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    typ = FIELD_TYPES[key]
    if not isinstance(value, str):
        return value
    try:
        if typ is bool:
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if typ is int:
            return int(value)
        if typ is float:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value.strip()


def read_config_file(path):
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        key, sep, value = text.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip()
        values[key] = coerce(key, value.strip())
    return values


def resolve(file_values=None, flag_values=None):
    """Build the effective config from the layered sources."""
    file_values = dict(file_values or {})
    flag_values = {k: v for k, v in (flag_values or {}).items() if v is not None}
    preset = flag_values.get("preset", file_values.get("preset", "paper"))
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    cfg = replace(ExperimentConfig(), preset=preset, **PRESETS[preset])
    for layer in (file_values, flag_values):
        cfg = replace(cfg, **{k: coerce(k, v) for k, v in layer.items()})
    validate(cfg)
    return cfg


def validate(cfg):
    if not 0 < cfg.theta < 1:
        raise ConfigError("theta must lie in (0, 1)")
    if not 0 < cfg.test_fraction < 1:
        raise ConfigError("test_fraction must lie in (0, 1)")
    if cfg.embed_source not in ("train", "load", "random"):
        raise ConfigError("embed_source must be train, load or random")
    if cfg.embed_source == "load" and not cfg.embed_path:
        raise ConfigError("embed_source = load needs embed_path")
    if cfg.sl < 0 or cfg.min_count < 1:
        raise ConfigError("sl must be >= 0 and min_count >= 1")
    try:
        cfg.train_config()
        cfg.model_spec(max(cfg.sl, 1), 2, 2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def dump(cfg):
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(cfg))
