"""INI-style run configuration (``[data]``, ``[model]``, ``[train]``).

Errors carry the file line of the offending key.
"""

import configparser
import os
import re
from dataclasses import dataclass, field, fields, replace

from .activations import CATALOG, make_activation
from .data import gen_two_moons, load_csv_dataset, load_idx_images
from .errors import ConfigError, FracActError
from .nn import MlpModel, TrainConfig


@dataclass
class DataConfig:
    kind: str = "two_moons"
    n: int = 1000
    noise: float = 0.1
    seed: int = 0
    train_path: str | None = None
    test_path: str | None = None
    label_column: int = -1
    header: bool = False
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    limit: int | None = None
    test_limit: int | None = None
    # z-score features with train-split statistics, then multiply by input_scale
    standardize: bool = False
    input_scale: float = 1.0


@dataclass
class ModelConfig:
    hidden: tuple = (32, 32, 32, 32)
    activation: str = "fsig"
    terms: int | None = None
    step: float | None = None
    order_init: float | None = None
    beta_init: float = 1.0
    prelu_slope: float = 0.25
    per_channel: bool = False


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    base_dir: str = "."

    def activation_spec(self):
        m = self.model
        kw = dict(terms=m.terms, step=m.step, prelu_slope=m.prelu_slope)
        if CATALOG[m.activation].get("falu_beta") is not None:
            kw["falu_beta"] = m.beta_init
        return make_activation(m.activation, **kw)

    def with_terms(self, N):
        return replace(self, model=replace(self.model, terms=int(N), step=None))


_SECTIONS = {"data": DataConfig, "model": ModelConfig, "train": TrainConfig}
_BOOL = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}


def _line_index(text):
    """Map (section, key) -> 1-based line number."""
    where = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip().lower()
            where[(section, None)] = lineno
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            where[(section, m.group(1).strip().lower())] = lineno
    return where


def _convert(raw, ftype, default):
    t = str(ftype)
    if raw.strip() == "" and ("None" in t or default is None):
        return None
    if "tuple" in t:
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if "bool" in t:
        try:
            return _BOOL[raw.strip().lower()]
        except KeyError:
            raise ValueError(f"expected a boolean, got {raw!r}") from None
    if "int" in t and "float" not in t:
        return int(raw)
    if "float" in t:
        return float(raw)
    return raw.strip()


def parse_config(text, path="<config>"):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], path, getattr(exc, "lineno", None)) from None
    lines = _line_index(text)
    out = {}
    for section in cp.sections():
        key = section.lower()
        if key not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", path, lines.get((key, None)))
        cls = _SECTIONS[key]
        types = {f.name: (f.type, f.default) for f in fields(cls)}
        kw = {}
        for name, raw in cp.items(section):
            line = lines.get((key, name))
            if name not in types:
                raise ConfigError(f"unknown key {name!r} in [{section}]", path, line)
            ftype, default = types[name]
            try:
                val = _convert(raw, ftype, default)
                if cls is TrainConfig and name == "lr_milestones":
                    val = tuple(float(v) for v in val)
                if cls is ModelConfig and name == "hidden":
                    val = tuple(int(v) for v in val)
            except ValueError as exc:
                raise ConfigError(f"bad value for {name!r}: {exc}", path, line) from None
            kw[name] = val
        try:
            out[key] = cls(**kw)
        except (FracActError, ValueError, TypeError) as exc:
            raise ConfigError(f"[{section}]: {exc}", path, lines.get((key, None))) from None
    cfg = RunConfig(
        data=out.get("data", DataConfig()),
        model=out.get("model", ModelConfig()),
        train=out.get("train", TrainConfig()),
        base_dir=os.path.dirname(os.path.abspath(path)) if path != "<config>" else ".",
    )
    if cfg.model.activation not in CATALOG:
        raise ConfigError(f"unknown activation {cfg.model.activation!r}", path, lines.get(("model", "activation")))
    try:
        cfg.activation_spec()
    except FracActError as exc:
        raise ConfigError(str(exc), path, lines.get(("model", None))) from None
    return cfg


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, path)


def _resolve(cfg, p):
    return p if p is None or os.path.isabs(p) else os.path.join(cfg.base_dir, p)


def build_datasets(cfg):
    train, test = _load_datasets(cfg)
    d = cfg.data
    if d.standardize:
        mu = train.features.mean(axis=0)
        sd = train.features.std(axis=0)
        sd[sd == 0] = 1.0
        train.features = (train.features - mu) / sd
        test.features = (test.features - mu) / sd
    if d.input_scale != 1.0:
        train.features = train.features * d.input_scale
        test.features = test.features * d.input_scale
    return train, test


def _load_datasets(cfg):
    d = cfg.data
    if d.kind == "two_moons":
        return gen_two_moons(d.n, d.noise, d.seed)
    if d.kind == "csv":
        if not d.train_path or not d.test_path:
            raise ConfigError("csv data needs train_path and test_path")
        train = load_csv_dataset(_resolve(cfg, d.train_path), d.label_column, d.header, "train")
        test = load_csv_dataset(_resolve(cfg, d.test_path), d.label_column, d.header, "test")
        k = max(train.n_classes, test.n_classes)
        train.n_classes = test.n_classes = k
        return train, test
    if d.kind == "idx":
        train = load_idx_images(_resolve(cfg, d.train_images), _resolve(cfg, d.train_labels), d.limit, "train")
        test = load_idx_images(_resolve(cfg, d.test_images), _resolve(cfg, d.test_labels), d.test_limit, "test")
        return train, test
    raise ConfigError(f"unknown data kind {d.kind!r}")


def build_model(cfg, n_inputs, n_classes):
    sizes = [n_inputs, *cfg.model.hidden, n_classes]
    return MlpModel.build(
        sizes,
        cfg.activation_spec(),
        seed=cfg.train.seed,
        fdo_init=cfg.train.fdo_init,
        per_channel=cfg.model.per_channel,
        order_init=cfg.model.order_init,
    )
