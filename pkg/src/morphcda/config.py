"""Language profiles and run configuration (plain ``key = value`` files)."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from .treebank import MorphTag

PROFILES = ("spanish", "french", "italian", "hebrew")


class ConfigError(ValueError):
    pass


def parse_kv(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True)
class GenderConfig:
    feature: str = "Gender"
    values: tuple = ("Masc", "Fem")

    def __post_init__(self):
        if len(self.values) != 2 or self.values[0] == self.values[1]:
            raise ConfigError(f"need two distinct gender values, got {self.values}")

    @property
    def masc(self) -> str:
        return self.values[0]

    @property
    def fem(self) -> str:
        return self.values[1]

    def of(self, tag: MorphTag) -> str | None:
        g = tag.get(self.feature)
        return g if g in self.values else None

    def other(self, value: str) -> str:
        return self.values[1] if value == self.values[0] else self.values[0]


@dataclass
class LanguageProfile:
    name: str
    gender: GenderConfig
    suffix_rules_text: str
    baseline_rules_text: str
    baseline_weight: float
    adjectives: list  # (english, masc, fem)
    determiners: tuple  # (masc, fem) definite singular articles for query phrases

    def suffix_rules(self):
        from .pipeline import SuffixRules
        return SuffixRules.parse(self.suffix_rules_text)

    def baseline_rules(self):
        from .model import BaselineRules
        return BaselineRules.parse(self.baseline_rules_text, weight=self.baseline_weight,
                                   features=(self.gender.feature, "Number"))


def _profile_dir(name_or_path) -> Path:
    p = Path(name_or_path)
    if p.is_dir():
        return p
    if str(name_or_path) in PROFILES:
        return Path(str(resources.files("morphcda") / "data" / "profiles" / str(name_or_path)))
    raise ConfigError(f"unknown language profile {name_or_path!r} (built-in: {', '.join(PROFILES)})")


def load_profile(name_or_path) -> LanguageProfile:
    d = _profile_dir(name_or_path)
    try:
        kv = parse_kv((d / "profile.cfg").read_text(encoding="utf-8"), str(d / "profile.cfg"))
        suffix = (d / kv.get("suffix_rules", "suffix_rules.tsv")).read_text(encoding="utf-8")
        baseline = (d / kv.get("baseline_rules", "baseline_rules.txt")).read_text(encoding="utf-8")
        adj_text = (d / kv.get("adjectives", "adjectives.tsv")).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"incomplete language profile in {d}: {exc}") from None
    adjectives = []
    for line in adj_text.splitlines():
        if line.strip() and not line.startswith("#"):
            cols = line.split("\t")
            if len(cols) != 3:
                raise ConfigError(f"{d}/adjectives.tsv: expected english, masc, fem columns")
            adjectives.append(tuple(c.strip() for c in cols))
    values = tuple(v.strip() for v in kv.get("gender_values", "Masc,Fem").split(","))
    dets = tuple(v.strip() for v in kv.get("determiners", "").split(","))
    return LanguageProfile(
        name=kv.get("name", d.name),
        gender=GenderConfig(kv.get("gender_feature", "Gender"), values),
        suffix_rules_text=suffix,
        baseline_rules_text=baseline,
        baseline_weight=float(kv.get("baseline_weight", "1.0")),
        adjectives=adjectives,
        determiners=dets if len(dets) == 2 else ("", ""),
    )


@dataclass
class RunConfig:
    language: str = "spanish"
    log_alpha: float = 1.0
    unknown_subtags: str = "error"  # or "drop"
    include_propn: bool = False
    max_variants: int = 8
    ngram_order: int = 3
    ngram_delta: float = 0.1
    parameterization: str = "linear"
    learning_rate: float = 0.005
    weight_decay: float = 0.0001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    stop_delta_bits: float = 1e-5
    max_epochs: int = 50
    batch_size: int = 32
    training_domain: str = "full"
    seed: int = 0
    profile: LanguageProfile | None = field(default=None, repr=False)

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    @property
    def drop_unknown(self) -> bool:
        return self.unknown_subtags == "drop"

    def validate(self) -> "RunConfig":
        if not self.log_alpha > 0:
            raise ConfigError("log_alpha must be > 0 (alpha > 1)")
        if self.unknown_subtags not in ("error", "drop"):
            raise ConfigError("unknown_subtags must be 'error' or 'drop'")
        if self.parameterization not in ("linear", "neural"):
            raise ConfigError("parameterization must be 'linear' or 'neural'")
        if self.ngram_order < 1 or self.ngram_delta <= 0:
            raise ConfigError("ngram_order must be >= 1 and ngram_delta > 0")
        if self.max_variants < 1:
            raise ConfigError("max_variants must be >= 1")
        try:
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.profile = load_profile(self.language)
        return self

    def train_config(self):
        from .training import TrainConfig
        return TrainConfig(
            learning_rate=self.learning_rate, weight_decay=self.weight_decay,
            adam_betas=(self.adam_beta1, self.adam_beta2), adam_epsilon=self.adam_epsilon,
            stop_delta_bits=self.stop_delta_bits, max_epochs=self.max_epochs,
            batch_size=self.batch_size, seed=self.seed, domain=self.training_domain)


def load_run_config(path=None, **overrides) -> RunConfig:
    values = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path} does not exist")
        with open(path, encoding="utf-8") as f:
            values = parse_kv(f.read(), str(path))
    types = {f.name: f.type for f in fields(RunConfig) if f.name != "profile"}
    kwargs = {}
    for key, raw in values.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, raw, types[key])
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**kwargs).validate()


def _coerce(key, raw: str, typ):
    typ = str(typ)
    try:
        if typ == "bool":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw
