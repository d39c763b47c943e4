"""Flat ``key = value`` experiment configs with dotted keys.

Values are JSON literals (``3``, ``1e-8``, ``"direct"``, ``[0.1, 0.4]``);
bare words and comma-separated numbers are accepted as shorthand. ``#``
starts a comment. Unknown keys are rejected, and model-specific defaults
are filled in after parsing.
"""
from dataclasses import dataclass, fields
import json
import math
from pathlib import Path

from .errors import ConfigError
from .forward_models import KL_TRUE_THETA, HEAT_TRUE_KAPPA, theta_from_kappa

MODELS = ("unimodal", "bimodal", "heat2d", "kl")
MODEL_DIM = {"unimodal": 2, "bimodal": 2, "heat2d": 2, "kl": 3}

_HEAT_TRUE_THETA = [float(v) for v in theta_from_kappa(HEAT_TRUE_KAPPA)]

# per-model defaults; keys absent here fall back to _COMMON
_MODEL_DEFAULTS = {
    "unimodal": {"em.K": 3, "observation.mode": "explicit",
                 "observation.values": [-0.0173, -0.573], "noise.sigma": 0.1,
                 "prior.kind": "gaussian", "oracle.M": 100_000},
    "bimodal": {"em.K": 2, "observation.mode": "explicit", "observation.values": [4.2297],
                "noise.sigma": 1.0, "prior.kind": "gaussian", "oracle.M": 100_000},
    "heat2d": {"em.K": 2, "observation.mode": "synthesize",
               "observation.true_theta": _HEAT_TRUE_THETA, "noise.sigma": 0.005,
               "prior.kind": "uniform", "prior.lower": [-1.0, -1.0], "prior.upper": [1.0, 1.0],
               "oracle.M": 20_000},
    "kl": {"em.K": 3, "em.M": 100_000, "observation.mode": "synthesize",
           "observation.true_theta": list(KL_TRUE_THETA), "noise.sigma": 0.01,
           "prior.kind": "kl", "oracle.M": 1_000_000},
}

_COMMON = {
    "em.M": 10_000, "em.max_iter": 500, "em.tol": 1e-8, "em.weighting": "likelihood",
    "sampler.gamma": 1000.0, "sampler.method": "direct", "sampler.box_sigma": 6.0,
    "seeds.prior": 1, "seeds.em": 2, "seeds.sampler": 3, "seeds.noise": 4, "seeds.oracle": 5,
    "heat.n": 65, "kl.n_nodes": 101, "kl.N": 3, "kl.s": 1.0,
}

# key -> (kind, choices)
_SCHEMA = {
    "model": ("choice", MODELS),
    "observation.mode": ("choice", ("explicit", "synthesize")),
    "observation.values": ("vector", None),
    "observation.true_theta": ("vector", None),
    "noise.sigma": ("posfloat", None),
    "prior.kind": ("choice", ("gaussian", "uniform", "kl")),
    "prior.mean": ("vector", None),
    "prior.var": ("vector", None),
    "prior.lower": ("vector", None),
    "prior.upper": ("vector", None),
    "em.K": ("posint", None),
    "em.M": ("posint", None),
    "em.max_iter": ("posint", None),
    "em.tol": ("posfloat", None),
    "em.weighting": ("choice", ("likelihood", "literal")),
    "sampler.gamma": ("posfloat", None),
    "sampler.method": ("choice", ("direct", "thinning")),
    "sampler.box_sigma": ("posfloat", None),
    "oracle.M": ("posint", None),
    "seeds.prior": ("int", None),
    "seeds.em": ("int", None),
    "seeds.sampler": ("int", None),
    "seeds.noise": ("int", None),
    "seeds.oracle": ("int", None),
    "heat.n": ("posint", None),
    "kl.n_nodes": ("posint", None),
    "kl.N": ("posint", None),
    "kl.s": ("posfloat", None),
    "output.dir": ("str", None),
}

SEED_KEYS = ("seeds.prior", "seeds.em", "seeds.sampler", "seeds.noise", "seeds.oracle")


def _attr(key):
    return key.replace(".", "_")


@dataclass
class ExperimentConfig:
    model: str
    observation_mode: str = None
    observation_values: list = None
    observation_true_theta: list = None
    noise_sigma: float = None
    prior_kind: str = None
    prior_mean: list = None
    prior_var: list = None
    prior_lower: list = None
    prior_upper: list = None
    em_K: int = None
    em_M: int = None
    em_max_iter: int = None
    em_tol: float = None
    em_weighting: str = None
    sampler_gamma: float = None
    sampler_method: str = None
    sampler_box_sigma: float = None
    oracle_M: int = None
    seeds_prior: int = None
    seeds_em: int = None
    seeds_sampler: int = None
    seeds_noise: int = None
    seeds_oracle: int = None
    heat_n: int = None
    kl_n_nodes: int = None
    kl_N: int = None
    kl_s: float = None
    output_dir: str = None

    def get(self, key):
        return getattr(self, _attr(key))

    def to_dict(self):
        """Dotted-key mapping of every set value."""
        return {k: self.get(k) for k in _SCHEMA if self.get(k) is not None}

    @property
    def dim(self):
        if self.model == "kl":
            return int(self.kl_N)
        return MODEL_DIM[self.model]

    def seeds(self):
        return {k.split(".")[1]: self.get(k) for k in SEED_KEYS}


assert {_attr(k) for k in _SCHEMA} == {f.name for f in fields(ExperimentConfig)}


def _coerce(key, raw, where):
    kind, choices = _SCHEMA[key]

    def fail(msg):
        raise ConfigError(f"{where}: key {key!r}: {msg}")

    if kind in ("choice", "str"):
        if not isinstance(raw, str):
            fail(f"expected a string, got {raw!r}")
        if choices and raw not in choices:
            if key == "model":
                fail(f"unknown model {raw!r} (expected one of {', '.join(choices)})")
            fail(f"{raw!r} is not one of {', '.join(choices)}")
        return raw
    if kind in ("int", "posint"):
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or raw != int(raw):
            fail(f"expected an integer, got {raw!r}")
        val = int(raw)
        if kind == "posint" and val < 1:
            fail(f"expected a positive integer, got {val}")
        return val
    if kind == "posfloat":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            fail(f"expected a number, got {raw!r}")
        if not (math.isfinite(raw) and raw > 0):
            fail(f"expected a positive number, got {raw!r}")
        return float(raw)
    if kind == "vector":
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            raw = [raw]
        if not isinstance(raw, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            fail(f"expected a list of numbers, got {raw!r}")
        return [float(v) for v in raw]
    raise AssertionError(kind)


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        try:
            return [float(p) for p in text.split(",") if p.strip()]
        except ValueError:
            pass
    return text


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"{source}:{lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        values[key] = _coerce(key, _parse_value(raw), where)
    return build_config(values, source)


def build_config(values, source="<config>"):
    """Validate a dotted-key dict and fill the model defaults."""
    if "model" not in values:
        raise ConfigError(f"{source}: missing required key 'model'")
    for key, raw in values.items():
        if key not in _SCHEMA:
            raise ConfigError(f"{source}: unknown key {key!r}")
        values[key] = _coerce(key, raw, source)
    model = values["model"]
    merged = dict(_COMMON)
    merged.update(_MODEL_DEFAULTS[model])
    merged["output.dir"] = f"runs/{model}"
    merged.update(values)
    cfg = ExperimentConfig(**{_attr(k): v for k, v in merged.items()})
    _check_dimensions(cfg, source)
    return cfg


def _check_dimensions(cfg, source):
    d = cfg.dim
    for key in ("observation.true_theta", "prior.mean", "prior.var", "prior.lower", "prior.upper"):
        v = cfg.get(key)
        if v is not None and len(v) != d:
            raise ConfigError(f"{source}: key {key!r}: expected length {d}, got {len(v)}")
    if cfg.observation_mode == "explicit" and cfg.observation_values is None:
        raise ConfigError(f"{source}: explicit observation needs 'observation.values'")
    if cfg.observation_mode == "synthesize" and cfg.observation_true_theta is None:
        raise ConfigError(f"{source}: synthesized observation needs 'observation.true_theta'")
    if cfg.prior_kind == "kl" and cfg.model != "kl":
        raise ConfigError(f"{source}: prior.kind 'kl' is only valid for model 'kl'")


def parse_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def serialize_config(cfg):
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in cfg.to_dict().items())


def default_config(model, **overrides):
    values = {"model": model}
    values.update(overrides)
    return build_config(values)
