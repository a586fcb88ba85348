"""Flat key-value config files and builders for the shipped defaults.

One format serves every config family: ``key = value`` lines, ``#`` comments,
dotted keys for grouped fields (``data_size_bits.min``).  The documented keys
are listed in the README; unknown keys are rejected to catch typos.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .model import DEFAULT_RANGES, CostWeights, EdgeParams, VehicleParams, validate_ranges
from .split import AccuracyModel, InferenceScenario, LayerProfile

OFFLOAD_KEYS = {
    "n_vehicles",
    "data_size_bits.min", "data_size_bits.max",
    "cpu_cycles.min", "cpu_cycles.max",
    "local_freq", "local_freq.min", "local_freq.max",
    "tx_power", "tx_power.min", "tx_power.max",
    "bandwidth", "bandwidth.min", "bandwidth.max",
    "gain.min", "gain.max",
    "noise_power", "edge_freq", "kappa", "w_time", "w_energy",
}

TRAIN_KEYS = {
    "chi_c", "chi_r", "chi_l", "epochs", "batch_size", "learning_rate",
    "adam_beta1", "adam_beta2", "adam_epsilon", "seed", "train_fraction",
    "hidden_sizes",
}

SPLIT_KEYS = {
    "input_bytes", "n_layers", "split_index", "eta_step",
    "local_freq", "tx_power", "gain", "bandwidth", "noise_power", "edge_freq",
    "kappa", "w_time", "w_energy",
    "acc_snn_good", "acc_snn_bad", "acc_full", "miss_penalty",
}


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value in {raw!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_kv_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_kv_text(text, source=str(path))


def default_config_text(name: str) -> str:
    """Text of a shipped default config (``offload``, ``train`` or ``split``)."""
    try:
        return (resources.files("edgeoffload.data") / f"{name}_default.cfg").read_text("utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"no shipped default config named {name!r}") from exc


def _as_float(kv: dict[str, str], key: str) -> float:
    try:
        return float(kv[key])
    except KeyError as exc:
        raise ConfigError(f"missing config key {key!r}") from exc
    except ValueError as exc:
        raise ConfigError(f"config key {key!r} is not a number: {kv[key]!r}") from exc


def _as_int(kv: dict[str, str], key: str) -> int:
    v = _as_float(kv, key)
    if v != int(v):
        raise ConfigError(f"config key {key!r} must be an integer, got {kv[key]!r}")
    return int(v)


def _check_keys(kv: dict[str, str], allowed: set[str], family: str) -> None:
    unknown = set(kv) - allowed
    if unknown:
        raise ConfigError(f"unknown {family} config keys: {sorted(unknown)}")


# ---------------------------------------------------------------------------
# offload / instance-generation config
# ---------------------------------------------------------------------------

def offload_config(kv: dict[str, str] | None = None) -> tuple[int, dict[str, tuple[float, float]]]:
    """(n_vehicles, ranges) from a key-value mapping; defaults fill the gaps."""
    kv = dict(kv or {})
    _check_keys(kv, OFFLOAD_KEYS, "offload")
    n_vehicles = _as_int(kv, "n_vehicles") if "n_vehicles" in kv else 2
    ranges = dict(DEFAULT_RANGES)
    for name in ranges:
        if f"{name}.min" in kv or f"{name}.max" in kv:
            ranges[name] = (_as_float(kv, f"{name}.min"), _as_float(kv, f"{name}.max"))
        elif name in kv:
            v = _as_float(kv, name)
            ranges[name] = (v, v)
    validate_ranges(ranges)
    return n_vehicles, ranges


# ---------------------------------------------------------------------------
# training config
# ---------------------------------------------------------------------------

def train_config(kv: dict[str, str] | None = None, **overrides):
    from .mtl import TrainConfig

    kv = dict(kv or {})
    _check_keys(kv, TRAIN_KEYS, "train")
    if "chi_l" in kv:  # accepted alias for the regression weight
        if "chi_r" in kv:
            raise ConfigError("give chi_r or its alias chi_l, not both")
        kv["chi_r"] = kv.pop("chi_l")
    kwargs: dict = {}
    for key in ("chi_c", "chi_r", "learning_rate", "adam_beta1", "adam_beta2",
                "adam_epsilon", "train_fraction"):
        if key in kv:
            kwargs[key] = _as_float(kv, key)
    for key in ("epochs", "batch_size", "seed"):
        if key in kv:
            kwargs[key] = _as_int(kv, key)
    if "hidden_sizes" in kv:
        try:
            kwargs["hidden_sizes"] = tuple(int(s) for s in kv["hidden_sizes"].split(",") if s.strip())
        except ValueError as exc:
            raise ConfigError(f"bad hidden_sizes {kv['hidden_sizes']!r}") from exc
    kwargs.update(overrides)
    return TrainConfig(**kwargs)


# ---------------------------------------------------------------------------
# split-inference config
# ---------------------------------------------------------------------------

def split_scenario(kv: dict[str, str] | None = None) -> tuple[InferenceScenario, float]:
    """(scenario, eta grid step) from a key-value mapping."""
    if kv is None:
        kv = parse_kv_text(default_config_text("split"), "<split defaults>")
    layer_keys = {k for k in kv if k.startswith("layer")}
    _check_keys({k: v for k, v in kv.items() if k not in layer_keys}, SPLIT_KEYS, "split")
    n_layers = _as_int(kv, "n_layers")
    layers = []
    for i in range(1, n_layers + 1):
        layers.append((_as_float(kv, f"layer{i}.cycles"), _as_float(kv, f"layer{i}.bytes")))
    profile = LayerProfile(input_size=_as_float(kv, "input_bytes"), layers=tuple(layers))
    total_cycles = sum(c for c, _ in profile.layers)
    vehicle = VehicleParams(
        data_size=profile.input_size * 8.0,
        cpu_cycles=total_cycles,
        local_freq=_as_float(kv, "local_freq"),
        tx_power=_as_float(kv, "tx_power"),
        channel_gain=_as_float(kv, "gain"),
        bandwidth=_as_float(kv, "bandwidth"),
    )
    edge = EdgeParams(edge_freq=_as_float(kv, "edge_freq"), noise_power=_as_float(kv, "noise_power"))
    weights = CostWeights(
        w_time=_as_float(kv, "w_time"), w_energy=_as_float(kv, "w_energy"), kappa=_as_float(kv, "kappa")
    )
    acc = AccuracyModel(
        acc_snn_good=_as_float(kv, "acc_snn_good"),
        acc_snn_bad=_as_float(kv, "acc_snn_bad"),
        acc_full=_as_float(kv, "acc_full"),
        miss_penalty=_as_float(kv, "miss_penalty"),
    )
    scenario = InferenceScenario(
        vehicle=vehicle,
        edge=edge,
        weights=weights,
        profile=profile,
        acc=acc,
        split_index=_as_int(kv, "split_index"),
    )
    eta_step = _as_float(kv, "eta_step") if "eta_step" in kv else 0.05
    if not 0.0 < eta_step <= 1.0:
        raise ConfigError(f"eta_step must be in (0, 1], got {eta_step!r}")
    return scenario, eta_step
