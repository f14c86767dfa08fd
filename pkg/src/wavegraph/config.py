"""Run configuration: one flat key set shared by config files and flags.

Files use ``key = value`` lines with '#' comments; every key is also a
``--key value`` CLI flag, and flags win over file values, which win over
defaults. Unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated reals, got {text!r}") from exc


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {text!r}") from exc


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"expected a real, got {text!r}") from exc


@dataclass
class RunConfig:
    mode: str = "gwcn"
    data: str = ""
    out: str = "runs/out"
    scales: tuple[float, ...] = (0.7, 1.0)
    n_layers: int = 2
    hidden_dims: tuple[int, ...] = (16,)
    cheby_order: int = 40
    wavelet_threshold: float = 1e-4
    coeff_method: str = "quadrature"
    dropout_rate: float = 0.5
    activation: str = "relu"
    p_init: str = "random"
    learning_rate: float = 0.01
    max_epochs: int = 200
    patience: int = 50
    seed: int = 0
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    lambda_wm: float = 0.0
    split: str = "fractional"
    per_class: int = 20
    n_val: int = 500
    n_test: int = 1000
    train_frac: float = 0.5
    val_frac: float = 0.3
    row_normalize: bool = True
    synth_nodes: int = 400
    synth_classes: int = 4
    synth_modalities: int = 2
    synth_dims: tuple[int, ...] = (16, 24)
    synth_noise: float = 0.6
    synth_k: int = 8

    def expanded_hidden_dims(self) -> tuple[int, ...]:
        """A single width broadcasts to every layer."""
        if len(self.hidden_dims) == 1 and self.n_layers > 1:
            return self.hidden_dims * self.n_layers
        return self.hidden_dims


_PARSERS = {
    str: lambda s: s.strip(),
    int: _parse_int,
    float: _parse_float,
    bool: _parse_bool,
    tuple[float, ...]: _parse_floats,
    tuple[int, ...]: _parse_ints,
}

_FIELD_TYPES: dict[str, object] = {
    "mode": str, "data": str, "out": str, "scales": tuple[float, ...],
    "n_layers": int, "hidden_dims": tuple[int, ...], "cheby_order": int,
    "wavelet_threshold": float, "coeff_method": str, "dropout_rate": float,
    "activation": str, "p_init": str, "learning_rate": float,
    "max_epochs": int, "patience": int, "seed": int, "alpha": float,
    "beta": float, "gamma": float, "lambda_wm": float, "split": str,
    "per_class": int, "n_val": int, "n_test": int, "train_frac": float,
    "val_frac": float, "row_normalize": bool, "synth_nodes": int,
    "synth_classes": int, "synth_modalities": int,
    "synth_dims": tuple[int, ...], "synth_noise": float, "synth_k": int,
}

CONFIG_KEYS = tuple(_FIELD_TYPES)


def parse_value(key: str, text: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    return _PARSERS[_FIELD_TYPES[key]](text)


def parse_config_file(path: str) -> dict[str, object]:
    values: dict[str, object] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for lineno, line in enumerate(raw, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, text = stripped.partition("=")
        key = key.strip()
        try:
            values[key] = parse_value(key, text.strip())
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return values


def build_run_config(file_values: dict[str, object] | None,
                     flag_values: dict[str, object] | None) -> RunConfig:
    """Merge defaults < file < flags."""
    cfg = RunConfig()
    for source in (file_values or {}, flag_values or {}):
        for key, value in source.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    return cfg
