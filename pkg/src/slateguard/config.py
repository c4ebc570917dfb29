"""Experiment configuration: one JSON file, validated in full before any work.

Validation never stops at the first problem; every error is collected and
reported at once so a config can be fixed in one pass.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .constraints import ConstraintSet
from .mf import Hyperparams
from .proposer import EndpointConfig, ProposerConfig, ProposerKind


class ConfigError(Exception):
    def __init__(self, errors: list[str]) -> None:
        self.errors = list(errors)
        super().__init__("; ".join(errors))


@dataclass(frozen=True)
class PipelineConfig:
    data_dir: Path
    output_dir: Path
    split_seed: int = 13
    holdout_fraction: float = 0.2
    head_fraction: float = 0.2
    constraints: ConstraintSet = field(
        default_factory=lambda: ConstraintSet(tau="0.3", kappa="0.7", g_min=3, n=10)
    )
    window_size: int = 80
    sweep_window_sizes: tuple[int, ...] = (20, 40, 60, 80, 100)
    model: Hyperparams = field(default_factory=Hyperparams)
    proposer: ProposerConfig = field(
        default_factory=lambda: ProposerConfig(kind=ProposerKind.HEURISTIC)
    )
    repair: bool = True
    bootstrap_resamples: int = 10_000
    bootstrap_seed: int = 123


def _check_number(
    obj: dict, key: str, errors: list[str], where: str,
    lo: float | None = None, hi: float | None = None, integer: bool = False,
) -> Any:
    if key not in obj:
        return None
    v = obj[key]
    ok_type = isinstance(v, int) and not isinstance(v, bool) if integer else (
        isinstance(v, (int, float)) and not isinstance(v, bool)
    )
    if not ok_type:
        errors.append(f"{where}.{key}: expected {'an integer' if integer else 'a number'}, got {v!r}")
        return None
    if lo is not None and v < lo:
        errors.append(f"{where}.{key}: must be >= {lo}, got {v}")
        return None
    if hi is not None and v > hi:
        errors.append(f"{where}.{key}: must be <= {hi}, got {v}")
        return None
    return v


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a config file; raises ConfigError with every problem."""
    errors: list[str] = []
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from None
    if not isinstance(obj, dict):
        raise ConfigError(["config must be a JSON object"])

    known = {
        "data_dir", "output_dir", "split_seed", "holdout_fraction", "head_fraction",
        "constraints", "window_size", "sweep_window_sizes", "model", "proposer",
        "repair", "bootstrap",
    }
    for key in sorted(set(obj) - known):
        errors.append(f"unknown config key {key!r}")

    kwargs: dict[str, Any] = {}
    for key in ("data_dir", "output_dir"):
        if key not in obj:
            errors.append(f"missing required key {key!r}")
        elif not isinstance(obj[key], str):
            errors.append(f"{key}: expected a path string, got {obj[key]!r}")
        else:
            kwargs[key] = Path(obj[key])

    v = _check_number(obj, "split_seed", errors, "config", integer=True, lo=0)
    if v is not None:
        kwargs["split_seed"] = v
    v = _check_number(obj, "holdout_fraction", errors, "config", lo=0.0, hi=1.0)
    if v is not None:
        if not 0 < v < 1:
            errors.append(f"config.holdout_fraction: must be strictly inside (0, 1), got {v}")
        else:
            kwargs["holdout_fraction"] = float(v)
    v = _check_number(obj, "head_fraction", errors, "config", lo=0.0, hi=1.0)
    if v is not None:
        kwargs["head_fraction"] = float(v)
    v = _check_number(obj, "window_size", errors, "config", integer=True, lo=1)
    if v is not None:
        kwargs["window_size"] = v

    if "constraints" in obj:
        c = obj["constraints"]
        if not isinstance(c, dict):
            errors.append("constraints: expected an object")
        else:
            tau = _check_number(c, "tau", errors, "constraints", lo=0.0, hi=1.0)
            kappa = _check_number(c, "kappa", errors, "constraints", lo=0.0, hi=1.0)
            g_min = _check_number(c, "g_min", errors, "constraints", integer=True, lo=0)
            n = _check_number(c, "n", errors, "constraints", integer=True, lo=1)
            if None not in (tau, kappa, g_min, n):
                kwargs["constraints"] = ConstraintSet(
                    tau=str(tau), kappa=str(kappa), g_min=g_min, n=n
                )
            else:
                for key in ("tau", "kappa", "g_min", "n"):
                    if key not in c:
                        errors.append(f"constraints.{key}: missing")

    if "sweep_window_sizes" in obj:
        s = obj["sweep_window_sizes"]
        if (
            not isinstance(s, list)
            or not s
            or any(isinstance(x, bool) or not isinstance(x, int) for x in s)
        ):
            errors.append("sweep_window_sizes: expected a non-empty list of integers")
        elif s != sorted(set(s)):
            errors.append("sweep_window_sizes: must be strictly increasing")
        else:
            kwargs["sweep_window_sizes"] = tuple(s)

    if "model" in obj:
        m = obj["model"]
        if not isinstance(m, dict):
            errors.append("model: expected an object")
        else:
            for key in sorted(set(m) - {"factors", "learning_rate", "regularization", "epochs", "seed"}):
                errors.append(f"model.{key}: unknown key")
            factors = _check_number(m, "factors", errors, "model", integer=True, lo=1)
            lr = _check_number(m, "learning_rate", errors, "model", lo=0.0)
            reg = _check_number(m, "regularization", errors, "model", lo=0.0)
            epochs = _check_number(m, "epochs", errors, "model", integer=True, lo=1)
            seed = _check_number(m, "seed", errors, "model", integer=True, lo=0)
            base = Hyperparams()
            kwargs["model"] = Hyperparams(
                factors=factors if factors is not None else base.factors,
                learning_rate=float(lr) if lr is not None else base.learning_rate,
                regularization=float(reg) if reg is not None else base.regularization,
                epochs=epochs if epochs is not None else base.epochs,
                seed=seed if seed is not None else base.seed,
            )

    if "proposer" in obj:
        p = obj["proposer"]
        if not isinstance(p, dict):
            errors.append("proposer: expected an object")
        else:
            kind_raw = p.get("kind", "heuristic")
            kind = None
            try:
                kind = ProposerKind(kind_raw)
            except ValueError:
                errors.append(
                    f"proposer.kind: expected one of "
                    f"{sorted(k.value for k in ProposerKind)}, got {kind_raw!r}"
                )
            rounds = _check_number(p, "rounds", errors, "proposer", integer=True, lo=1)
            prob = _check_number(p, "fault_probability", errors, "proposer", lo=0.0, hi=1.0)
            seed = _check_number(p, "seed", errors, "proposer", integer=True, lo=0)
            endpoint = None
            if p.get("endpoint") is not None:
                e = p["endpoint"]
                if not isinstance(e, dict) or not isinstance(e.get("url"), str):
                    errors.append("proposer.endpoint: expected an object with a url string")
                else:
                    timeout = _check_number(e, "timeout_s", errors, "proposer.endpoint", lo=0.0)
                    endpoint = EndpointConfig(
                        url=e["url"],
                        timeout_s=float(timeout) if timeout is not None else 10.0,
                    )
            if kind is not None:
                try:
                    kwargs["proposer"] = ProposerConfig(
                        kind=kind,
                        rounds=rounds if rounds is not None else 8,
                        fault_probability=float(prob) if prob is not None else 0.0,
                        seed=seed if seed is not None else 0,
                        endpoint=endpoint,
                    )
                except ValueError as exc:
                    errors.append(f"proposer: {exc}")

    if "repair" in obj:
        if not isinstance(obj["repair"], bool):
            errors.append(f"repair: expected true or false, got {obj['repair']!r}")
        else:
            kwargs["repair"] = obj["repair"]

    if "bootstrap" in obj:
        b = obj["bootstrap"]
        if not isinstance(b, dict):
            errors.append("bootstrap: expected an object")
        else:
            rs = _check_number(b, "resamples", errors, "bootstrap", integer=True, lo=1)
            bs = _check_number(b, "seed", errors, "bootstrap", integer=True, lo=0)
            if rs is not None:
                kwargs["bootstrap_resamples"] = rs
            if bs is not None:
                kwargs["bootstrap_seed"] = bs

    if errors:
        raise ConfigError(errors)
    cfg = PipelineConfig(**kwargs)
    more: list[str] = []
    if cfg.window_size < cfg.constraints.n:
        more.append(
            f"window_size {cfg.window_size} is smaller than the slate size {cfg.constraints.n}"
        )
    if cfg.sweep_window_sizes and cfg.sweep_window_sizes[0] < cfg.constraints.n:
        more.append("every sweep window size must be at least the slate size")
    if more:
        raise ConfigError(more)
    return cfg
