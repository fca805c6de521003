"""Experiment configuration files.

Flat key-value INI text with one section per concern; ``[experiment]
kind`` selects the run type.  Unknown sections or keys are rejected so a
typo cannot silently fall back to a default.

Example::

    [experiment]
    kind = simulate

    [data]
    preset = baseline

    [seeds]
    list = 0 1 2

    [optimizer]
    xi = 0.01
    grid_resolution = 0.05
    rate_grid = 0.70 0.725 0.75 0.775 0.80

    [output]
    dir = results
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .metrics import HitInterval
from .pipeline import DEFAULT_MIX_GRID, PipelineConfig, SurrogateConfig
from .simulate import preset as sim_preset

__all__ = ["ExperimentConfig", "load_config"]

KINDS = ("simulate", "frontier", "rolling", "fit")

_KNOWN_KEYS = {
    "experiment": {"kind"},
    "data": {"preset", "path"},
    "seeds": {"list"},
    "hit": {"lower", "upper"},
    "optimizer": {"xi", "grid_resolution", "rate_grid", "rate_band"},
    "penalty": {"strengths", "mixes", "min_selected"},
    "pipeline": {"weight_mode", "hmm_states", "hmm_restarts", "hmm_max_iter"},
    "rolling": {"train_window", "test_step", "total"},
    "output": {"dir"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed, validated experiment description."""

    kind: str
    preset: str | None
    data_path: Path | None
    seeds: tuple[int, ...]
    interval: HitInterval
    rate_grid: tuple[float, ...]
    rate_band: float
    pipeline: PipelineConfig
    train_window: int
    test_step: int
    total: int
    out_dir: Path
    config_hash: str
    source_path: Path

    def tag(self) -> str:
        """Short provenance line embedded in every emitted file."""
        return f"config_hash={self.config_hash}"


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def load_config(path) -> ExperimentConfig:
    """Parse and validate one experiment file."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    raw = path.read_bytes()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(raw.decode("utf-8"), source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ValidationError(f"{path}: {exc}") from None

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ValidationError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ValidationError(f"{path}: unknown key {key!r} in [{section}]")

    def get(section: str, key: str, fallback=None):
        return parser.get(section, key, fallback=fallback)

    kind = get("experiment", "kind")
    if kind not in KINDS:
        raise ValidationError(
            f"{path}: [experiment] kind must be one of {KINDS}, got {kind!r}"
        )

    preset_name = get("data", "preset")
    data_path = get("data", "path")
    if kind in ("simulate", "frontier") and preset_name is None:
        raise ValidationError(f"{path}: [data] preset is required for kind={kind}")
    if preset_name == "shift":
        if kind not in ("rolling", "fit"):
            raise ValidationError(f"{path}: preset 'shift' is only valid for rolling/fit")
    elif preset_name is not None:
        sim_preset(preset_name)  # fail fast on unknown names
    if data_path is not None:
        data_path = Path(data_path)
        if not data_path.is_absolute():
            data_path = path.parent / data_path
        if not data_path.exists():
            raise ValidationError(f"{path}: [data] path does not exist: {data_path}")
    if kind == "rolling" and preset_name is None and data_path is None:
        raise ValidationError(f"{path}: kind=rolling needs [data] path or preset")

    seeds_text = get("seeds", "list", fallback="0")
    try:
        seeds = _ints(seeds_text)
    except ValueError:
        raise ValidationError(f"{path}: [seeds] list: cannot parse {seeds_text!r}") from None
    if not seeds:
        raise ValidationError(f"{path}: [seeds] list must be non-empty")

    if preset_name is not None:
        default_half = sim_preset(preset_name).hit_half_width
        default_lower, default_upper = -default_half, default_half
    else:
        default_lower, default_upper = -0.2, 0.2
    try:
        interval = HitInterval(
            lower=float(get("hit", "lower", fallback=default_lower)),
            upper=float(get("hit", "upper", fallback=default_upper)),
        )
        rate_grid = _floats(get("optimizer", "rate_grid",
                                fallback="0.70 0.725 0.75 0.775 0.80"))
        rate_band = float(get("optimizer", "rate_band", fallback="0.015"))
        xi = float(get("optimizer", "xi", fallback="0.01"))
        grid_resolution = float(get("optimizer", "grid_resolution", fallback="0.05"))
        strengths = _floats(get("penalty", "strengths", fallback="0.001 0.01 0.1 1.0"))
        mixes = _floats(get("penalty", "mixes",
                            fallback=" ".join(str(m) for m in DEFAULT_MIX_GRID)))
        min_selected = int(get("penalty", "min_selected", fallback="17"))
        weight_mode = get("pipeline", "weight_mode", fallback="posterior")
        hmm_states = int(get("pipeline", "hmm_states", fallback="3"))
        hmm_restarts = int(get("pipeline", "hmm_restarts", fallback="3"))
        hmm_max_iter = int(get("pipeline", "hmm_max_iter", fallback="120"))
        train_window = int(get("rolling", "train_window", fallback="500"))
        test_step = int(get("rolling", "test_step", fallback="50"))
        total = int(get("rolling", "total", fallback="1000"))
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None

    if kind in ("simulate", "frontier"):
        surrogate = SurrogateConfig.plain_quadratic()
    else:
        surrogate = SurrogateConfig(strength_grid=strengths, mix_grid=mixes,
                                    min_selected=min_selected)
    pipeline = PipelineConfig(
        surrogate=surrogate,
        hmm_states=hmm_states,
        hmm_restarts=hmm_restarts,
        hmm_max_iter=hmm_max_iter,
        weight_mode=weight_mode,
        xi=xi,
        grid_resolution=grid_resolution,
    )

    return ExperimentConfig(
        kind=kind,
        preset=preset_name,
        data_path=data_path,
        seeds=seeds,
        interval=interval,
        rate_grid=rate_grid,
        rate_band=rate_band,
        pipeline=pipeline,
        train_window=train_window,
        test_step=test_step,
        total=total,
        out_dir=Path(get("output", "dir", fallback="results")),
        config_hash=hashlib.sha256(raw).hexdigest()[:12],
        source_path=path,
    )
