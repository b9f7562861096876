"""Run configuration: a strict dotted-key text format.

One ``section.key = value`` assignment per line; full-line comments start
with ``#``; string values may be double-quoted (required only when they
begin with a quote or need leading/trailing spaces).  Unknown keys are
rejected, every value is type-checked, and environment variables never
override anything, so a config file plus a seed pins a run completely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError
from .fia import FiaConfig, FriMode
from .model import GuidanceConfig, ModelConfig
from .schedule import NoiseMode, NoiseSchedule, make_linear_schedule
from .spectral import FusionWeights

_NOISE_MODES = {m.value: m for m in NoiseMode}
_FRI_MODES = {m.value: m for m in FriMode}


@dataclass(frozen=True)
class RunConfig:
    model_channels: int = 12
    model_blocks_dual: int = 4
    model_blocks_cross_only: int = 2
    model_d_model: int = 8
    model_n_heads: int = 2
    model_seed: int = 0
    schedule_steps: int = 50
    schedule_skip_fraction: float = 0.0
    guidance_mu_src: float = 3.5
    guidance_mu_tar: float = 13.5
    prompts_source: str = ""
    prompts_target: str = ""
    prompts_seed: int = 0
    fia_fri_enabled: bool = True
    fia_fri_mode: str = "freq"
    fia_lambda1: float = 0.8
    fia_lambda2: float = 0.2
    fia_filter_sigma: float = 0.9
    fia_filter_normalized: bool = True
    fia_fij_enabled: bool = True
    fia_fij_step_cutoff: int = -1  # -1: first ceil(0.54 * steps)
    fia_fij_block_lo: int = -1  # -1: the cross-only tail
    fia_fij_block_hi: int = -1
    edit_seed: int = 0
    edit_noise_mode: str = "reused"
    edit_snapshot_stride: int = 0
    codec_patch: int = 2
    metrics_select: str = "mse,psnr,ssim,ssd"

    def make_model_config(self) -> ModelConfig:
        return ModelConfig(
            n_blocks_dual=self.model_blocks_dual,
            n_blocks_cross_only=self.model_blocks_cross_only,
            d_model=self.model_d_model,
            n_heads=self.model_n_heads,
            seed=self.model_seed,
            channels=self.model_channels,
        )

    def make_schedule(self) -> NoiseSchedule:
        return make_linear_schedule(self.schedule_steps, self.schedule_skip_fraction)

    def make_guidance(self) -> GuidanceConfig:
        return GuidanceConfig(mu_src=self.guidance_mu_src, mu_tar=self.guidance_mu_tar)

    def make_fia(self) -> FiaConfig:
        block_range = None
        if self.fia_fij_block_lo >= 0 or self.fia_fij_block_hi >= 0:
            if self.fia_fij_block_lo < 0 or self.fia_fij_block_hi < 0:
                raise ConfigError("set both fia.fij_block_lo and fia.fij_block_hi")
            block_range = (self.fia_fij_block_lo, self.fia_fij_block_hi)
        return FiaConfig(
            fri_enabled=self.fia_fri_enabled,
            fri_mode=_FRI_MODES[self.fia_fri_mode],
            fusion=FusionWeights(self.fia_lambda1, self.fia_lambda2),
            filter_sigma=self.fia_filter_sigma,
            filter_normalized=self.fia_filter_normalized,
            fij_enabled=self.fia_fij_enabled,
            fij_step_cutoff=(
                None if self.fia_fij_step_cutoff < 0 else self.fia_fij_step_cutoff
            ),
            fij_block_range=block_range,
        )

    def noise_mode(self) -> NoiseMode:
        return _NOISE_MODES[self.edit_noise_mode]

    def selected_metrics(self) -> tuple[str, ...]:
        return tuple(m.strip() for m in self.metrics_select.split(",") if m.strip())


def _parse_bool(raw: str, key: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ConfigError(f"{key}: expected true/false, got {raw!r}")


def _parse_int(raw: str, key: str) -> int:
    try:
        return int(raw, 10)
    except ValueError:
        raise ConfigError(f"{key}: expected integer, got {raw!r}") from None


def _parse_float(raw: str, key: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite, got {raw!r}")
    return value


def _parse_choice(options: tuple[str, ...]):
    def parse(raw: str, key: str) -> str:
        if raw not in options:
            raise ConfigError(f"{key}: expected one of {options}, got {raw!r}")
        return raw

    return parse


def _parse_str(raw: str, key: str) -> str:
    if len(raw) >= 2 and raw.startswith('"') and raw.endswith('"'):
        return raw[1:-1]
    return raw


_SCHEMA = {
    "model.channels": ("model_channels", _parse_int),
    "model.blocks_dual": ("model_blocks_dual", _parse_int),
    "model.blocks_cross_only": ("model_blocks_cross_only", _parse_int),
    "model.d_model": ("model_d_model", _parse_int),
    "model.n_heads": ("model_n_heads", _parse_int),
    "model.seed": ("model_seed", _parse_int),
    "schedule.steps": ("schedule_steps", _parse_int),
    "schedule.skip_fraction": ("schedule_skip_fraction", _parse_float),
    "guidance.mu_src": ("guidance_mu_src", _parse_float),
    "guidance.mu_tar": ("guidance_mu_tar", _parse_float),
    "prompts.source": ("prompts_source", _parse_str),
    "prompts.target": ("prompts_target", _parse_str),
    "prompts.seed": ("prompts_seed", _parse_int),
    "fia.fri_enabled": ("fia_fri_enabled", _parse_bool),
    "fia.fri_mode": ("fia_fri_mode", _parse_choice(tuple(_FRI_MODES))),
    "fia.lambda1": ("fia_lambda1", _parse_float),
    "fia.lambda2": ("fia_lambda2", _parse_float),
    "fia.filter_sigma": ("fia_filter_sigma", _parse_float),
    "fia.filter_normalized": ("fia_filter_normalized", _parse_bool),
    "fia.fij_enabled": ("fia_fij_enabled", _parse_bool),
    "fia.fij_step_cutoff": ("fia_fij_step_cutoff", _parse_int),
    "fia.fij_block_lo": ("fia_fij_block_lo", _parse_int),
    "fia.fij_block_hi": ("fia_fij_block_hi", _parse_int),
    "edit.seed": ("edit_seed", _parse_int),
    "edit.noise_mode": ("edit_noise_mode", _parse_choice(tuple(_NOISE_MODES))),
    "edit.snapshot_stride": ("edit_snapshot_stride", _parse_int),
    "codec.patch": ("codec_patch", _parse_int),
    "metrics.select": ("metrics_select", _parse_str),
}

_VALID_METRICS = ("mse", "psnr", "ssim", "ssd")


def parse_config(text: str) -> RunConfig:
    """Parse and schema-validate one config document."""
    values: dict[str, object] = {}
    seen: set[str] = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        attr, parser = _SCHEMA[key]
        values[attr] = parser(raw_value, key)

    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    try:
        cfg.make_model_config()
        cfg.make_schedule()
        cfg.make_guidance()
        cfg.make_fia()
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.codec_patch < 1:
        raise ConfigError(f"codec.patch must be >= 1, got {cfg.codec_patch}")
    if cfg.edit_seed < 0:
        raise ConfigError("edit.seed must be non-negative")
    if cfg.edit_snapshot_stride < 0:
        raise ConfigError("edit.snapshot_stride must be non-negative")
    for name, value in (
        ("fia.fij_step_cutoff", cfg.fia_fij_step_cutoff),
        ("fia.fij_block_lo", cfg.fia_fij_block_lo),
        ("fia.fij_block_hi", cfg.fia_fij_block_hi),
    ):
        if value < -1:
            raise ConfigError(f"{name} must be >= -1 (-1 means the default), got {value}")
    for metric in cfg.selected_metrics():
        if metric not in _VALID_METRICS:
            raise ConfigError(
                f"metrics.select: unknown metric {metric!r}, valid: {_VALID_METRICS}"
            )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def with_overrides(cfg: RunConfig, **overrides: object) -> RunConfig:
    updated = replace(cfg, **overrides)
    _validate(updated)
    return updated
