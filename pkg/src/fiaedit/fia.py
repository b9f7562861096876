"""Source-aware constraint on the target velocity pass.

Two mechanisms feed a hook plan for the constrained target pass:

* frequency interaction fuses the source and target self-attention Q/K in
  the spectral domain (or averages them, in ``ADD`` mode) at every step;
* feature injection substitutes the source cross-attention packet (Q, K, V
  and text embedding) in a chosen block range during the early steps.

Target features come from one unconstrained probe pass, so each constrained
step costs one extra model evaluation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PacketAlignmentError, ShapeMismatchError, TopologyError
from .model import (
    AttentionPacket,
    AttnKind,
    GuidanceConfig,
    HookPlan,
    ReplaceQK,
    ReplaceQKVE,
    Site,
    Topology,
    VelocityModel,
)
from .prompts import PromptEmbedding, embeddings_equal
from .spectral import FusionWeights, LowPassFilter, fri_fuse, make_gaussian_lowpass

DEFAULT_FIJ_STEP_FRACTION = 0.54
DEFAULT_FILTER_SIGMA = 0.9


class FriMode(enum.Enum):
    FREQ = "freq"
    ADD = "add"


def default_fij_cutoff(total_steps: int) -> int:
    """Injection window: the first ceil(0.54 * T) steps (27 of 50)."""
    return math.ceil(DEFAULT_FIJ_STEP_FRACTION * total_steps)


@dataclass(frozen=True)
class FiaConfig:
    """Switches and strengths for every constraint mechanism.

    ``fij_step_cutoff=None`` resolves to ``default_fij_cutoff`` for the run's
    step count; ``fij_block_range=None`` resolves to the model's cross-only
    tail.  Both can be pinned explicitly for placement and window studies.
    """

    fri_enabled: bool = True
    fri_mode: FriMode = FriMode.FREQ
    fusion: FusionWeights = field(default_factory=FusionWeights)
    filter_sigma: float = DEFAULT_FILTER_SIGMA
    filter_normalized: bool = True
    fij_enabled: bool = True
    fij_step_cutoff: int | None = None
    fij_block_range: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.filter_sigma <= 0.0:
            raise ValueError(f"filter_sigma must be positive, got {self.filter_sigma}")
        if self.fij_step_cutoff is not None and self.fij_step_cutoff < 0:
            raise ValueError("fij_step_cutoff must be non-negative")
        if self.fij_block_range is not None:
            lo, hi = self.fij_block_range
            if lo < 0 or hi < lo:
                raise ValueError(f"bad fij_block_range {self.fij_block_range}")

    @staticmethod
    def disabled() -> "FiaConfig":
        return FiaConfig(fri_enabled=False, fij_enabled=False)

    @property
    def any_enabled(self) -> bool:
        return self.fri_enabled or self.fij_enabled

    def resolved_cutoff(self, total_steps: int) -> int:
        cutoff = (
            default_fij_cutoff(total_steps)
            if self.fij_step_cutoff is None
            else self.fij_step_cutoff
        )
        if cutoff > total_steps:
            raise ValueError(
                f"fij_step_cutoff {cutoff} exceeds total steps {total_steps}"
            )
        return cutoff

    def resolved_block_range(self, topology: Topology) -> tuple[int, int]:
        rng = (
            topology.cross_only_range()
            if self.fij_block_range is None
            else self.fij_block_range
        )
        if rng[1] >= topology.n_blocks:
            raise TopologyError(
                f"fij_block_range {rng} outside topology of {topology.n_blocks} blocks"
            )
        return rng

    def fij_active(self, step_index: int, total_steps: int) -> bool:
        return self.fij_enabled and step_index < self.resolved_cutoff(total_steps)


def plan_capture(cfg: FiaConfig, topology: Topology) -> HookPlan:
    """Capture plan for the source and probe passes: every site FIA consumes."""
    sites: set[Site] = set()
    if cfg.fri_enabled:
        sites.update(topology.self_sites())
    if cfg.fij_enabled:
        lo, hi = cfg.resolved_block_range(topology)
        sites.update((b, AttnKind.CROSS) for b in range(lo, hi + 1))
    return HookPlan(capture=frozenset(sites))


def fold_heads_to_grid(a: np.ndarray, h: int, w: int) -> np.ndarray:
    """(heads, h*w, d_head) -> (heads*d_head, h, w), heads folded as channels."""
    heads, n_tok, d_head = a.shape
    if n_tok != h * w:
        raise ShapeMismatchError(f"{n_tok} tokens do not tile a {h}x{w} grid")
    return a.transpose(0, 2, 1).reshape(heads * d_head, h, w)


def unfold_grid_to_heads(g: np.ndarray, heads: int) -> np.ndarray:
    """Inverse of :func:`fold_heads_to_grid`."""
    c, h, w = g.shape
    d_head = c // heads
    return g.reshape(heads, d_head, h * w).transpose(0, 2, 1)


def _packets_identical(a: AttentionPacket, b: AttentionPacket) -> bool:
    if (a.text_embedding is None) != (b.text_embedding is None):
        return False
    if a.text_embedding is not None and not embeddings_equal(
        a.text_embedding, b.text_embedding
    ):
        return False
    return (
        np.array_equal(a.q, b.q)
        and np.array_equal(a.k, b.k)
        and np.array_equal(a.v, b.v)
    )


def _by_site(packets: list[AttentionPacket], label: str) -> dict[Site, AttentionPacket]:
    table: dict[Site, AttentionPacket] = {}
    for pkt in packets:
        if pkt.site in table:
            raise PacketAlignmentError(f"duplicate {label} packet at {pkt.site}")
        table[pkt.site] = pkt
    return table


def _fuse_feature(
    src: np.ndarray,
    tar: np.ndarray,
    cfg: FiaConfig,
    filt: LowPassFilter,
    grid: tuple[int, int],
) -> np.ndarray:
    if cfg.fri_mode is FriMode.ADD:
        return 0.5 * (src + tar)
    heads = src.shape[0]
    fused = fri_fuse(
        fold_heads_to_grid(src, *grid), fold_heads_to_grid(tar, *grid), filt, cfg.fusion
    )
    return unfold_grid_to_heads(fused, heads)


def build_target_overrides(
    cfg: FiaConfig,
    step_index: int,
    total_steps: int,
    src_packets: list[AttentionPacket],
    tar_packets: list[AttentionPacket],
    grid: tuple[int, int],
    topology: Topology,
) -> HookPlan:
    """Turn captured source/target packets into the constrained pass's plan.

    Frequency fusion overrides every self-attention site at every step;
    packet injection overrides the configured cross sites only while the
    step index is below the cutoff.  Substitutions that would be exact
    no-ops are dropped: fusing bit-identical features under weights that
    sum to 1 is the identity, and injecting a packet the target already
    computed replaces values with themselves.  Skipping them changes no
    bits and keeps fully symmetric runs exactly symmetric.
    """
    src_by = _by_site(src_packets, "source")
    tar_by = _by_site(tar_packets, "target")
    overrides: dict[Site, ReplaceQK | ReplaceQKVE] = {}

    if cfg.fri_enabled:
        filt = make_gaussian_lowpass(*grid, cfg.filter_sigma, cfg.filter_normalized)
        unit_weights = cfg.fusion.lambda1 + cfg.fusion.lambda2 == 1.0
        for site in topology.self_sites():
            src = src_by.get(site)
            tar = tar_by.get(site)
            if src is None or tar is None:
                raise PacketAlignmentError(f"missing self-attention packets at {site}")
            if src.q.shape != tar.q.shape or src.k.shape != tar.k.shape:
                raise ShapeMismatchError(f"packet shapes differ at {site}")
            if (
                unit_weights
                and np.array_equal(src.q, tar.q)
                and np.array_equal(src.k, tar.k)
            ):
                continue
            overrides[site] = ReplaceQK(
                q=_fuse_feature(src.q, tar.q, cfg, filt, grid),
                k=_fuse_feature(src.k, tar.k, cfg, filt, grid),
            )

    if cfg.fij_active(step_index, total_steps):
        lo, hi = cfg.resolved_block_range(topology)
        for b in range(lo, hi + 1):
            site = (b, AttnKind.CROSS)
            src = src_by.get(site)
            if src is None:
                raise PacketAlignmentError(f"missing cross-attention packet at {site}")
            tar = tar_by.get(site)
            if tar is not None and _packets_identical(src, tar):
                continue
            overrides[site] = ReplaceQKVE(packet=src)

    return HookPlan(overrides=overrides)


def constrained_velocity_pair(
    model: VelocityModel,
    x_src_t: np.ndarray,
    x_tar_t: np.ndarray,
    p_src: PromptEmbedding,
    p_tar: PromptEmbedding,
    t_index: int,
    sigma_t: float,
    step_index: int,
    total_steps: int,
    guidance: GuidanceConfig,
    cfg: FiaConfig,
    diagnostics: dict | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Source velocity and the source-constrained target velocity at one step.

    Runs the source pass (capturing), an unconstrained target probe pass
    (capturing), then the target pass under the built overrides.  When the
    override plan comes out empty the probe already is the constrained
    result, so the third pass is skipped; the returned values are identical
    either way because empty hook plans do not touch the forward pass.

    ``diagnostics``, when given, is filled with the captured packets and the
    override plan for inspection by tests and tooling.
    """
    if x_src_t.shape != x_tar_t.shape:
        raise ShapeMismatchError(
            f"state shapes differ: {x_src_t.shape} vs {x_tar_t.shape}"
        )
    topology = model.topology
    capture = plan_capture(cfg, topology)
    v_src, src_packets = model.velocity(
        x_src_t, p_src, t_index, sigma_t, guidance.mu_src, hooks=capture
    )
    if capture.is_empty:
        v_tar, _ = model.velocity(x_tar_t, p_tar, t_index, sigma_t, guidance.mu_tar)
        if diagnostics is not None:
            diagnostics.update(
                src_packets=[], tar_packets=[], plan=HookPlan(), constrained_packets=[]
            )
        return v_src, v_tar

    v_probe, tar_packets = model.velocity(
        x_tar_t, p_tar, t_index, sigma_t, guidance.mu_tar, hooks=capture
    )
    grid = x_src_t.shape[-2:]
    plan = build_target_overrides(
        cfg, step_index, total_steps, src_packets, tar_packets, grid, topology
    )
    if diagnostics is not None:
        diagnostics.update(src_packets=src_packets, tar_packets=tar_packets, plan=plan)
    if not plan.overrides:
        if diagnostics is not None:
            diagnostics["constrained_packets"] = tar_packets
        return v_src, v_probe

    constrained_hooks = HookPlan(
        capture=capture.capture if diagnostics is not None else frozenset(),
        overrides=plan.overrides,
    )
    v_tar, constrained_packets = model.velocity(
        x_tar_t, p_tar, t_index, sigma_t, guidance.mu_tar, hooks=constrained_hooks
    )
    if diagnostics is not None:
        diagnostics["constrained_packets"] = constrained_packets
    return v_src, v_tar
