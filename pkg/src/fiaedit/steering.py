"""The shipped steering scenario: does injection protect the background?

A blob-on-textured-background scene is edited under a prompt pair chosen so
the target prompt drifts the whole image.  Guidance is symmetric and noise
injection is off, so the two arms differ only in whether cross-attention
packet injection is active; injection spans every block here, where its
pull toward the source pass is strongest.  The measured quantity is the
background-masked MSE between the decoded edit and the source scene.
"""

from __future__ import annotations

from .codec import decode, encode
from .engine import EditRequest, run_edit
from .fia import FiaConfig
from .fixtures import blob_scene
from .metrics import mse
from .model import GuidanceConfig, ModelConfig, VelocityModel
from .prompts import embed_prompt
from .schedule import NoiseMode, make_linear_schedule

STEERING_SEEDS = (0, 1, 2, 3, 4, 5, 6)
STEERING_STEPS = 12
STEERING_PATCH = 2
_SOURCE_PROMPT = "a small bright blob on a striped background"
_TARGET_PROMPT = "a dark square on a plain background"


def steering_model_config(model_seed: int) -> ModelConfig:
    return ModelConfig(
        n_blocks_dual=4,
        n_blocks_cross_only=2,
        d_model=8,
        n_heads=2,
        seed=model_seed,
        channels=3 * STEERING_PATCH**2,
    )


def run_steering_trial(model_seed: int, fij_enabled: bool) -> float:
    """Background-masked MSE of one steering run."""
    image, background = blob_scene(16, 16)
    latent = encode(image, STEERING_PATCH)
    model = VelocityModel(steering_model_config(model_seed))
    req = EditRequest(
        source_latent=latent,
        p_src=embed_prompt(_SOURCE_PROMPT, 8, seed=0),
        p_tar=embed_prompt(_TARGET_PROMPT, 8, seed=0),
        schedule=make_linear_schedule(STEERING_STEPS, 0.0),
        guidance=GuidanceConfig(mu_src=1.0, mu_tar=1.0),
        fia=FiaConfig(
            fri_enabled=False,
            fij_enabled=fij_enabled,
            fij_block_range=(0, 5),
        ),
        seed=0,
        noise_mode=NoiseMode.NONE,
    )
    trace = run_edit(model, req)
    edited = decode(trace.final_latent, STEERING_PATCH)
    return mse(edited, image, background)
