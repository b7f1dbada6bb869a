"""Decoding engine for masked-diffusion language models.

Implements self-contrast guided decoding with instability-based
high-density token detection, its early-exit accelerated variant, the
standard baselines, exact small-joint oracle denoisers for verification,
and a benchmarking/analysis harness.
"""

from .decoding import (
    AccelConfig,
    DecodeConfig,
    DecodeResult,
    Metrics,
    TaskSpec,
    TraceRecord,
    load_task,
    plan_block,
    run_job,
    save_task,
)
from .denoiser import Denoiser
from .dists import Vocab, entropy, js_divergence, kl_divergence, softmax, top_k_indices
from .errors import (
    ConnectivityError,
    EngineError,
    InconsistentEvidenceError,
    InvalidInputError,
    ProtocolError,
    UpstreamError,
    ValidationError,
)
from .guidance import (
    GuidanceConfig,
    build_negative_sample,
    heuristic_hd_tag,
    mask_prompt,
    self_contrast_logits,
)
from .instability import InstabilityTracker, ema_update, truncated_js
from .oracle import MarkovOracle, OracleModel, TableOracle, load_model, save_model
from .remote import RemoteDenoiser, RemoteDenoiserConfig, reconstruct_dense

__version__ = "0.1.0"

__all__ = [
    "AccelConfig",
    "ConnectivityError",
    "DecodeConfig",
    "DecodeResult",
    "Denoiser",
    "EngineError",
    "GuidanceConfig",
    "InconsistentEvidenceError",
    "InstabilityTracker",
    "InvalidInputError",
    "MarkovOracle",
    "Metrics",
    "OracleModel",
    "ProtocolError",
    "RemoteDenoiser",
    "RemoteDenoiserConfig",
    "TableOracle",
    "TaskSpec",
    "TraceRecord",
    "UpstreamError",
    "ValidationError",
    "Vocab",
    "build_negative_sample",
    "ema_update",
    "entropy",
    "heuristic_hd_tag",
    "js_divergence",
    "kl_divergence",
    "load_model",
    "load_task",
    "mask_prompt",
    "plan_block",
    "reconstruct_dense",
    "run_job",
    "save_model",
    "save_task",
    "self_contrast_logits",
    "softmax",
    "top_k_indices",
    "truncated_js",
]
