"""Serialization of full agent state to the versioned checkpoint format.

Online networks are stored per net ("q1/...", "q2/...", "pi/..."), target
copies under "tq1/tq2", Adam moments under "opt/" (stacked layout, internal),
and scalars under "meta/".  Loading validates every shape against the
architecture implied by the TrainerConfig.
"""
from __future__ import annotations

import numpy as np

from .agent import NET_SLICES, AgentParams, TrainerConfig, decoder_param_shapes
from .diffcore import AdamState, load_checkpoint, save_checkpoint, validate_shapes
from .encoder import encoder_param_shapes

META_KEYS = ("step", "episode", "log_alpha", "alpha_m", "alpha_v",
             "alpha_t", "adam_t", "era")


def agent_arrays(params: AgentParams, opt: AdamState | None,
                 step: int, episode: int) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for net, s in NET_SLICES.items():
        for k, t in params.enc.items():
            arrays[f"{net}/{k}"] = t.data[s]
        for k, t in params.dec[net].items():
            arrays[f"{net}/dec/{k}"] = t.data
    for i, net in enumerate(("q1", "q2")):
        for k, arr in params.target_enc.items():
            arrays[f"t{net}/{k}"] = arr[i]
        for k, arr in params.target_dec[net].items():
            arrays[f"t{net}/dec/{k}"] = arr
    if opt is not None:
        for k, m in opt.m.items():
            arrays[f"opt/m/{k}"] = m
            arrays[f"opt/v/{k}"] = opt.v[k]
    meta = {"step": step, "episode": episode, "log_alpha": params.log_alpha,
            "alpha_m": params.alpha_m, "alpha_v": params.alpha_v,
            "alpha_t": params.alpha_t, "adam_t": opt.t if opt else 0,
            "era": params.era}
    for k in META_KEYS:
        arrays[f"meta/{k}"] = np.array(meta[k], dtype=np.float32)
    return arrays


def expected_shapes(cfg: TrainerConfig, with_opt: bool) -> dict[str, tuple]:
    enc_shapes = {k: v[1:] for k, v in encoder_param_shapes(cfg.encoder, 1).items()}
    dec_shapes = decoder_param_shapes(cfg)
    out: dict[str, tuple] = {}
    for net in ("q1", "q2", "pi"):
        for k, shape in enc_shapes.items():
            out[f"{net}/{k}"] = shape
        for k, shape in dec_shapes.items():
            out[f"{net}/dec/{k}"] = shape
    for net in ("tq1", "tq2"):
        for k, shape in enc_shapes.items():
            out[f"{net}/{k}"] = shape
        for k, shape in dec_shapes.items():
            out[f"{net}/dec/{k}"] = shape
    if with_opt:
        for k, shape in encoder_param_shapes(cfg.encoder, 3).items():
            out[f"opt/m/{k}"] = shape
            out[f"opt/v/{k}"] = shape
        for net in ("q1", "q2", "pi"):
            for k, shape in dec_shapes.items():
                out[f"opt/m/dec/{net}/{k}"] = shape
                out[f"opt/v/dec/{net}/{k}"] = shape
    for k in META_KEYS:
        out[f"meta/{k}"] = ()
    return out


def save_agent(path: str, params: AgentParams, opt: AdamState | None,
               step: int, episode: int) -> None:
    save_checkpoint(path, agent_arrays(params, opt, step, episode))


def load_agent(path: str, cfg: TrainerConfig) -> tuple[AgentParams, AdamState, int, int]:
    """Full restore for resuming training; every shape is validated."""
    arrays = load_checkpoint(path)
    validate_shapes(arrays, expected_shapes(cfg, with_opt=True))
    params = AgentParams(cfg, seed=0)
    _fill_params(params, arrays)
    opt = AdamState(params.named_parameters(), lr=cfg.lr)
    for k in opt.m:
        opt.m[k] = arrays[f"opt/m/{k}"].copy()
        opt.v[k] = arrays[f"opt/v/{k}"].copy()
    opt.t = int(arrays["meta/adam_t"])
    return params, opt, int(arrays["meta/step"]), int(arrays["meta/episode"])


def load_policy(path: str, cfg: TrainerConfig) -> AgentParams:
    """Inference restore (optimizer state not required)."""
    arrays = load_checkpoint(path)
    expected = expected_shapes(cfg, with_opt="opt/m/enc/k0/w_sigma" in arrays)
    validate_shapes(arrays, expected)
    params = AgentParams(cfg, seed=0)
    _fill_params(params, arrays)
    return params


def _fill_params(params: AgentParams, arrays: dict[str, np.ndarray]) -> None:
    for net, s in NET_SLICES.items():
        for k, t in params.enc.items():
            t.data[s] = arrays[f"{net}/{k}"]
        for k, t in params.dec[net].items():
            t.data[...] = arrays[f"{net}/dec/{k}"]
    for i, net in enumerate(("q1", "q2")):
        for k, arr in params.target_enc.items():
            arr[i] = arrays[f"t{net}/{k}"]
        for k, arr in params.target_dec[net].items():
            arr[...] = arrays[f"t{net}/dec/{k}"]
    params.log_alpha = float(arrays["meta/log_alpha"])
    params.alpha_m = float(arrays["meta/alpha_m"])
    params.alpha_v = float(arrays["meta/alpha_v"])
    params.alpha_t = int(arrays["meta/alpha_t"])
    params.era = int(arrays["meta/era"])
