"""Discrete soft actor-critic over graph dismantling episodes.

Twin Q networks and a policy network, each with its own encoder (stacked into
one parameter bank so a batch needs a single fused pass), frozen target
copies of the Q pair, exact expectations over the discrete action set, and an
entropy coefficient auto-tuned toward a fraction of the maximum entropy
ln|V_t|.  Rewards are the negative relative LCC size after each removal;
episodes reset once the LCC drops under a tenth of the starting size.

Per-transition successor values under the target networks are cached per
target era: they only change when the targets re-sync, which makes the
bootstrap pass cheap for buffer entries sampled repeatedly within one era.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import diffcore as dc
from .diffcore import AdamState, Tensor, adam_step, make_plan, zero_grads
from .encoder import (
    EncoderConfig,
    GraphBatch,
    batch_from_local_edges,
    batch_graphs,
    encode_batch,
    encoder_param_shapes,
    init_encoder_bank,
)
from .errors import ContractError
from .graph import Graph, auc_for_order, largest_component_size
from .netgen import make_validation_graphs

log = logging.getLogger(__name__)

NET_SLICES = {"q1": 0, "q2": 1, "pi": 2}


@dataclass
class TrainerConfig:
    total_steps: int = 8_000_000
    buffer_capacity: int = 2_000_000
    lr: float = 3e-4
    batch_size: int = 512
    start_learning: int = 100_000
    gamma: float = 0.99
    update_frequency: int = 4
    target_update_frequency: int = 8000
    target_update_factor: float = 1.0   # 1 = hard copy
    episode_threshold: float = 0.1
    validation_interval: int = 10_000
    validation_size: int = 20
    validation_n_range: tuple[int, int] = (100, 200)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder_hidden: tuple[int, ...] = (256, 256)
    alpha_init: float = 0.2
    alpha_lr: float = 3e-4
    target_entropy_scale: float = 0.35
    seed: int = 0

    def validate(self) -> None:
        # total_steps < start_learning is legal: such a run only collects
        # random transitions and never updates a parameter
        if self.total_steps < 1 or self.batch_size < 1 or self.buffer_capacity < 1:
            raise ContractError("steps, batch size and buffer capacity must be positive")
        if self.start_learning < 0 or self.update_frequency < 1:
            raise ContractError("start_learning and update_frequency must be non-negative")


def desk_config(**overrides) -> TrainerConfig:
    """Desk-scale defaults: small corpus graphs, short run, small buffer."""
    cfg = TrainerConfig(
        total_steps=200_000,
        buffer_capacity=100_000,
        start_learning=5_000,
        validation_n_range=(30, 60),
    )
    return replace(cfg, **overrides)


# -- transitions and replay ----------------------------------------------------------


@dataclass
class Transition:
    graph_id: int
    mask_before: np.ndarray        # packed bits, np.packbits layout
    n_total: int
    action: int                    # original node id
    action_local: int              # index into the active-node list
    reward: float
    terminal: bool
    n_before: int
    edges_before: np.ndarray       # (2, E) int16 local indices
    n_after: int
    edges_after: np.ndarray
    succ_era: int = -1             # target era of the cached successor values
    succ_minq: np.ndarray | None = None  # min over target heads, per successor node


def _local_edges(g: Graph) -> tuple[np.ndarray, np.ndarray, int]:
    ids = np.flatnonzero(g.active)
    local = np.full(g.n_total, -1, dtype=np.int64)
    local[ids] = np.arange(ids.size)
    src, dst = g.active_edges()
    edges = np.stack([local[src], local[dst]]).astype(np.int16)
    return edges, ids, ids.size


def make_transition(g_before: Graph, graph_id: int, v: int, n0: int,
                    threshold: float) -> tuple[Transition, float, bool]:
    """Apply the removal of v to g_before (mutating it) and record everything."""
    edges_b, ids_b, n_b = _local_edges(g_before)
    mask_packed = np.packbits(g_before.active)
    v_local = int(np.searchsorted(ids_b, v))
    g_before.remove_node(v)
    reward = -largest_component_size(g_before) / n0
    terminal = largest_component_size(g_before) < threshold * n0
    edges_a, _, n_a = _local_edges(g_before)
    tr = Transition(
        graph_id=graph_id, mask_before=mask_packed, n_total=g_before.n_total,
        action=int(v), action_local=v_local, reward=float(reward),
        terminal=bool(terminal), n_before=n_b, edges_before=edges_b,
        n_after=n_a, edges_after=edges_a)
    return tr, reward, terminal


class ReplayBuffer:
    """Uniform ring buffer; batches are sampled without replacement."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ContractError("capacity must be positive")
        self.capacity = capacity
        self._store: list[Transition] = []
        self._pos = 0

    def push(self, tr: Transition) -> None:
        if len(self._store) < self.capacity:
            self._store.append(tr)
        else:
            self._store[self._pos] = tr
        self._pos = (self._pos + 1) % self.capacity

    def sample(self, rng: np.random.Generator, k: int) -> list[Transition]:
        if k > len(self._store):
            raise ContractError("not enough transitions to sample")
        idx = rng.choice(len(self._store), size=k, replace=False)
        return [self._store[i] for i in idx]

    def __len__(self) -> int:
        return len(self._store)


# -- parameters ------------------------------------------------------------------------


def decoder_param_shapes(cfg: TrainerConfig) -> dict[str, tuple]:
    in_dim = 2 * cfg.encoder.profile_dim
    widths = (in_dim, *cfg.decoder_hidden, 1)
    shapes = {}
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        shapes[f"w{i}"] = (a, b)
        shapes[f"b{i}"] = (b,)
    return shapes


def _init_decoder(cfg: TrainerConfig, rng: np.random.Generator,
                  dtype=np.float32) -> dict[str, Tensor]:
    out = {}
    for name, shape in decoder_param_shapes(cfg).items():
        if name.startswith("w"):
            out[name] = dc.param(dc.xavier_uniform(rng, shape[0], shape[1], dtype=dtype))
        else:
            out[name] = dc.param(np.zeros(shape, dtype=dtype))
    return out


class AgentParams:
    """All learnable state: stacked encoder bank (q1,q2,pi), three decoders,
    frozen target copies of the Q pair, and the entropy temperature."""

    def __init__(self, cfg: TrainerConfig, seed: int | None = None, dtype=np.float32):
        cfg.validate()
        self.cfg = cfg
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        self.enc = init_encoder_bank(cfg.encoder, rng, stacked=3, dtype=dtype)
        self.dec = {net: _init_decoder(cfg, rng, dtype) for net in ("q1", "q2", "pi")}
        self.target_enc = {k: t.data[0:2].copy() for k, t in self.enc.items()}
        self.target_dec = {net: {k: t.data.copy() for k, t in self.dec[net].items()}
                           for net in ("q1", "q2")}
        self.log_alpha = float(np.log(cfg.alpha_init))
        self.alpha_m = 0.0
        self.alpha_v = 0.0
        self.alpha_t = 0
        self.era = 0
        # live views used by the acting/validation paths
        self._pi_enc_view = {k: t.data[2:3] for k, t in self.enc.items()}

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha))

    def named_parameters(self) -> dict[str, Tensor]:
        out = dict(self.enc)  # keys already carry the enc/ prefix
        for net, dec in self.dec.items():
            out.update({f"dec/{net}/{k}": t for k, t in dec.items()})
        return out

    def sync_targets(self) -> None:
        f = self.cfg.target_update_factor
        for k, t in self.enc.items():
            if f >= 1.0:
                np.copyto(self.target_enc[k], t.data[0:2])
            else:
                self.target_enc[k] *= (1.0 - f)
                self.target_enc[k] += f * t.data[0:2]
        for net in ("q1", "q2"):
            for k, t in self.dec[net].items():
                if f >= 1.0:
                    np.copyto(self.target_dec[net][k], t.data)
                else:
                    self.target_dec[net][k] *= (1.0 - f)
                    self.target_dec[net][k] += f * t.data
        self.era += 1

    def pi_encoder_bank(self) -> dict[str, Tensor]:
        return {k: dc.constant(v) for k, v in self._pi_enc_view.items()}

    def target_encoder_bank(self) -> dict[str, Tensor]:
        return {k: dc.constant(v) for k, v in self.target_enc.items()}

    def update_alpha(self, grad: float) -> None:
        lr, b1, b2, eps = self.cfg.alpha_lr, 0.9, 0.999, 1e-8
        self.alpha_t += 1
        self.alpha_m = b1 * self.alpha_m + (1 - b1) * grad
        self.alpha_v = b2 * self.alpha_v + (1 - b2) * grad * grad
        mhat = self.alpha_m / (1 - b1 ** self.alpha_t)
        vhat = self.alpha_v / (1 - b2 ** self.alpha_t)
        self.log_alpha -= lr * mhat / (np.sqrt(vhat) + eps)


# -- decoding ---------------------------------------------------------------------------


def _decode_grad(x: Tensor, dec: dict[str, Tensor]) -> Tensor:
    h = x
    n_layers = len(dec) // 2
    for i in range(n_layers):
        h = dc.add(dc.matmul(h, dec[f"w{i}"]), dec[f"b{i}"])
        if i < n_layers - 1:
            h = dc.relu(h)
    return dc.reshape(h, (x.data.shape[0],))


def _decode_np(x: np.ndarray, dec_arrays: dict[str, np.ndarray]) -> np.ndarray:
    h = x
    n_layers = len(dec_arrays) // 2
    for i in range(n_layers):
        h = h @ dec_arrays[f"w{i}"] + dec_arrays[f"b{i}"]
        if i < n_layers - 1:
            np.maximum(h, 0, out=h)
    return h[:, 0]


def _dec_arrays(dec: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {k: t.data for k, t in dec.items()}


def _seg_log_softmax_np(x: np.ndarray, starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    mx = np.maximum.reduceat(x, starts)
    xc = x - np.repeat(mx, counts)
    ex = np.exp(xc)
    sums = np.add.reduceat(ex, starts)
    return xc - np.repeat(np.log(sums), counts)


def _policy_scores_np(g: Graph, enc_bank: dict[str, Tensor], dec_arrays,
                      cfg: EncoderConfig) -> tuple[np.ndarray, np.ndarray]:
    """(active node ids, raw policy logits) for one graph, no grad."""
    batch = batch_graphs([g])
    with dc.no_grad():
        z, zo = encode_batch(enc_bank, cfg, batch)
    x = np.concatenate([z.data[:, 0], np.broadcast_to(zo.data[0, 0], (batch.n_nodes, zo.data.shape[-1]))], axis=1)
    return batch.node_ids[0], _decode_np(x, dec_arrays)


def policy_probs(g: Graph, params: AgentParams) -> tuple[np.ndarray, np.ndarray]:
    """Removal distribution over the active nodes of g under the current policy."""
    if g.n_active == 0:
        raise ContractError("empty graph has no actions")
    ids, logits = _policy_scores_np(g, params.pi_encoder_bank(),
                                    _dec_arrays(params.dec["pi"]), params.cfg.encoder)
    lp = logits - logits.max()
    p = np.exp(lp)
    return ids, p / p.sum()


def q_values(g: Graph, params: AgentParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node state-action values from both online Q heads."""
    if g.n_active == 0:
        raise ContractError("empty graph has no actions")
    batch = batch_graphs([g])
    bank = {k: dc.constant(t.data) for k, t in params.enc.items()}
    with dc.no_grad():
        z, zo = encode_batch(bank, params.cfg.encoder, batch)
    outs = []
    for net in ("q1", "q2"):
        s = NET_SLICES[net]
        x = np.concatenate([z.data[:, s],
                            np.broadcast_to(zo.data[0, s], (batch.n_nodes, zo.data.shape[-1]))], axis=1)
        outs.append(_decode_np(x, _dec_arrays(params.dec[net])))
    return batch.node_ids[0], outs[0], outs[1]


# -- targets and losses -------------------------------------------------------------------


def _refresh_successor_values(params: AgentParams, stale: list[Transition]) -> None:
    """Recompute min-target-Q per successor node for transitions whose cache
    belongs to an older target era."""
    if not stale:
        return
    batch = batch_from_local_edges([tr.edges_after for tr in stale],
                                   np.array([tr.n_after for tr in stale]))
    with dc.no_grad():
        z, zo = encode_batch(params.target_encoder_bank(), params.cfg.encoder, batch)
    zo_rows = zo.data[batch.node_graph]
    qmins = None
    for i, net in enumerate(("q1", "q2")):
        x = np.concatenate([z.data[:, i], zo_rows[:, i]], axis=1)
        q = _decode_np(x, params.target_dec[net])
        qmins = q if qmins is None else np.minimum(qmins, q)
    for i, tr in enumerate(stale):
        lo, hi = batch.node_ptr[i], batch.node_ptr[i + 1]
        tr.succ_minq = qmins[lo:hi].copy()
        tr.succ_era = params.era


def q_target(params: AgentParams, transitions: list[Transition],
             use_cache: bool = True) -> np.ndarray:
    """Bellman target r + gamma * E_pi[min_i Q_targ,i - alpha log pi] per
    transition; the expectation is an exact sum over the successor's active
    nodes (terminal transitions bootstrap nothing)."""
    cfg = params.cfg
    targets = np.array([tr.reward for tr in transitions], dtype=np.float64)
    live = [tr for tr in transitions if not tr.terminal]
    if not live:
        return targets
    if not use_cache:
        for tr in live:
            tr.succ_era = -1
    _refresh_successor_values(params, [tr for tr in live if tr.succ_era != params.era])
    batch = batch_from_local_edges([tr.edges_after for tr in live],
                                   np.array([tr.n_after for tr in live]))
    with dc.no_grad():
        z, zo = encode_batch(params.pi_encoder_bank(), cfg.encoder, batch)
    x = np.concatenate([z.data[:, 0], zo.data[batch.node_graph, 0]], axis=1)
    logits = _decode_np(x, _dec_arrays(params.dec["pi"]))
    starts = batch.node_ptr[:-1]
    logp = _seg_log_softmax_np(logits, starts, batch.counts)
    p = np.exp(logp)
    minq = np.concatenate([tr.succ_minq for tr in live])
    values = np.add.reduceat(p * (minq - params.alpha * logp), starts)
    j = 0
    for i, tr in enumerate(transitions):
        if not tr.terminal:
            targets[i] += cfg.gamma * values[j]
            j += 1
    return targets


@dataclass
class LossReport:
    q_loss: Tensor
    pi_loss: Tensor
    q1_mse: float
    q2_mse: float
    entropy_per_graph: np.ndarray
    max_entropy_per_graph: np.ndarray
    qmin: np.ndarray | None = None


def sac_losses(params: AgentParams, transitions: list[Transition],
               targets: np.ndarray,
               qmin_override: np.ndarray | None = None) -> LossReport:
    """Tape-active Q and policy losses for one batch.

    Q losses are MSEs of each online head's value at the taken action against
    the provided targets; the policy loss is the exact expectation
    E_G sum_v pi(v|G) (alpha log pi(v|G) - min_i Q_i(G, v)) with the Q values
    detached.  Gradients flow into each network's own encoder slice only.
    qmin_override pins the detached Q values (gradient-check suites perturb
    parameters that would otherwise shift this constant).
    """
    cfg = params.cfg
    batch = batch_from_local_edges([tr.edges_before for tr in transitions],
                                   np.array([tr.n_before for tr in transitions]))
    n, b = batch.n_nodes, batch.n_graphs
    z, zo = encode_batch(params.enc, cfg.encoder, batch)

    v_rows = batch.node_ptr[:-1] + np.array([tr.action_local for tr in transitions])
    v_plan = make_plan(v_rows, n)
    y = dc.constant(targets.astype(z.data.dtype))
    mses = []
    q_loss = None
    for net in ("q1", "q2"):
        s = NET_SLICES[net]
        zs = dc.gather(dc.select(z, s, axis=1), v_rows, axis=0, plan=v_plan)
        x = dc.concat([zs, dc.select(zo, s, axis=1)], axis=-1)
        pred = _decode_grad(x, params.dec[net])
        diff = dc.sub(pred, y)
        mse = dc.mean_all(dc.mul(diff, diff))
        mses.append(float(mse.data))
        q_loss = mse if q_loss is None else dc.add(q_loss, mse)

    omni_plan = make_plan(batch.node_graph, b)
    z_pi = dc.select(z, 2, axis=1)
    zo_pi = dc.gather(dc.select(zo, 2, axis=1), batch.node_graph, axis=0, plan=omni_plan)
    x_pi = dc.concat([z_pi, zo_pi], axis=-1)
    logits = _decode_grad(x_pi, params.dec["pi"])
    starts = batch.node_ptr[:-1]
    logp = dc.segment_log_softmax(logits, starts, batch.counts)
    p = dc.exp(logp)

    if qmin_override is not None:
        qmin = qmin_override
    else:
        with dc.no_grad():
            qmin = None
            zo_rows = zo.data[batch.node_graph]
            for net in ("q1", "q2"):
                s = NET_SLICES[net]
                x_all = np.concatenate([z.data[:, s], zo_rows[:, s]], axis=1)
                q = _decode_np(x_all, _dec_arrays(params.dec[net]))
                qmin = q if qmin is None else np.minimum(qmin, q)

    inner = dc.sub(dc.scale(logp, params.alpha), dc.constant(qmin.astype(z.data.dtype)))
    pi_loss = dc.scale(dc.reduce_sum(dc.mul(p, inner)), 1.0 / b)

    p_np, logp_np = p.data, logp.data
    entropy = -np.add.reduceat(p_np * logp_np, starts)
    max_entropy = np.log(batch.counts.astype(np.float64))
    return LossReport(q_loss, pi_loss, mses[0], mses[1], entropy, max_entropy, qmin)


def q_loss(params: AgentParams, transitions: list[Transition],
           targets: np.ndarray | None = None) -> Tensor:
    if targets is None:
        targets = q_target(params, transitions)
    return sac_losses(params, transitions, targets).q_loss


def policy_loss(params: AgentParams, transitions: list[Transition]) -> Tensor:
    targets = np.zeros(len(transitions))
    return sac_losses(params, transitions, targets).pi_loss


def sac_update(params: AgentParams, opt: AdamState, buffer: ReplayBuffer,
               rng: np.random.Generator) -> dict:
    """One gradient block: sample a batch, update both Q heads and the policy,
    then the entropy temperature."""
    batch = buffer.sample(rng, params.cfg.batch_size)
    targets = q_target(params, batch, use_cache=True)
    named = params.named_parameters()
    with dc.Tape():
        report = sac_losses(params, batch, targets)
        total = dc.add(report.q_loss, report.pi_loss)
        if not np.isfinite(total.data):
            raise FloatingPointError(
                f"non-finite loss: q={report.q_loss.data} pi={report.pi_loss.data}")
        dc.backward(total)
    adam_step(named, opt)
    zero_grads(named)
    target_h = params.cfg.target_entropy_scale * report.max_entropy_per_graph
    # J(alpha) = alpha * (E[H] - H_target): alpha rises when entropy is under target
    params.update_alpha(params.alpha * float(np.mean(report.entropy_per_graph - target_h)))
    return {
        "q_loss": report.q1_mse + report.q2_mse,
        "pi_loss": float(report.pi_loss.data),
        "entropy": float(report.entropy_per_graph.mean()),
        "alpha": params.alpha,
    }


# -- acting, validation, training loop ------------------------------------------------------


def select_action(g: Graph, params: AgentParams, rng: np.random.Generator | None,
                  greedy: bool = False) -> int:
    ids, logits = _policy_scores_np(g, params.pi_encoder_bank(),
                                    _dec_arrays(params.dec["pi"]), params.cfg.encoder)
    if greedy:
        return int(ids[np.argmax(logits)])  # argmax takes the lowest id on ties
    lp = logits - logits.max()
    p = np.exp(lp)
    p /= p.sum()
    return int(rng.choice(ids, p=p))


def greedy_dismantle(g0: Graph, params: AgentParams, threshold: float):
    """Argmax rollout until the LCC crosses the threshold; returns the curve."""
    g = g0.copy()
    n0 = g.n_active
    order = []
    while g.n_active > 0 and largest_component_size(g) >= threshold * n0:
        v = select_action(g, params, None, greedy=True)
        order.append(v)
        g.remove_node(v)
    return auc_for_order(g0, order, threshold)


def validate(params: AgentParams, val_graphs: list[Graph], threshold: float = 0.1) -> float:
    """Mean dismantling AUC of greedy rollouts over the validation set."""
    return float(np.mean([greedy_dismantle(g, params, threshold).auc for g in val_graphs]))


@dataclass
class TrainResult:
    params: AgentParams
    log_rows: list[dict]
    steps_done: int
    episodes: int
    validation_history: list[tuple[int, float]]


def train(config: TrainerConfig, corpus: list[Graph],
          log_file: str | None = None,
          checkpoint_file: str | None = None,
          resume_from: dict | None = None,
          log_every_updates: int = 50) -> TrainResult:
    """Algorithm-1 training: random actions before start_learning, gradient
    blocks every update_frequency steps afterwards, hard target syncs, greedy
    validation on a fixed seeded graph set, CSV logging, rolling checkpoints."""
    from .checkpoint_agent import save_agent  # local import to avoid a cycle

    config.validate()
    if not corpus:
        raise ContractError("corpus is empty")
    rng = np.random.default_rng(config.seed)
    params = AgentParams(config, seed=config.seed)
    opt = AdamState(params.named_parameters(), lr=config.lr)
    start_step, episode = 0, 0
    if resume_from is not None:
        params, opt, start_step, episode = resume_from["params"], resume_from["opt"], \
            resume_from["step"], resume_from["episode"]
    buffer = ReplayBuffer(config.buffer_capacity)
    val_graphs = make_validation_graphs(seed=config.seed + 7919,
                                        count=config.validation_size,
                                        n_range=config.validation_n_range)
    log_rows: list[dict] = []
    val_history: list[tuple[int, float]] = []
    fh = open(log_file, "a" if resume_from else "w") if log_file else None
    if fh and not resume_from:
        fh.write("step,episode,q_loss,pi_loss,entropy,validation_auc\n")

    def emit(step, metrics, val=""):
        row = {"step": step, "episode": episode, "validation_auc": val, **metrics}
        log_rows.append(row)
        if fh:
            fh.write(f"{step},{episode},{metrics.get('q_loss', '')},"
                     f"{metrics.get('pi_loss', '')},{metrics.get('entropy', '')},{val}\n")
            fh.flush()

    gid = int(rng.integers(len(corpus)))
    g = corpus[gid].copy()
    n0 = g.n_active
    metrics: dict = {}
    updates = 0
    t_start = time.time()
    for s in range(start_step, config.total_steps):
        if s < config.start_learning:
            active = g.active_nodes()
            v = int(active[rng.integers(len(active))])
        else:
            v = select_action(g, params, rng, greedy=False)
        tr, _, terminal = make_transition(g, gid, v, n0, config.episode_threshold)
        buffer.push(tr)
        step = s + 1
        if terminal:
            episode += 1
            gid = int(rng.integers(len(corpus)))
            g = corpus[gid].copy()
            n0 = g.n_active
        if step > config.start_learning and step % config.update_frequency == 0 \
                and len(buffer) >= config.batch_size:
            try:
                metrics = sac_update(params, opt, buffer, rng)
            except FloatingPointError:
                if checkpoint_file:  # diagnostic dump for post-mortem
                    save_agent(checkpoint_file + ".diag", params, opt, step, episode)
                    log.error("non-finite loss at step %d; state dumped to %s.diag",
                              step, checkpoint_file)
                raise
            updates += 1
            if updates % log_every_updates == 0:
                emit(step, metrics)
        if step > config.start_learning and step % config.target_update_frequency == 0:
            params.sync_targets()
        if step % config.validation_interval == 0:
            val = validate(params, val_graphs, config.episode_threshold)
            val_history.append((step, val))
            emit(step, metrics, val=f"{val:.6f}")
            log.info("step %d: validation auc %.4f (%.1f s elapsed)",
                     step, val, time.time() - t_start)
            if checkpoint_file:
                save_agent(checkpoint_file, params, opt, step, episode)
    if checkpoint_file:
        save_agent(checkpoint_file, params, opt, config.total_steps, episode)
    if fh:
        fh.close()
    return TrainResult(params, log_rows, config.total_steps, episode, val_history)
