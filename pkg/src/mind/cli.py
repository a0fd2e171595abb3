"""Command-line entry point.

Subcommands: generate, train, dismantle, baseline, evaluate, spectral,
selfcheck.  Every run prints its resolved configuration unless --quiet.
Exit codes: 0 success, 1 contract violation, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .errors import ContractError, ParseError

log = logging.getLogger("mind")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mind",
        description="Network dismantling: synthetic graph generation, "
                    "attention message-passing RL training, rollouts, baselines.")
    parser.add_argument("--seed", type=int, default=0, help="global RNG seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for generation/evaluation")
    parser.add_argument("--quiet", action="store_true", help="suppress config echo")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write synthetic training graphs + manifest")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rewire", choices=("on", "off"), default="on")
    p.add_argument("--manifest", default="manifest.csv", help="manifest file name")
    p.add_argument("--n-min", type=int, default=100)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--m-choices", default="paper",
                   help="'paper' for the Appendix sets, or comma-separated ints")

    p = sub.add_parser("train", help="train the dismantling policy")
    p.add_argument("--data", required=True, help="directory of edge-list files")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None, help="key=value override file")
    p.add_argument("--validate-every", type=int, default=None)
    p.add_argument("--desk", action="store_true",
                   help="desk-scale defaults (2e5 steps, 1e5 buffer, 5e3 start)")
    p.add_argument("--resume", action="store_true",
                   help="continue from the checkpoint in --out")

    p = sub.add_parser("dismantle", help="roll out a trained policy on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="curve CSV path")
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--batch-frac", type=float, default=None)
    p.add_argument("--mode", choices=("argmax", "sample"), default="argmax")
    p.add_argument("--desk", action="store_true",
                   help="checkpoint was trained with desk-scale config")

    p = sub.add_parser("baseline", help="classic dismantling baselines")
    p.add_argument("--graph", required=True)
    p.add_argument("--method", choices=("ad", "pr", "bc", "random"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.1)

    p = sub.add_parser("evaluate", help="relative-AUC report over curve files")
    p.add_argument("curves", nargs="+", help="curve CSV files (method = file stem)")
    p.add_argument("--reference", required=True)
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--out", default=None, help="write the report CSV here")

    p = sub.add_parser("spectral", help="Fiedler-direction estimate vs dense oracle")
    p.add_argument("--graph", required=True)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--out", default=None)

    sub.add_parser("selfcheck", help="fast invariant suite (CI smoke test)")
    return parser


def _echo_config(args: argparse.Namespace) -> None:
    if not args.quiet:
        pairs = {k: v for k, v in sorted(vars(args).items()) if k != "quiet"}
        print("config:", " ".join(f"{k}={v}" for k, v in pairs.items()))


# -- generate ---------------------------------------------------------------------


def _generate_one(task):
    idx, seed, n_range, m_choices, rewire, out_dir = task
    from .graph import degree_assortativity, modularity_report, save_edge_list
    from .netgen import sample_training_graph

    # identical to np.random.SeedSequence(seed).spawn(count)[idx], so the
    # corpus is the same regardless of worker count
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))
    g, rec = sample_training_graph(rng, n_range=n_range, m_choices=m_choices,
                                   rewire=rewire)
    path = os.path.join(out_dir, f"graph_{idx:05d}.edges")
    save_edge_list(g, path)
    assort = degree_assortativity(g).value
    q = modularity_report(g)
    return (idx, rec.model, g.n_total, rec.m, f"{rec.gamma:.4f}", rec.label_mode,
            f"{rec.target:g}" if rec.rewired else "",
            f"{rec.achieved:.4f}" if rec.rewired else "",
            f"{assort:.4f}", f"{q:.4f}")


def cmd_generate(args) -> int:
    from .netgen import PAPER_M_SETS

    if args.count < 1:
        raise ContractError("--count must be >= 1")
    m_choices = None
    if args.m_choices != "paper":
        m_choices = tuple(int(x) for x in args.m_choices.split(","))
    os.makedirs(args.out, exist_ok=True)
    tasks = [(i, args.seed, (args.n_min, args.n_max), m_choices,
              args.rewire == "on", args.out) for i in range(args.count)]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_generate_one, tasks))
    else:
        rows = [_generate_one(t) for t in tasks]
    manifest = os.path.join(args.out, args.manifest)
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "model", "n", "m", "gamma", "label_mode",
                         "target", "achieved", "assortativity", "modularity"])
        writer.writerows(rows)
    print(f"wrote {args.count} graphs + {manifest}")
    return 0


# -- train ------------------------------------------------------------------------------


def _parse_config_overrides(path: str, cfg):
    import ast

    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value")
            key, value = (x.strip() for x in line.split("=", 1))
            if not hasattr(cfg, key):
                raise ContractError(f"{path}:{lineno}: unknown config key {key!r}")
            current = getattr(cfg, key)
            try:
                parsed = ast.literal_eval(value)
            except (SyntaxError, ValueError):
                raise ParseError(f"{path}:{lineno}: cannot parse value {value!r}") from None
            if isinstance(current, tuple) and isinstance(parsed, list):
                parsed = tuple(parsed)
            cfg = replace(cfg, **{key: parsed})
    return cfg


def cmd_train(args) -> int:
    from .agent import TrainerConfig, desk_config, train
    from .checkpoint_agent import load_agent
    from .graph import load_edge_list

    files = sorted(f for f in os.listdir(args.data) if f.endswith(".edges"))
    if not files:
        raise ContractError(f"no .edges files in {args.data}")
    corpus = [load_edge_list(os.path.join(args.data, f)) for f in files]
    cfg = desk_config(seed=args.seed) if args.desk else TrainerConfig(seed=args.seed)
    if args.config:
        cfg = _parse_config_overrides(args.config, cfg)
    if args.steps is not None:
        cfg = replace(cfg, total_steps=args.steps)
    if args.validate_every is not None:
        cfg = replace(cfg, validation_interval=args.validate_every)
    os.makedirs(args.out, exist_ok=True)
    ck = os.path.join(args.out, "checkpoint.mind")
    resume = None
    if args.resume:
        params, opt, step, episode = load_agent(ck, cfg)
        resume = {"params": params, "opt": opt, "step": step, "episode": episode}
        print(f"resuming from step {step}")
    if not args.quiet:
        print(f"trainer config: {cfg}")
    result = train(cfg, corpus, log_file=os.path.join(args.out, "train_log.csv"),
                   checkpoint_file=ck, resume_from=resume)
    print(f"trained to step {result.steps_done} ({result.episodes} episodes); "
          f"checkpoint: {ck}")
    return 0


# -- dismantle / baseline / evaluate / spectral -------------------------------------------


def _load_policy_for(args):
    from .agent import TrainerConfig, desk_config
    from .checkpoint_agent import load_policy

    cfg = desk_config(seed=0) if getattr(args, "desk", False) else TrainerConfig()
    return load_policy(args.checkpoint, cfg)


def cmd_dismantle(args) -> int:
    from .dismantler import RolloutConfig, rollout
    from .graph import load_edge_list, write_curve

    g = load_edge_list(args.graph)
    params = _load_policy_for(args)
    cfg = RolloutConfig(threshold=args.threshold, batch_frac=args.batch_frac,
                        mode=args.mode, seed=args.seed)
    curve = rollout(g, params, cfg)
    write_curve(curve, args.out)
    print(f"{args.out}: {len(curve)} removals, auc={curve.auc:.6g}")
    return 0


def cmd_baseline(args) -> int:
    from . import dismantler
    from .graph import load_edge_list, write_curve

    g = load_edge_list(args.graph)
    fn = {"ad": dismantler.baseline_adaptive_degree,
          "pr": dismantler.baseline_pagerank,
          "bc": dismantler.baseline_betweenness,
          "random": lambda gr, th: dismantler.baseline_random(gr, th, seed=args.seed)}
    curve = fn[args.method](g, args.threshold)
    write_curve(curve, args.out)
    print(f"{args.out}: {len(curve)} removals, auc={curve.auc:.6g}")
    return 0


def cmd_evaluate(args) -> int:
    from .dismantler import relative_auc
    from .graph import read_curve

    aucs, full = {}, {}
    for path in args.curves:
        method = os.path.splitext(os.path.basename(path))[0]
        curve = read_curve(path)
        below = np.flatnonzero(curve.lcc_fractions < args.threshold)
        term = int(below[0]) if below.size else len(curve.lcc_fractions) - 1
        aucs[method] = float(curve.lcc_fractions[: term + 1].sum())
        full[method] = float(curve.lcc_fractions.sum())
    rel = relative_auc(aucs, args.reference)
    lines = ["method,auc,auc_full,relative_auc"]
    for method in aucs:
        lines.append(f"{method},{aucs[method]:.6g},{full[method]:.6g},{rel[method]:.2f}")
    report = "\n".join(lines)
    print(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report + "\n")
    return 0


def cmd_spectral(args) -> int:
    from .diffcore import symmetric_eigh
    from .encoder import fiedler_estimate, normalized_laplacian
    from .graph import load_edge_list

    g = load_edge_list(args.graph)
    est = fiedler_estimate(g, iters=args.iters)
    lap = normalized_laplacian(g)
    _, vecs = symmetric_eigh(lap)
    oracle = vecs[:, 1]
    denom = np.linalg.norm(est) * np.linalg.norm(oracle)
    cosine = abs(est @ oracle) / denom if denom > 0 else 0.0
    lines = ["node,estimate,oracle,cosine"]
    for node, (e, o) in enumerate(zip(est, oracle)):
        lines.append(f"{node},{e:.8g},{o:.8g},{cosine:.6f}")
    out = "\n".join(lines)
    print(out)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    return 0


# -- selfcheck ----------------------------------------------------------------------------


def cmd_selfcheck(args) -> int:
    """Fast invariant suite: AUC oracle equality, a gradient check, the
    softmax-collapse comparison, spectral sanity, and swap invariants."""
    from . import diffcore as dc
    from .diffcore import symmetric_eigh
    from .encoder import (EncoderConfig, EncoderParams, encode, fiedler_estimate,
                          init_reference_params, normalized_laplacian,
                          softmax_attention_reference)
    from .graph import Graph, auc_for_order
    from .netgen import GenSpec, RewireSpec, gen_lpa, rewire_to_target

    rng = np.random.default_rng(args.seed)
    failures = 0

    def report(name, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    # exact curve vs naive recomputation
    ok = True
    for _ in range(20):
        n = int(rng.integers(5, 40))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.2]
        if not pairs:
            pairs = [(0, 1)]
        g = Graph(n, np.array(pairs))
        order = rng.permutation(n)[: int(rng.integers(1, n + 1))]
        curve = auc_for_order(g, order, 0.0)
        removed = set()
        for t, v in enumerate(order):
            removed.add(int(v))
            comp = {x: x for x in range(n) if x not in removed}

            def find(x):
                while comp[x] != x:
                    comp[x] = comp[comp[x]]
                    x = comp[x]
                return x

            for a, b in pairs:
                if a not in removed and b not in removed:
                    ra, rb = find(a), find(b)
                    if ra != rb:
                        comp[ra] = rb
            sizes = {}
            for x in comp:
                r = find(x)
                sizes[r] = sizes.get(r, 0) + 1
            frac = (max(sizes.values()) if sizes else 0) / n
            if frac != curve.lcc_fractions[t]:
                ok = False
    report("lcc-auc reverse union-find equals naive recomputation", ok)

    # gradient spot check (float64 central differences)
    w = dc.param(rng.normal(size=(4, 3)))
    x = dc.constant(rng.normal(size=(5, 4)))
    with dc.Tape():
        loss = dc.mean_all(dc.sigmoid(dc.matmul(x, w)))
        dc.backward(loss)
    i, j, h = 2, 1, 1e-6
    base = w.data[i, j]
    vals = []
    for delta in (h, -h):
        w.data[i, j] = base + delta
        with dc.Tape():
            vals.append(float(dc.mean_all(dc.sigmoid(dc.matmul(x, w))).data))
    w.data[i, j] = base
    numeric = (vals[0] - vals[1]) / (2 * h)
    report("reverse-mode gradient matches finite differences",
           abs(numeric - w.grad[i, j]) / max(abs(numeric), 1e-9) < 1e-5)

    # softmax-normalized attention collapses from constant init; ours does not
    cfg = EncoderConfig()
    g = Graph(6, np.array([(0, i) for i in range(1, 6)]))
    states = softmax_attention_reference(g, cfg, init_reference_params(cfg, rng))
    collapse = max(s.reshape(6, -1).var(axis=0).max() for s in states) < 1e-12
    separate = encode(g, EncoderParams.create(cfg, seed=int(rng.integers(2**31)))
                      ).profiles.var(axis=0).max() > 1e-6
    report("softmax-normalized attention collapses on constant init", collapse)
    report("unnormalized attention separates nodes from constant init", separate)

    # spectral estimate vs dense Jacobi oracle on a barbell
    edges = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    edges += [(5 + i, 5 + j) for i in range(5) for j in range(i + 1, 5)]
    edges.append((4, 5))
    bb = Graph(10, np.array(edges))
    est = fiedler_estimate(bb, iters=500)
    _, vecs = symmetric_eigh(normalized_laplacian(bb))
    cos = abs(est @ vecs[:, 1]) / (np.linalg.norm(est) * np.linalg.norm(vecs[:, 1]))
    report("fiedler estimate matches eigensolver oracle (barbell)", cos >= 0.99)

    # rewiring preserves degrees and connectivity
    g = gen_lpa(GenSpec("lpa", n=60, m=2, gamma=3.0), rng)
    before = np.sort(g.degrees.copy())
    out, _ = rewire_to_target(g, RewireSpec("random", target=0.3), rng)
    from .graph import is_connected
    report("double-edge swaps preserve degrees and connectivity",
           bool(np.array_equal(np.sort(out.degrees), before) and is_connected(out)))

    print(f"selfcheck: {6 - failures}/6 passed")
    return 1 if failures else 0


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "dismantle": cmd_dismantle,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
    "spectral": cmd_spectral,
    "selfcheck": cmd_selfcheck,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.quiet:
        logging.getLogger().setLevel(logging.WARNING)
    _echo_config(args)
    try:
        return COMMANDS[args.command](args)
    except (ContractError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
