"""Command-line front end: ``normdiff COMMAND --config run.ini [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import exact, experiments
from .config import COMMANDS, ConfigError, RunConfig, config_keys, size_mapper
from .dynamics import CsvTraceSink, make_rng, parse_stop, run
from .errors import CapacityError, CensoredError, ReducibleChainError
from .graphs import close_knit_ratio, is_rk_close_knit
from .model import potential
from .schedulers import F_SHAPES, fairness_whp_estimate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPACITY = 3
EXIT_CENSORED = 4
HELP_WIDTH = 100


class Context:
    def __init__(self, cfg, seed, threads, out):
        self.cfg = cfg
        self.seed = seed
        self.threads = threads
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)

    def footer(self):
        return f"# version={__version__}, config={self.cfg.digest()}, seed={self.seed}"

    def write(self, name, header, rows):
        with open(self.out / name, "w", newline="") as fh:
            experiments.write_rows(fh, header, rows, self.footer())


def _fmt(x):
    return f"{x:.12g}" if isinstance(x, float) else x


# -- commands -------------------------------------------------------------------------

def cmd_simulate(ctx):
    cfg = ctx.cfg
    graph, contagion = cfg.graph()
    payoff, params = cfg.payoff(), cfg.params()
    sched = cfg.scheduler(graph, contagion)
    try:
        stop = parse_stop(cfg.get("run", "stop", "steps:1000"))
    except ValueError as exc:
        raise ConfigError(f"[run] stop: {exc}") from None
    restricted = cfg.ints("run", "restricted")
    with open(ctx.out / "trace.csv", "w", newline="") as fh:
        sink = CsvTraceSink(fh)
        res = run(graph, payoff, cfg.start(graph.n), sched, params, stop, make_rng(ctx.seed),
                  sink=sink, budget=cfg.int("run", "budget"), restricted=restricted)
        fh.write(ctx.footer() + "\n")
    print(f"steps={res.steps} fraction_A={res.fraction_a:.6g} rounds={res.rounds} "
          f"potential={res.potential:.12g} truncated={res.truncated}")


def _chain_inputs(cfg):
    graph, contagion = cfg.graph()
    return graph, cfg.payoff(), cfg.params(), cfg.scheduler(graph, contagion), cfg.ints("run", "restricted")


def cmd_exact_stationary(ctx):
    graph, payoff, params, sched, restricted = _chain_inputs(ctx.cfg)
    chain = exact.build_chain(graph, payoff, params, sched, restricted)
    mu = exact.stationary(chain, allow_transient=restricted is not None)
    g = None
    if payoff.is_potential and chain.aux == 1 and not math.isinf(params.beta):
        g = exact.gibbs(graph, payoff, params.beta, support=restricted)
    rows = []
    for s in range(chain.size):
        cfg_s = chain.config_of(s)
        rows.append((chain.label(s), _fmt(float(mu[s])), "" if g is None else _fmt(float(g[s])),
                     _fmt(float(potential(graph, cfg_s, payoff)))))
    ctx.write("stationary.csv", ("state", "stationary", "gibbs", "potential"), rows)
    msg = f"states={chain.size} irreducible={chain.irreducible} aperiodic={chain.aperiodic}"
    if g is not None:
        msg += f" linf_vs_gibbs={np.max(np.abs(mu - g)):.3g}"
    print(msg)


def cmd_stable_states(ctx):
    graph, payoff, _params, sched, restricted = _chain_inputs(ctx.cfg)
    dg = exact.resistance_digraph(graph, payoff, sched, restricted)
    rep = exact.stable_states(dg)
    stable = set(rep.stable)
    rows = []
    for s in range(dg.size):
        rows.append((dg.label(s), _fmt(float(potential(graph, dg.config_of(s), payoff))),
                     "" if np.isnan(rep.per_root[s]) else _fmt(float(rep.per_root[s])), int(s in stable)))
    ctx.write("stable_states.csv", ("state", "potential", "min_tree_resistance", "stable"), rows)
    print(f"min_resistance={rep.minimum:.12g} stable={' '.join(rep.stable_labels())}")


def cmd_close_knit(ctx):
    cfg = ctx.cfg
    graph, _ = cfg.graph()
    S = cfg.ints("experiment", "set")
    if S is not None:
        rep = close_knit_ratio(graph, S)
        ctx.write("close_knit.csv", ("set", "min_ratio", "witness", "edges_inside", "degree_sum"),
                  [(" ".join(map(str, rep.S)), _fmt(float(rep.min_ratio)),
                    " ".join(map(str, rep.witness)), rep.edges_inside, rep.degree_sum)])
        print(f"min_ratio={rep.min_ratio:.12g} witness={list(rep.witness)}")
        return
    r = cfg.float("experiment", "r")
    k = cfg.int("experiment", "k")
    if r is None or k is None:
        raise ConfigError("[experiment] close-knit needs either set, or r and k")
    res = is_rk_close_knit(graph, r, k)
    rows = []
    for v in range(graph.n):
        if v in res.witnesses:
            rows.append((v, "witness", " ".join(map(str, res.witnesses[v]))))
        elif v in res.failing:
            rows.append((v, "none", ""))
        else:
            rows.append((v, "budget", ""))
    ctx.write("close_knit.csv", ("vertex", "status", "set"), rows)
    print(f"r={r:g} k={k} holds={res.holds}")


def _beta(ctx, graph, payoff, sched, p, replicas, budget):
    cfg = ctx.cfg
    if not cfg.bool("experiment", "pilot"):
        return cfg.params().beta
    betas = cfg.floats("experiment", "betas", list(experiments.PILOT_BETAS))
    beta, rates = experiments.pilot_beta(graph, payoff, sched, p, betas, max(replicas, 30), budget,
                                         ctx.seed, ctx.threads)
    print("pilot censoring rates: " + " ".join(f"beta={b:g}:{x:.3f}" for b, x in rates.items()))
    if beta is None:
        raise CensoredError("no pilot beta reached a censoring rate below 5%")
    return beta


def cmd_inertia(ctx):
    cfg = ctx.cfg
    graph, contagion = cfg.graph()
    payoff = cfg.payoff()
    sched = cfg.scheduler(graph, contagion)
    p = cfg.float("experiment", "p", 0.1)
    replicas = cfg.int("experiment", "replicas", 50)
    budget = cfg.int("experiment", "budget")
    beta = _beta(ctx, graph, payoff, sched, p, replicas, budget)
    est = experiments.p_inertia_mc(graph, payoff, sched, beta, p, replicas, budget, ctx.seed,
                                   random_starts=cfg.int("experiment", "random_starts", 0),
                                   threads=ctx.threads)
    ctx.write("inertia.csv", experiments.INERTIA_HEADER, est.rows(cfg.get("graph", "family")))
    print(f"n={est.n} beta={est.beta:g} p={p:g} start={est.policy} mean={est.mean:.6g} "
          f"ci95={est.half_width:.3g} censored={est.censored}/{replicas} budget={est.budget}")
    if not est.usable:
        raise CensoredError("every replica was censored; estimate unusable")


def cmd_scaling(ctx):
    cfg = ctx.cfg
    sizes = cfg.ints("experiment", "sizes")
    if sizes is None:
        raise ConfigError("[experiment] sizes is required for scaling")
    family = cfg.get("graph", "family")
    if family is None:
        raise ConfigError("[graph] family is required for scaling")
    mapper = size_mapper(cfg.get("experiment", "size_map"))
    payoff = cfg.payoff()
    p = cfg.float("experiment", "p", 0.1)
    replicas = cfg.int("experiment", "replicas", 50)
    budget = cfg.int("experiment", "budget")
    build_graph = lambda s: cfg.graph(mapper(s))[0]
    build_sched = lambda g: cfg.scheduler(g)
    g0 = build_graph(sizes[0])
    beta = _beta(ctx, g0, payoff, build_sched(g0), p, replicas, budget)
    rep = experiments.scaling_experiment(family, sizes, build_graph, build_sched, payoff, beta, p,
                                         replicas, ctx.seed, budget, ctx.threads)
    rows = [row for e in rep.estimates for row in e.rows(family)]
    ctx.write("inertia.csv", experiments.INERTIA_HEADER, rows)
    ctx.write("scaling.csv", experiments.SCALING_HEADER, [tuple(_fmt(x) for x in rep.row())])
    for e in rep.estimates:
        print(f"n={e.n} mean={e.mean:.6g} ci95={e.half_width:.3g} censored={e.censored}/{replicas}")
    print(f"beta={beta:g} slope={rep.slope:.4f} stderr={rep.stderr:.4f} intercept={rep.intercept:.4f}")
    if not any(e.usable for e in rep.estimates):
        raise CensoredError("every replica at every size was censored")


def cmd_adversary(ctx):
    cfg = ctx.cfg
    graph, _ = cfg.graph()
    r = cfg.float("experiment", "r")
    if r is None:
        raise ConfigError("[experiment] r is required for adversary")
    rep = experiments.adversary_containment(
        graph, r, cfg.params().beta, cfg.int("experiment", "horizon", 10**6),
        cfg.int("experiment", "replicas", 50), ctx.seed, cfg.payoff(),
        cfg.get("experiment", "construction", "containing"), cfg.get("experiment", "f", "nlogn"),
        ctx.threads)
    rows = [(i, _fmt(float(x))) for i, x in enumerate(rep.per_replica_max)]
    ctx.write("adversary.csv", ("replica", "max_fraction_A"), rows)
    if rep.offending:
        ctx.write("offending_trace.csv", ("step", "vertex", "pre", "post", "countA"), rep.offending)
    print(f"n={rep.n} r={r:g} max_fraction_A={rep.max_fraction:.6g} exceedances={rep.exceedances} "
          f"g_hat(8)={rep.g_hat(8):.3g} capped={rep.capped}")


def cmd_fairness(ctx):
    cfg = ctx.cfg
    graph, contagion = cfg.graph()
    sched = cfg.scheduler(graph, contagion)
    f = cfg.get("experiment", "f", "nlogn")
    if f not in F_SHAPES:
        raise ConfigError(f"[experiment] f must be one of {sorted(F_SHAPES)}, got {f!r}")
    beta = cfg.params().beta if cfg.get("model", "beta") is not None else 0.0
    payoff = cfg.payoff() if cfg.get("game", "a") is not None else None
    rep = fairness_whp_estimate(sched, f, graph.n, cfg.int("experiment", "rounds", 1000),
                                graph=graph if sched.adaptive else None, payoff=payoff,
                                beta=beta, seed=ctx.seed)
    ctx.write("fairness.csv", ("round", "length"), list(enumerate(rep.round_lengths.tolist())))
    tail = " ".join(f"g_hat({e:g})={v:.4g}" for e, v in rep.tail.items())
    print(f"rounds={rep.round_lengths.size} mean_length={rep.round_lengths.mean():.6g} "
          f"C={rep.c_estimate:.4g} {tail}")


HANDLERS = {
    "simulate": cmd_simulate,
    "exact-stationary": cmd_exact_stationary,
    "stable-states": cmd_stable_states,
    "close-knit": cmd_close_knit,
    "inertia": cmd_inertia,
    "scaling": cmd_scaling,
    "adversary": cmd_adversary,
    "fairness": cmd_fairness,
}


def build_parser():
    commands = "\n".join(f"  {name:<18}{text}" for name, text in COMMANDS.items())
    keys = "\n".join(f"  {line}" for line in config_keys())
    epilog = (f"commands:\n{commands}\n\nconfig keys (INI sections):\n{keys}\n\n"
              "exit codes: 0 ok, 2 invalid config, 3 capacity exceeded, 4 all runs censored")
    parser = argparse.ArgumentParser(
        prog="normdiff",
        description="Simulate and analyse log-linear norm diffusion on networks.",
        epilog=epilog,
        formatter_class=lambda prog: argparse.RawDescriptionHelpFormatter(prog, width=HELP_WIDTH),
    )
    parser.add_argument("command", choices=list(COMMANDS), metavar="COMMAND", help="one of the commands below")
    parser.add_argument("--config", required=True, metavar="PATH", help="INI run configuration")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides [run] seed)")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: CPU count)")
    parser.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = RunConfig.from_file(args.config)
        threads = args.threads or cfg.int("experiment", "threads") or os.cpu_count() or 1
        ctx = Context(cfg, cfg.seed(args.seed), threads, args.out)
        HANDLERS[args.command](ctx)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except CensoredError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CENSORED
    except (ValueError, OSError, ReducibleChainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
