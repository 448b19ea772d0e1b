"""Run configuration: an INI file with fixed sections and keys.

Grammar (``configparser`` syntax, ``#`` or ``;`` comments)::

    [game]        a, b, c, d, non_potential
    [model]       beta            (a number or "inf")
    [graph]       family, size    (e.g. cycle / 8, grid / 3x4)  or  file
    [scheduler]   kind            random | round-robin | periodic | adversary | contagion
                  order, sets, r, construction, start, kernel
    [run]         stop, budget, start, restricted, seed
    [experiment]  p, replicas, budget, random_starts, sizes, size_map, pilot, betas,
                  r, k, set, horizon, construction, f, rounds, threads

Unknown sections or keys are rejected with the offending name.
"""
from __future__ import annotations

import configparser
import hashlib
import math

from .graphs import make_family, read_graph_file
from .model import ModelParams, PayoffMatrix, all_a, all_b, from_bitstring
from .schedulers import (AdversarialScheduler, ContagionScheduler, PeriodicScheduler,
                         RandomScheduler)

SCHEMA = {
    "game": {
        "a": "A-vs-A payoff",
        "b": "B-vs-B payoff",
        "c": "payoff of A against B",
        "d": "payoff of B against A",
        "non_potential": "allow c != d (true/false)",
    },
    "model": {
        "beta": "inverse noise; 'inf' for best response",
    },
    "graph": {
        "family": "cycle | line | complete | grid",
        "size": "family size, e.g. 8 or 3x4",
        "file": "edge-list file ('n m' header, 'h k w' lines, optional contagion: block)",
    },
    "scheduler": {
        "kind": "random | round-robin | periodic | adversary | contagion",
        "order": "permutation, comma separated",
        "sets": "periodic support sets, e.g. 0,1,2;3,4",
        "r": "adversary fraction",
        "construction": "adversary hammer rule: literal | containing",
        "start": "contagion start vertex (default: middle vertex)",
        "kernel": "contagion kernel: neighbors | file",
    },
    "run": {
        "stop": "steps:T | fractionA:p | absorption | rounds:R, joined by |",
        "budget": "hard step budget",
        "start": "all-B | all-A | bitstring (vertex 0 first)",
        "restricted": "vertices that follow the log-linear rule; others always pick B",
        "seed": "64-bit master seed",
    },
    "experiment": {
        "p": "inertia level: stop at (1-p)n A-players",
        "replicas": "Monte-Carlo replicas",
        "budget": "censoring budget per replica",
        "random_starts": "extra uniformly drawn start configurations",
        "sizes": "scaling sizes, comma separated",
        "size_map": "graph size from scaling size: n | 2n+1",
        "pilot": "choose beta by the pilot rule (true/false)",
        "betas": "pilot candidates, comma separated",
        "r": "close-knit ratio or containment level",
        "k": "close-knit set size",
        "set": "vertex set for a close-knit ratio",
        "horizon": "adversary steps per replica",
        "construction": "adversary hammer rule: containing | literal",
        "f": "fairness shape: n | nlogn | n2",
        "rounds": "rounds for fairness estimation",
        "threads": "worker threads",
    },
}

COMMANDS = {
    "simulate": "run the dynamics and write trace.csv",
    "exact-stationary": "exact stationary distribution vs Gibbs (stationary.csv)",
    "stable-states": "minimum-resistance trees per state (stable_states.csv)",
    "close-knit": "close-knit ratio of a set or an (r, k) search (close_knit.csv)",
    "inertia": "Monte-Carlo p-inertia (inertia.csv)",
    "scaling": "p-inertia over sizes with a log-log fit (scaling.csv)",
    "adversary": "adversary containment run (adversary.csv)",
    "fairness": "round lengths and tail profile of a scheduler (fairness.csv)",
}


class ConfigError(ValueError):
    """A configuration field is missing or malformed."""


class RunConfig:
    """Validated view of a parsed configuration file."""

    def __init__(self, parser):
        self._p = parser
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key in parser[section]:
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key '{key}' in [{section}]")

    @classmethod
    def from_text(cls, text):
        p = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            p.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        return cls(p)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())

    # -- raw access ---------------------------------------------------------------

    def get(self, section, key, default=None):
        if self._p.has_option(section, key):
            return self._p.get(section, key).strip()
        return default

    def _typed(self, section, key, conv, default):
        raw = self.get(section, key)
        if raw is None:
            if default is _REQUIRED:
                raise ConfigError(f"[{section}] {key} is required")
            return default
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None

    def float(self, section, key, default=None):
        return self._typed(section, key, float, default)

    def int(self, section, key, default=None):
        return self._typed(section, key, lambda s: int(s, 0), default)

    def bool(self, section, key, default=False):
        return self._typed(section, key, _parse_bool, default)

    def ints(self, section, key, default=None):
        return self._typed(section, key, _int_list, default)

    def floats(self, section, key, default=None):
        return self._typed(section, key, lambda s: [float(t) for t in s.split(",") if t.strip()], default)

    def canonical(self):
        lines = []
        for section in sorted(self._p.sections()):
            for key in sorted(self._p[section]):
                lines.append(f"{section}.{key}={self._p[section][key].strip()}")
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    # -- typed sections --------------------------------------------------------

    def payoff(self):
        vals = [self.float("game", k, _REQUIRED) for k in "abcd"]
        try:
            return PayoffMatrix(*vals, non_potential=self.bool("game", "non_potential"))
        except ValueError as exc:
            raise ConfigError(f"[game] {exc}") from None

    def params(self):
        beta = self._typed("model", "beta", _parse_beta, _REQUIRED)
        try:
            return ModelParams(beta)
        except ValueError as exc:
            raise ConfigError(f"[model] beta: {exc}") from None

    def graph(self, size=None):
        """The configured graph and any contagion matrix from its file."""
        path = self.get("graph", "file")
        if path is not None:
            if size is not None:
                raise ConfigError("[graph] file cannot be combined with scaling sizes")
            try:
                return read_graph_file(path)
            except OSError as exc:
                raise ConfigError(f"[graph] file: {exc}") from None
        family = self.get("graph", "family")
        if family is None:
            raise ConfigError("[graph] needs either file or family")
        dims = _parse_size(self.get("graph", "size")) if size is None else (size,)
        if dims is None:
            raise ConfigError("[graph] size is required with family")
        try:
            return make_family(family, *dims), None
        except ValueError as exc:
            raise ConfigError(f"[graph] {exc}") from None

    def scheduler(self, graph, contagion=None):
        kind = (self.get("scheduler", "kind") or "random").lower()
        n = graph.n
        try:
            order = self.ints("scheduler", "order")
            if kind == "random":
                return RandomScheduler()
            if kind == "round-robin":
                return PeriodicScheduler.round_robin(n, order)
            if kind == "periodic":
                raw = self.get("scheduler", "sets")
                if raw is None:
                    raise ConfigError("[scheduler] periodic needs sets")
                sets = [_int_list(part) for part in raw.split(";") if part.strip()]
                return PeriodicScheduler.uniform_sets(n, sets, order)
            if kind == "adversary":
                r = self.float("scheduler", "r", _REQUIRED)
                how = self.get("scheduler", "construction", "containing")
                if how == "containing":
                    return AdversarialScheduler.containing(n, r, order)
                if how == "literal":
                    return AdversarialScheduler(r, tuple(order) if order else tuple(range(n)))
                raise ConfigError(f"[scheduler] construction must be literal or containing, got {how!r}")
            if kind == "contagion":
                source = self.get("scheduler", "kernel", "file" if contagion is not None else "neighbors")
                start = self.int("scheduler", "start", (n - 1) // 2)
                if source == "neighbors":
                    return ContagionScheduler.neighbor_walk(graph, start)
                if source == "file":
                    if contagion is None:
                        raise ConfigError("[scheduler] kernel = file needs a contagion: block in the graph file")
                    return ContagionScheduler(contagion, start)
                raise ConfigError(f"[scheduler] kernel must be neighbors or file, got {source!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"[scheduler] {exc}") from None
        raise ConfigError(f"[scheduler] unknown kind {kind!r}")

    def start(self, n):
        raw = self.get("run", "start", "all-B")
        if raw.lower() == "all-b":
            return all_b(n)
        if raw.lower() == "all-a":
            return all_a(n)
        try:
            cfg = from_bitstring(raw)
        except ValueError as exc:
            raise ConfigError(f"[run] start: {exc}") from None
        if cfg.size != n:
            raise ConfigError(f"[run] start has {cfg.size} entries, graph has {n} vertices")
        return cfg

    def seed(self, override=None):
        if override is not None:
            return int(override) & ((1 << 64) - 1)
        return self.int("run", "seed", 0) & ((1 << 64) - 1)


_REQUIRED = object()


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _parse_beta(s):
    if s.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(s)


def _int_list(s):
    return [int(t) for t in s.split(",") if t.strip()]


def _parse_size(s):
    if s is None:
        return None
    try:
        return tuple(int(t) for t in s.lower().split("x"))
    except ValueError:
        raise ConfigError(f"[graph] size must look like 8 or 3x4, got {s!r}") from None


def size_mapper(spec):
    if spec in (None, "n"):
        return lambda s: s
    if spec == "2n+1":
        return lambda s: 2 * s + 1
    raise ConfigError(f"[experiment] size_map must be n or 2n+1, got {spec!r}")


def config_keys():
    """``section.key: description`` lines for help output."""
    return [f"[{s}] {k}: {d}" for s, keys in SCHEMA.items() for k, d in keys.items()]
