"""Equational rule discovery over the typed substrates.

Each discovery epoch draws a batch of candidate terms from a generator,
normalizes them against the current rule set, groups them by the semantic
fingerprint of their normal forms (evaluation on shared environments,
exhaustive worlds for the boolean domain), and turns each group of two or
more into a candidate equation: the largest member oriented onto the
smallest.  Sound, strictly size-decreasing pairs are generalized to pattern
rules, passed through the acceptance filter, and committed.  Subterms of
committed equations feed a pool that the compositional generators draw
from.

A run is a pure function of its configuration: the pseudo-random stream is
a counter-based Philox generator keyed by the configuration fields, and all
tie-breaks are canonical-order deterministic.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .terms import (
    BOOL, INT, INTLIST, SubstrateSpec, SUBSTRATES, Term, evaluate, generalize,
    match, parse_term, pattern_variables, substitute, subterms,
)

GENERATORS = ("random", "compositional", "freq", "mdl_greedy")
FILTERS = ("any", "novelty")
SWEEP_DEPTHS = (2, 3, 4)
SWEEP_BATCH_SIZES = (40, 60, 80, 120, 160)

LEAF_PROB = 0.3          # grow-method leaf probability below the depth cap
SOUND_SAMPLES = 12       # random environments per soundness check
INT_LOW, INT_HIGH = -10, 10
LIST_LEN_MAX = 5
NORMALIZE_STEP_CAP = 48
MAX_CANDIDATE_SIZE = 64  # safety bound on compositional joins

PRNG_ID = f"philox4x64:numpy-{np.__version__}"
ENGINE_VERSION = f"eqgrow-{__version__}"

BOOL_WORLDS = tuple(
    {"p": p, "q": q, "r": r}
    for p, q, r in itertools.product((False, True), repeat=3)
)


class ConfigError(ValueError):
    """Configuration outside the supported sweep sets."""


@dataclass(frozen=True)
class ArchConfig:
    """One sweep point of the architecture grid."""

    domain: str
    generator: str
    filter: str
    depth: int
    batch_size: int
    seed: int
    epochs: int
    allow_overrides: bool = False

    def __post_init__(self):
        if self.domain not in SUBSTRATES:
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.generator not in GENERATORS:
            raise ConfigError(f"unknown generator {self.generator!r}")
        if self.filter not in FILTERS:
            raise ConfigError(f"unknown filter {self.filter!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not self.allow_overrides:
            if self.depth not in SWEEP_DEPTHS:
                raise ConfigError(f"depth {self.depth} outside sweep set {SWEEP_DEPTHS}")
            if self.batch_size not in SWEEP_BATCH_SIZES:
                raise ConfigError(
                    f"batch_size {self.batch_size} outside sweep set {SWEEP_BATCH_SIZES}")

    def key(self) -> tuple:
        return (self.domain, self.generator, self.filter, self.depth,
                self.batch_size, self.seed, self.epochs)


@dataclass(eq=False)
class Rule:
    """Oriented rewrite rule between two patterns."""

    lhs: Term
    rhs: Term
    hit_count: int = 0
    insertion_index: int = 0

    def key(self) -> tuple[str, str]:
        return (self.lhs.text, self.rhs.text)

    def format(self) -> str:
        return f"{self.lhs.text} => {self.rhs.text}"


@dataclass
class Trajectory:
    config: ArchConfig
    sizes: list[int]
    wall_clock_per_epoch: list[float] | None = None


@dataclass
class DiscoveryResult:
    trajectory: Trajectory
    rules: list[Rule]


# ---------------------------------------------------------------------------
# Rule sets and normalization
# ---------------------------------------------------------------------------

class RuleSet:
    """Committed rules with hit-count-descending application order.

    Ties break by insertion index ascending.  The sorted view is cached and
    refreshed lazily after hit counts change.
    """

    def __init__(self):
        self.rules: list[Rule] = []
        self._ordered: list[Rule] | None = []

    def __len__(self):
        return len(self.rules)

    def add(self, rule: Rule):
        self.rules.append(rule)
        self._ordered = None

    def mark_hits_changed(self):
        self._ordered = None

    def ordered(self) -> list[Rule]:
        if self._ordered is None:
            self._ordered = sorted(
                self.rules, key=lambda r: (-r.hit_count, r.insertion_index))
        return self._ordered


def _app_positions(term: Term) -> dict[str, list[tuple[int, ...]]]:
    """Preorder paths of operator nodes, grouped by operator symbol."""
    out: dict[str, list[tuple[int, ...]]] = {}
    stack = [(term, ())]
    while stack:
        t, path = stack.pop()
        if t.kind == "app":
            out.setdefault(t.label, []).append(path)
            for i in range(len(t.args) - 1, -1, -1):
                stack.append((t.args[i], path + (i,)))
    return out


def _subterm_at(term: Term, path: tuple[int, ...]) -> Term:
    for i in path:
        term = term.args[i]
    return term


def _replace_at(term: Term, path: tuple[int, ...], replacement: Term) -> Term:
    if not path:
        return replacement
    i = path[0]
    args = list(term.args)
    args[i] = _replace_at(args[i], path[1:], replacement)
    return Term("app", term.label, None, tuple(args), term.sort)


def normalize(term: Term, ruleset: RuleSet) -> Term:
    """Rewrite to a fixpoint or the step cap.

    At each step the first applicable rule wins (hit-count-descending rule
    order, preorder position scan within the term); each successful
    application increments that rule's hit count.
    """
    if not ruleset.rules:
        return term
    steps = 0
    while steps < NORMALIZE_STEP_CAP:
        positions = _app_positions(term)
        found = None
        for rule in ruleset.ordered():
            paths = positions.get(rule.lhs.label)
            if not paths:
                continue
            for path in paths:
                bindings = match(rule.lhs, _subterm_at(term, path))
                if bindings is not None:
                    found = (rule, path, bindings)
                    break
            if found:
                break
        if found is None:
            return term
        rule, path, bindings = found
        term = _replace_at(term, path, substitute(rule.rhs, bindings))
        rule.hit_count += 1
        ruleset.mark_hits_changed()
        steps += 1
    return term


def is_reducible(term: Term, ruleset: RuleSet) -> bool:
    """True when any rule matches any position of the term.

    Read-only probe: hit counts are not touched, so filter checks cannot
    perturb normalization order.
    """
    positions = _app_positions(term)
    for rule in ruleset.rules:
        for path in positions.get(rule.lhs.label, ()):
            if match(rule.lhs, _subterm_at(term, path)) is not None:
                return True
    return False


def filter_passes(kind: str, lhs: Term, rhs: Term, ruleset: RuleSet) -> bool:
    if kind == "any":
        return True
    if kind == "novelty":
        return not is_reducible(lhs, ruleset)
    raise ConfigError(f"unknown filter {kind!r}")


# ---------------------------------------------------------------------------
# Environments and soundness
# ---------------------------------------------------------------------------

def sample_env(spec: SubstrateSpec, rng: np.random.Generator) -> dict:
    """Random environment: ints uniform in [-10, 10], list lengths in [0, 5]."""
    env: dict = {}
    for name, sort in spec.variables:
        if sort == INT:
            env[name] = int(rng.integers(INT_LOW, INT_HIGH + 1))
        elif sort == BOOL:
            env[name] = bool(rng.integers(0, 2))
        elif sort == INTLIST:
            length = int(rng.integers(0, LIST_LEN_MAX + 1))
            env[name] = tuple(
                int(v) for v in rng.integers(INT_LOW, INT_HIGH + 1, size=length))
        else:
            raise ConfigError(f"cannot sample a value of sort {sort}")
    return env


def sound(lhs: Term, rhs: Term, spec: SubstrateSpec,
          rng: np.random.Generator) -> bool:
    """Semantic equivalence check.

    Boolean domain: exhaustive over the 8 assignments.  Other domains: 12
    random environments, exact value equality on all of them.
    """
    if spec.exhaustive_bool:
        return all(evaluate(lhs, w) == evaluate(rhs, w) for w in BOOL_WORLDS)
    for _ in range(SOUND_SAMPLES):
        env = sample_env(spec, rng)
        if evaluate(lhs, env) != evaluate(rhs, env):
            return False
    return True


def recheck_rule(rule: "Rule", spec: SubstrateSpec,
                 rng: np.random.Generator) -> bool:
    """Soundness audit of a committed rule.

    Pattern variables are instantiated with fresh random values of their
    sorts; the boolean domain enumerates all assignments exhaustively.
    """
    names = sorted({(t.label, t.sort) for t in _leaves(rule.lhs)
                    if t.kind == "var"})
    if spec.exhaustive_bool:
        for values in itertools.product((False, True), repeat=len(names)):
            env = {name: v for (name, _), v in zip(names, values)}
            if evaluate(rule.lhs, env) != evaluate(rule.rhs, env):
                return False
        return True
    for _ in range(SOUND_SAMPLES):
        env = {}
        for name, sort in names:
            if sort == INT:
                env[name] = int(rng.integers(INT_LOW, INT_HIGH + 1))
            elif sort == BOOL:
                env[name] = bool(rng.integers(0, 2))
            else:
                length = int(rng.integers(0, LIST_LEN_MAX + 1))
                env[name] = tuple(
                    int(v) for v in rng.integers(INT_LOW, INT_HIGH + 1,
                                                 size=length))
        if evaluate(rule.lhs, env) != evaluate(rule.rhs, env):
            return False
    return True


def _leaves(term: Term):
    stack = [term]
    while stack:
        t = stack.pop()
        if not t.args:
            yield t
        stack.extend(t.args)


# ---------------------------------------------------------------------------
# Candidate generators
# ---------------------------------------------------------------------------

class GeneratorState:
    """Pool of harvested subterms plus draw weights.

    The pool is a multiset: ``occurrences`` lists one entry index per
    harvested occurrence (uniform draws).  Each distinct entry's frequency
    weight is the number of commits since it entered the pool, tracked as a
    birth index so a commit costs O(harvest), not O(pool).
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.terms: list[Term] = []
        self.index: dict[str, int] = {}
        self.occurrences: list[int] = []
        self.birth: list[int] = []
        self.commit_count = 0
        self._freq_cum: np.ndarray | None = None
        self._mdl_best: int | None = None

    @property
    def pool_size(self) -> int:
        return len(self.occurrences)

    def freq_of(self, i: int) -> int:
        return self.commit_count - self.birth[i]

    def harvest(self, terms: list[Term]):
        for t in terms:
            if t.size > MAX_CANDIDATE_SIZE:
                continue
            i = self.index.get(t.text)
            if i is None:
                i = len(self.terms)
                self.index[t.text] = i
                self.terms.append(t)
                self.birth.append(self.commit_count)
            self.occurrences.append(i)
        self.commit_count += 1
        self._freq_cum = None
        self._mdl_best = None

    def draw_uniform(self) -> Term:
        return self.terms[self.occurrences[int(self.rng.integers(self.pool_size))]]

    def draw_freq(self) -> Term:
        if self._freq_cum is None:
            freq = self.commit_count - np.asarray(self.birth, dtype=np.float64)
            self._freq_cum = np.cumsum(freq)
        total = float(self._freq_cum[-1])
        r = self.rng.random() * total
        return self.terms[int(np.searchsorted(self._freq_cum, r, side="right"))]

    def mdl_pick(self) -> Term:
        """Largest pool entry; ties by highest frequency, then canonical order."""
        if self._mdl_best is None:
            self._mdl_best = min(
                range(len(self.terms)),
                key=lambda i: (-self.terms[i].size, self.birth[i], self.terms[i].text))
        return self.terms[self._mdl_best]


def _random_leaf(spec: SubstrateSpec, sort: str, rng: np.random.Generator) -> Term:
    leaves = spec.leaves_by_sort[sort]
    return leaves[int(rng.integers(len(leaves)))]


def _grow(spec: SubstrateSpec, sort: str, depth_left: int,
          rng: np.random.Generator) -> Term:
    ops = spec.ops_by_result.get(sort)
    if depth_left <= 1 or not ops or rng.random() < LEAF_PROB:
        return _random_leaf(spec, sort, rng)
    op = ops[int(rng.integers(len(ops)))]
    args = tuple(_grow(spec, s, depth_left - 1, rng) for s in op.arg_sorts)
    return Term("app", op.name, None, args, op.result)


def _join(spec: SubstrateSpec, sort: str, t1: Term, t2: Term,
          rng: np.random.Generator) -> Term | None:
    """Root one operator of the target sort over two pool subterms.

    Subterms fill the first argument slots whose sorts they fit; remaining
    slots get random leaves.  Returns None when the join would exceed the
    candidate size bound.
    """
    ops = spec.ops_by_result.get(sort)
    if not ops:
        return None
    op = ops[int(rng.integers(len(ops)))]
    pending: list[Term | None] = [t1, t2]
    args: list[Term] = []
    for s in op.arg_sorts:
        chosen = None
        for i, t in enumerate(pending):
            if t is not None and t.sort == s:
                chosen = t
                pending[i] = None
                break
        args.append(chosen if chosen is not None else _random_leaf(spec, s, rng))
    if 1 + sum(a.size for a in args) > MAX_CANDIDATE_SIZE:
        return None
    return Term("app", op.name, None, tuple(args), op.result)


def generate_candidate(state: GeneratorState, kind: str, spec: SubstrateSpec,
                       depth: int, sort: str) -> Term:
    """One candidate term of the requested sort.

    random grows a fresh term under the depth cap.  The pool generators
    join two harvested subterms under a fresh operator (joins may exceed
    the nominal depth; that recombination is what lets rules compound) and
    fall back to random while the pool is empty or a join is oversized.
    """
    rng = state.rng
    if kind == "random" or state.pool_size == 0:
        return _grow(spec, sort, depth, rng)
    if kind == "compositional":
        t1, t2 = state.draw_uniform(), state.draw_uniform()
    elif kind == "freq":
        t1, t2 = state.draw_freq(), state.draw_freq()
    elif kind == "mdl_greedy":
        t1, t2 = state.mdl_pick(), state.draw_uniform()
    else:
        raise ConfigError(f"unknown generator {kind!r}")
    joined = _join(spec, sort, t1, t2, rng)
    if joined is None:
        return _grow(spec, sort, depth, rng)
    return joined


# ---------------------------------------------------------------------------
# The discovery loop
# ---------------------------------------------------------------------------

def _config_rng(config: ArchConfig) -> np.random.Generator:
    entropy = [
        int(config.seed),
        list(SUBSTRATES).index(config.domain),
        GENERATORS.index(config.generator),
        FILTERS.index(config.filter),
        int(config.depth),
        int(config.batch_size),
    ]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def run_discovery(config: ArchConfig, record_wall_clock: bool = False) -> DiscoveryResult:
    """Run the full discovery loop for one configuration."""
    spec = SUBSTRATES[config.domain]
    rng = _config_rng(config)
    state = GeneratorState(rng)
    ruleset = RuleSet()
    seen: set[tuple[str, str]] = set()
    sizes: list[int] = []
    clocks: list[float] = [] if record_wall_clock else None

    for _ in range(config.epochs):
        t0 = time.perf_counter() if record_wall_clock else 0.0
        if spec.exhaustive_bool:
            envs = BOOL_WORLDS
        else:
            envs = [sample_env(spec, rng) for _ in range(SOUND_SAMPLES)]

        groups: dict[tuple, list[Term]] = {}
        for _ in range(config.batch_size):
            if len(spec.principal_sorts) > 1:
                sort = spec.principal_sorts[0 if rng.random() < 0.5 else 1]
            else:
                sort = spec.principal_sorts[0]
            cand = generate_candidate(state, config.generator, spec,
                                      config.depth, sort)
            nf = normalize(cand, ruleset)
            fingerprint = (nf.sort,) + tuple(evaluate(nf, e) for e in envs)
            groups.setdefault(fingerprint, []).append(cand)

        for members in groups.values():
            if len(members) < 2:
                continue
            lhs_c = min(members, key=lambda t: (-t.size, t.text))
            rhs_c = min(members, key=lambda t: (t.size, t.text))
            if lhs_c.size <= rhs_c.size:
                continue
            if not sound(lhs_c, rhs_c, spec, rng):
                continue
            lhs, rhs = generalize(lhs_c, rhs_c)
            if pattern_variables(rhs) - pattern_variables(lhs):
                continue
            key = (lhs.text, rhs.text)
            if key in seen:
                continue
            if not filter_passes(config.filter, lhs, rhs, ruleset):
                continue
            ruleset.add(Rule(lhs, rhs, 0, len(ruleset.rules)))
            seen.add(key)
            state.harvest(subterms(lhs_c) + subterms(rhs_c))
        sizes.append(len(ruleset.rules))
        if record_wall_clock:
            clocks.append(time.perf_counter() - t0)

    trajectory = Trajectory(config=config, sizes=sizes,
                            wall_clock_per_epoch=clocks)
    return DiscoveryResult(trajectory=trajectory, rules=ruleset.rules)


def discover(config: ArchConfig) -> Trajectory:
    return run_discovery(config).trajectory


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def trajectory_record(trajectory: Trajectory) -> dict:
    c = trajectory.config
    return {
        "domain": c.domain,
        "generator": c.generator,
        "filter": c.filter,
        "depth": c.depth,
        "batch_size": c.batch_size,
        "seed": c.seed,
        "epochs": c.epochs,
        "sizes": list(trajectory.sizes),
        "engine_version": ENGINE_VERSION,
        "prng_id": PRNG_ID,
    }


def record_to_json(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


def read_trajectory_file(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def dump_rules(path, rules: list[Rule]):
    with open(path, "w", encoding="utf-8") as fh:
        for rule in rules:
            fh.write(rule.format() + "\n")


def load_rules(spec: SubstrateSpec, path) -> list[Rule]:
    rules = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            lhs_text, _, rhs_text = line.partition("=>")
            lhs = parse_term(spec, lhs_text.strip())
            var_sorts = {}
            _collect_pattern_sorts(lhs, var_sorts)
            rhs = parse_term(spec, rhs_text.strip(), var_sorts=var_sorts)
            rules.append(Rule(lhs, rhs, 0, i))
    return rules


def _collect_pattern_sorts(term: Term, out: dict):
    if term.kind == "var" and term.label[0].isupper():
        out[term.label] = term.sort
    for a in term.args:
        _collect_pattern_sorts(a, out)
