"""Conditional max-coverage selection of overlapping construction matches.

The objective rewards covered tokens, penalises tokens covered more than
once and rewards concrete (lexical) slots::

    total = w1 * covered - w2 * redundant + w3 * concreteness

:func:`solve_sa` searches the subset space with simulated annealing;
:func:`solve_exact` enumerates it and serves as the oracle on small inputs.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .grammar import Level
from .matcher import Match

EXACT_LIMIT = 25
_CHUNK_BITS = 16


@dataclass(frozen=True)
class SelectorConfig:
    w1: float = 1.0
    w2: float = 0.4
    w3: float = 0.3
    s_syn: float = 1.0
    s_sem: float = 1.2
    s_lex: float = 1.5
    t0: float = 1.0
    tf: float = 0.3
    k_max: int = 2000
    flip_ratio: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("w1", "w2", "w3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if not 0 < self.tf < self.t0:
            raise ValueError("tf must lie in (0, t0)")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if not 0 < self.flip_ratio <= 1:
            raise ValueError("flip_ratio must lie in (0, 1]")

    def slot_score(self, level: Level) -> float:
        if level is Level.LEXICAL:
            return self.s_lex
        if level is Level.SEMANTIC:
            return self.s_sem
        return self.s_syn

    def coverage_only(self) -> "SelectorConfig":
        return replace(self, w2=0.0, w3=0.0)

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "SelectorConfig":
        aliases = {"kmax": "k_max", "flip": "flip_ratio"}
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for raw_key, raw_val in values.items():
            key = raw_key.strip().replace("-", "_")
            key = aliases.get(key, key)
            if key not in types:
                raise KeyError(f"unknown selector option {raw_key!r}")
            kwargs[key] = int(raw_val) if key in ("k_max", "seed") else float(raw_val)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "SelectorConfig":
        """Flat ``key = value`` file; ``#`` starts a comment."""
        values = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
        return cls.from_mapping(values)


@dataclass(frozen=True)
class Selection:
    universe: tuple[Match, ...]
    bits: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))
        if len(self.bits) != len(self.universe):
            raise ValueError("bit vector length must equal the universe size")

    @classmethod
    def empty(cls, universe: Sequence[Match]) -> "Selection":
        return cls(tuple(universe), (False,) * len(universe))

    @classmethod
    def of(cls, universe: Sequence[Match], indices) -> "Selection":
        chosen = set(indices)
        return cls(tuple(universe), tuple(i in chosen for i in range(len(universe))))

    @property
    def chosen(self) -> list[Match]:
        return [m for m, b in zip(self.universe, self.bits) if b]

    @property
    def indices(self) -> list[int]:
        return [i for i, b in enumerate(self.bits) if b]

    def flipped(self, indices) -> "Selection":
        bits = list(self.bits)
        for i in indices:
            bits[i] = not bits[i]
        return Selection(self.universe, tuple(bits))


@dataclass(frozen=True)
class ScoreBreakdown:
    s_ob1: int
    s_ob2: int
    s_ob3: Fraction
    total: Fraction


def as_rational(x: float) -> Fraction:
    """The decimal value a float was written as (0.4 -> 2/5)."""
    return Fraction(repr(float(x)))


def concreteness(match: Match, config: SelectorConfig) -> Fraction:
    """Mean slot score of one match (exact)."""
    if not match.slots:
        raise ValueError("concreteness needs the match's slots")
    return sum((as_rational(config.slot_score(s.level)) for s in match.slots), Fraction(0)) / len(match.slots)


def score(selection: Selection, config: SelectorConfig) -> ScoreBreakdown:
    chosen = selection.chosen
    union = set()
    mass = 0
    for m in chosen:
        union.update(range(m.start, m.end))
        mass += m.length
    s1 = len(union)
    s2 = mass - s1
    s3 = sum((concreteness(m, config) for m in chosen), Fraction(0))
    total = as_rational(config.w1) * s1 - as_rational(config.w2) * s2 + as_rational(config.w3) * s3
    return ScoreBreakdown(s1, s2, s3, total)


def cool(t0: float, tf: float, k: int, k_max: int) -> float:
    """Exponential schedule with cool(0) = t0 and cool(k_max) = tf."""
    return t0 * math.exp(-k * math.log(t0 / tf) / k_max)


def acceptance_probability(d_e: float, temperature: float) -> float:
    if d_e > 0:
        return 1.0
    return math.exp(d_e / temperature)


def flip_count(n: int, temperature: float, config: SelectorConfig) -> int:
    t = int(config.flip_ratio * n * temperature / config.t0 + 0.5)
    return min(n, max(1, t))


def _flip_indices(n: int, temperature: float, config: SelectorConfig, rng: random.Random) -> list[int]:
    return rng.sample(range(n), flip_count(n, temperature, config))


def rand_flip(selection: Selection, temperature: float, config: SelectorConfig,
              rng: random.Random) -> Selection:
    """Reverse a temperature-dependent number of distinct, uniformly drawn bits."""
    n = len(selection.bits)
    if n == 0:
        return selection
    return selection.flipped(_flip_indices(n, temperature, config, rng))


class _Objective:
    """Incremental float evaluation of the selection score."""

    def __init__(self, universe: Sequence[Match], config: SelectorConfig):
        self.config = config
        self.spans = [(m.start, m.end) for m in universe]
        self.conc = [float(concreteness(m, config)) for m in universe]
        width = max((e for _, e in self.spans), default=0)
        self.counts = [0] * width
        self.bits = [False] * len(universe)
        self.union = 0
        self.mass = 0
        self.conc_sum = 0.0

    def value(self) -> float:
        c = self.config
        return c.w1 * self.union - c.w2 * (self.mass - self.union) + c.w3 * self.conc_sum

    def flip(self, i: int) -> None:
        start, end = self.spans[i]
        counts = self.counts
        if self.bits[i]:
            for t in range(start, end):
                counts[t] -= 1
                if counts[t] == 0:
                    self.union -= 1
            self.mass -= end - start
            self.conc_sum -= self.conc[i]
        else:
            for t in range(start, end):
                if counts[t] == 0:
                    self.union += 1
                counts[t] += 1
            self.mass += end - start
            self.conc_sum += self.conc[i]
        self.bits[i] = not self.bits[i]

    def gain(self, i: int) -> float:
        """Score change from adding match i (must be unselected)."""
        start, end = self.spans[i]
        fresh = sum(1 for t in range(start, end) if self.counts[t] == 0)
        c = self.config
        return c.w1 * fresh - c.w2 * (end - start - fresh) + c.w3 * self.conc[i]


def initial_feasible(universe: Sequence[Match], config: SelectorConfig) -> Selection:
    """Greedy start: keep adding the best marginal match while it helps."""
    obj = _Objective(universe, config)
    n = len(universe)
    while True:
        best_i, best_gain = None, 0.0
        for i in range(n):
            if obj.bits[i]:
                continue
            g = obj.gain(i)
            if g > best_gain:
                best_i, best_gain = i, g
        if best_i is None:
            break
        obj.flip(best_i)
    return Selection(tuple(universe), tuple(obj.bits))


def solve_sa(universe: Sequence[Match], config: SelectorConfig, trace: list | None = None) -> Selection:
    """Simulated annealing over selection bit vectors.

    Starts from :func:`initial_feasible`, perturbs with :func:`rand_flip`
    under the :func:`cool` schedule and accepts by the Metropolis rule.
    The best state visited is returned, so the result never scores below
    the greedy start.  If ``trace`` is a list, one
    ``(k, temperature, dE, accepted)`` tuple per step is appended to it.
    """
    universe = tuple(universe)
    n = len(universe)
    if n == 0:
        raise ValueError("cannot anneal over an empty universe")
    rng = random.Random(config.seed)
    start = initial_feasible(universe, config)
    obj = _Objective(universe, config)
    for i in start.indices:
        obj.flip(i)
    energy = obj.value()
    best_bits, best_energy = list(obj.bits), energy
    for k in range(config.k_max):
        temperature = cool(config.t0, config.tf, k, config.k_max)
        flips = _flip_indices(n, temperature, config, rng)
        for i in flips:
            obj.flip(i)
        candidate = obj.value()
        d_e = candidate - energy
        accepted = d_e > 0 or rng.random() <= acceptance_probability(d_e, temperature)
        if accepted:
            energy = candidate
            if energy > best_energy:
                best_bits, best_energy = list(obj.bits), energy
        else:
            for i in flips:
                obj.flip(i)
        if trace is not None:
            trace.append((k, temperature, d_e, accepted))
    return Selection(universe, tuple(best_bits))


def _integer_weights(universe: Sequence[Match], config: SelectorConfig):
    """Scale the objective to integers: total * denom = a1*union - a2*redundant + sum(c_i)."""
    w1, w2, w3 = (as_rational(w) for w in (config.w1, config.w2, config.w3))
    conc = [w3 * concreteness(m, config) for m in universe]
    denom = math.lcm(w1.denominator, w2.denominator, *(c.denominator for c in conc))
    a1 = int(w1 * denom)
    a2 = int(w2 * denom)
    cs = [int(c * denom) for c in conc]
    return a1, a2, cs


def solve_exact(universe: Sequence[Match], config: SelectorConfig) -> Selection:
    """Enumerate all 2^n subsets and return the best one.

    Scores are compared exactly.  Ties go to fewer matches, then to the
    lexicographically smallest bit vector.  Limited to ``EXACT_LIMIT``
    matches.
    """
    universe = tuple(universe)
    n = len(universe)
    if n > EXACT_LIMIT:
        raise ValueError(f"exact enumeration is limited to {EXACT_LIMIT} matches, got {n}")
    if n == 0:
        return Selection.empty(universe)
    width = max(m.end for m in universe)
    cover = np.zeros((n, width), dtype=np.int64)
    for i, m in enumerate(universe):
        cover[i, m.start:m.end] = 1
    lengths = cover.sum(axis=1)
    a1, a2, cs = _integer_weights(universe, config)
    bound = (a1 + a2) * int(lengths.sum()) + sum(abs(c) for c in cs)
    dtype = np.int64 if bound < 2**62 else object
    conc = np.array(cs, dtype=dtype)
    shifts = np.arange(n, dtype=np.int64)
    # bit 0 is the first match, so lexicographic order on bit tuples is
    # numeric order on the bit-reversed code
    reverse_shifts = (n - 1 - shifts)

    best = None
    total_subsets = 1 << n
    step = 1 << min(n, _CHUNK_BITS)
    for lo in range(0, total_subsets, step):
        codes = np.arange(lo, min(lo + step, total_subsets), dtype=np.int64)
        bits = (codes[:, None] >> shifts) & 1
        counts = bits @ cover
        union = (counts > 0).sum(axis=1)
        mass = bits @ lengths
        vals = a1 * union.astype(dtype) - a2 * (mass - union).astype(dtype) + bits.astype(dtype) @ conc
        top = vals.max()
        idx = np.flatnonzero(vals == top)
        pop = bits[idx].sum(axis=1)
        idx = idx[pop == pop.min()]
        rev = (bits[idx] << reverse_shifts).sum(axis=1)
        j = idx[int(np.argmin(rev))]
        key = (top, -int(bits[j].sum()), -int(rev.min()))
        if best is None or key > best[0]:
            best = (key, int(codes[j]))
    code = best[1]
    return Selection(universe, tuple(bool((code >> i) & 1) for i in range(n)))


def _prune_redundant(selection: Selection) -> Selection:
    """Drop matches whose removal leaves the covered token set unchanged."""
    bits = list(selection.bits)
    universe = selection.universe

    def covered(bs):
        out = set()
        for m, b in zip(universe, bs):
            if b:
                out.update(range(m.start, m.end))
        return out

    full = covered(bits)
    for i, b in enumerate(bits):
        if b:
            bits[i] = False
            if covered(bits) != full:
                bits[i] = True
    return Selection(universe, tuple(bits))


def max_coverage(universe: Sequence[Match], config: SelectorConfig, exact_limit: int = 20) -> Selection:
    """Unconditional max coverage (overlap and concreteness weights zeroed)."""
    cfg = config.coverage_only()
    if len(universe) <= exact_limit:
        return solve_exact(universe, cfg)
    return _prune_redundant(solve_sa(universe, cfg))
