"""Monte-Carlo balance estimation and dataset-level imbalance statistics.

A level's balance for an archetype pairing is the player-1 win frequency over
n simulated matches, with draws counting half: b = (wins1 + draws/2) / n.
b is kept as an exact Fraction so that 0.5 comparisons, swap rewards and
telescoping sums never suffer float rounding. Draws always count as balanced —
including draws where nobody can win — which is the documented blind spot of
this score; the per-cause draw histogram is carried alongside so callers can
see when a score of 0.5 is made of nothing but stalemates.

Per-simulation seeds are derived from (base_seed, sim_index) with a fixed
64-bit mix, so seed families are prefix-stable and reproducible across
processes (Python's salted hash() is deliberately avoided).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from multiprocessing import Pool
from typing import Mapping, Sequence

from .levels import Level, LevelDataset
from .sim import ArchetypeSpec, MatchCause, MatchConfig, Winner, run_match

_MASK64 = (1 << 64) - 1
HALF = Fraction(1, 2)


def mix_seed(base: int, index: int) -> int:
    """Stable 64-bit hash of (base, index); splitmix64 finalizer."""
    z = (base * 0x9E3779B97F4A7C15 + index + 1) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def match_seed(base_seed: int, sim_index: int) -> int:
    """Seed for the sim_index-th match of an evaluation (prefix-stable)."""
    return mix_seed(base_seed, sim_index)


@dataclass(frozen=True)
class EvalConfig:
    """How to estimate balance: simulation count, seed family, tolerance."""

    n_sims: int = 10
    base_seed: int = 0
    epsilon: float = 0.0
    match_config: MatchConfig = field(default_factory=MatchConfig)

    def __post_init__(self):
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        if not (0.0 <= self.epsilon <= 0.5):
            raise ValueError("epsilon must be in [0, 0.5]")


@dataclass(frozen=True)
class BalanceEstimate:
    """Win/draw tallies over n_sims matches and the derived balance score."""

    n_sims: int
    wins1: int
    wins2: int
    draws: int
    draw_causes: Mapping[MatchCause, int] = field(default_factory=dict)

    def __post_init__(self):
        if min(self.wins1, self.wins2, self.draws) < 0:
            raise ValueError("counts must be non-negative")
        if self.wins1 + self.wins2 + self.draws != self.n_sims:
            raise ValueError(
                f"counts {self.wins1}+{self.wins2}+{self.draws} != n_sims {self.n_sims}"
            )
        if sum(self.draw_causes.values()) != self.draws:
            raise ValueError("draw_causes must account for every draw")

    @property
    def b(self) -> Fraction:
        """Exact balance score (wins1 + draws/2) / n_sims in [0, 1]."""
        return Fraction(2 * self.wins1 + self.draws, 2 * self.n_sims)

    @property
    def draw_fraction(self) -> Fraction:
        return Fraction(self.draws, self.n_sims)


class BalanceClass(Enum):
    BALANCED = "balanced"
    FAVORS_P1 = "favors_p1"
    FAVORS_P2 = "favors_p2"


def is_balanced(b: Fraction, epsilon: float = 0.0) -> bool:
    """|b - 1/2| <= epsilon, evaluated exactly."""
    return abs(b - HALF) <= epsilon


def classify(est: BalanceEstimate | Fraction | float, epsilon: float = 0.0) -> BalanceClass:
    """Bucket a balance score: balanced within epsilon, else favored side."""
    b = est.b if isinstance(est, BalanceEstimate) else Fraction(est)
    if abs(b - HALF) <= epsilon:
        return BalanceClass.BALANCED
    return BalanceClass.FAVORS_P1 if b > HALF else BalanceClass.FAVORS_P2


def estimate_balance(
    level: Level, arch1: ArchetypeSpec, arch2: ArchetypeSpec, cfg: EvalConfig
) -> BalanceEstimate:
    """Run cfg.n_sims matches with seeds derived from cfg.base_seed and tally.

    Deterministic given (level, archetypes, cfg); sim i always runs with
    match_seed(cfg.base_seed, i) regardless of n_sims, so growing n_sims only
    appends simulations.
    """
    wins1 = wins2 = 0
    draw_causes: Counter[MatchCause] = Counter()
    base = cfg.base_seed
    mc = cfg.match_config
    for i in range(cfg.n_sims):
        outcome = run_match(level, arch1, arch2, replace(mc, seed=match_seed(base, i)))
        if outcome.winner == Winner.PLAYER1:
            wins1 += 1
        elif outcome.winner == Winner.PLAYER2:
            wins2 += 1
        else:
            draw_causes[outcome.cause] += 1
    draws = sum(draw_causes.values())
    return BalanceEstimate(cfg.n_sims, wins1, wins2, draws, dict(draw_causes))


@dataclass(frozen=True)
class LevelImbalance:
    level_id: str
    estimate: BalanceEstimate
    label: BalanceClass


@dataclass(frozen=True)
class ImbalanceSummary:
    """Dataset-level imbalance: per-class fractions plus per-level estimates.

    share_favor1 is the proportion of *biased* levels that favor player 1 —
    the "how often does one fixed player start ahead" measure (0.5 means the
    pairing is symmetric; near 1.0 means player 1 nearly always starts ahead).
    """

    per_level: tuple[LevelImbalance, ...]
    frac_favor1: float
    frac_favor2: float
    frac_balanced: float

    @property
    def n_levels(self) -> int:
        return len(self.per_level)

    @property
    def share_favor1(self) -> float:
        biased = self.frac_favor1 + self.frac_favor2
        if biased == 0:
            return 0.5
        return self.frac_favor1 / biased

    @property
    def imbalance(self) -> float:
        """Share of biased levels favoring the more-favored side (>= 0.5)."""
        return max(self.share_favor1, 1.0 - self.share_favor1)


def _estimate_one(args) -> BalanceEstimate:
    level, arch1, arch2, cfg = args
    return estimate_balance(level, arch1, arch2, cfg)


def dataset_imbalance(
    dataset: LevelDataset,
    arch1: ArchetypeSpec,
    arch2: ArchetypeSpec,
    cfg: EvalConfig,
    processes: int | None = None,
) -> ImbalanceSummary:
    """Estimate every level in the dataset and summarise who starts ahead.

    Results are reduced in dataset order, so the summary is identical whether
    levels are evaluated sequentially or fanned over worker processes.
    """
    if len(dataset) == 0:
        raise ValueError("dataset_imbalance needs a non-empty dataset")
    jobs = [(rec.level, arch1, arch2, cfg) for rec in dataset]
    if processes and processes > 1:
        with Pool(processes) as pool:
            estimates = pool.map(_estimate_one, jobs, chunksize=16)
    else:
        estimates = [_estimate_one(job) for job in jobs]
    per_level = tuple(
        LevelImbalance(rec.id, est, classify(est, cfg.epsilon))
        for rec, est in zip(dataset, estimates)
    )
    n = len(per_level)
    counts = Counter(item.label for item in per_level)
    return ImbalanceSummary(
        per_level=per_level,
        frac_favor1=counts[BalanceClass.FAVORS_P1] / n,
        frac_favor2=counts[BalanceClass.FAVORS_P2] / n,
        frac_balanced=counts[BalanceClass.BALANCED] / n,
    )
