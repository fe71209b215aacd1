"""Non-RL balancing baselines: random swap search and hill climbing.

Both share the MDP's swap mechanics and reward definition. The random searcher
applies every proposed swap and never looks back; the hill climber keeps a
candidate swap only when it strictly reduces |b - 1/2| and reverts otherwise
("not positive" rejects zero-reward swaps too).

With common random numbers (default) every evaluation in one search reuses the
same seed family, so the score of an unchanged level is stable and the
hill climber's accept/revert decisions reflect the level edit, not simulation
noise. Switching CRN off gives every evaluation a fresh derived family, for
studying noise sensitivity.

Spawn markers are frozen by default: proposed swaps draw from non-spawn
cells, so balance comes from moving terrain and resources around fixed
players rather than teleporting a player. freeze_spawns=False restores
fully unconstrained swaps.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from fractions import Fraction
from multiprocessing import Pool
from typing import Callable

from .balance import EvalConfig, estimate_balance, is_balanced, mix_seed
from .env import SwapAction, apply_swap
from .levels import Level, LevelDataset, Position
from .sim import ArchetypeSpec


@dataclass(frozen=True)
class SearchBudget:
    max_evals: int = 100
    stop_on_balanced: bool = True

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")


@dataclass(frozen=True)
class SwapTrial:
    action: SwapAction
    accepted: bool
    b_after: Fraction


@dataclass(frozen=True)
class BalancerResult:
    final_level: Level
    initial_b: Fraction
    final_b: Fraction
    evals_used: int
    swap_trace: tuple[SwapTrial, ...]

    @property
    def accepted_swaps(self) -> tuple[SwapAction, ...]:
        return tuple(t.action for t in self.swap_trace if t.accepted)


class _Evaluator:
    """Seed-family bookkeeping for one search run."""

    def __init__(self, arch1, arch2, cfg: EvalConfig, use_crn: bool):
        self.arch1, self.arch2 = arch1, arch2
        self.cfg = cfg
        self.use_crn = use_crn
        self.evals = 0

    def __call__(self, level: Level) -> Fraction:
        cfg = self.cfg
        if not self.use_crn:
            cfg = replace(cfg, base_seed=mix_seed(cfg.base_seed, self.evals))
        self.evals += 1
        return estimate_balance(level, self.arch1, self.arch2, cfg).b


def _random_swap(level: Level, rng: random.Random, freeze_spawns: bool) -> SwapAction:
    n = level.width * level.height
    w = level.width
    while True:
        ia = rng.randrange(n)
        ib = rng.randrange(n - 1)
        if ib >= ia:
            ib += 1
        a = Position(ia % w, ia // w)
        b = Position(ib % w, ib // w)
        if freeze_spawns and (
            a == level.spawn1 or a == level.spawn2 or b == level.spawn1 or b == level.spawn2
        ):
            continue
        return SwapAction(a, b)


def random_balancer(
    level: Level,
    arch1: ArchetypeSpec,
    arch2: ArchetypeSpec,
    cfg: EvalConfig,
    budget: SearchBudget,
    rng: random.Random,
    use_crn: bool = True,
    freeze_spawns: bool = True,
) -> BalancerResult:
    """Pure random search: apply uniformly random swaps, never revert.

    By default swaps are drawn over non-spawn cells (see module notes on
    spawn freezing); pass freeze_spawns=False to let swaps move the markers.
    """
    evaluate = _Evaluator(arch1, arch2, cfg, use_crn)
    b = initial_b = evaluate(level)
    trace: list[SwapTrial] = []
    while evaluate.evals < budget.max_evals:
        if budget.stop_on_balanced and is_balanced(b, cfg.epsilon):
            break
        action = _random_swap(level, rng, freeze_spawns)
        level = apply_swap(level, action)
        b = evaluate(level)
        trace.append(SwapTrial(action, True, b))
    return BalancerResult(level, initial_b, b, evaluate.evals, tuple(trace))


def hill_climb(
    level: Level,
    arch1: ArchetypeSpec,
    arch2: ArchetypeSpec,
    cfg: EvalConfig,
    budget: SearchBudget,
    rng: random.Random,
    use_crn: bool = True,
    freeze_spawns: bool = True,
) -> BalancerResult:
    """Random-neighbour hill climbing on -|b - 1/2|.

    A candidate swap is kept only when its reward |b_prev - 1/2| - |b_cand - 1/2|
    is strictly positive; otherwise the swap is undone, so the accepted-state
    distance to even never increases.
    """
    half = Fraction(1, 2)
    evaluate = _Evaluator(arch1, arch2, cfg, use_crn)
    b_cur = initial_b = evaluate(level)
    trace: list[SwapTrial] = []
    while evaluate.evals < budget.max_evals:
        if budget.stop_on_balanced and is_balanced(b_cur, cfg.epsilon):
            break
        action = _random_swap(level, rng, freeze_spawns)
        candidate = apply_swap(level, action)
        b_cand = evaluate(candidate)
        accepted = abs(b_cur - half) - abs(b_cand - half) > 0
        if accepted:
            level, b_cur = candidate, b_cand
        trace.append(SwapTrial(action, accepted, b_cand))
    return BalancerResult(level, initial_b, b_cur, evaluate.evals, tuple(trace))


BALANCERS: dict[str, Callable[..., BalancerResult]] = {
    "random": random_balancer,
    "hillclimb": hill_climb,
}


@dataclass(frozen=True)
class DatasetBalanceRow:
    level_id: str
    method: str
    initial_b: Fraction
    final_b: Fraction
    balanced: bool
    evals_used: int
    initially_balanced: bool
    final_level: Level


@dataclass(frozen=True)
class DatasetBalanceReport:
    method: str
    rows: tuple[DatasetBalanceRow, ...]

    @property
    def eligible(self) -> tuple[DatasetBalanceRow, ...]:
        """Rows that count toward the balanced fraction (not balanced at start)."""
        return tuple(r for r in self.rows if not r.initially_balanced)

    @property
    def balanced_fraction(self) -> float:
        eligible = self.eligible
        if not eligible:
            return 0.0
        return sum(1 for r in eligible if r.balanced) / len(eligible)


def _balance_one(args) -> DatasetBalanceRow:
    rec_id, level, method, arch1, arch2, cfg, budget, rng_seed, use_crn, freeze = args
    result = BALANCERS[method](
        level, arch1, arch2, cfg, budget, random.Random(rng_seed), use_crn, freeze
    )
    return DatasetBalanceRow(
        level_id=rec_id,
        method=method,
        initial_b=result.initial_b,
        final_b=result.final_b,
        balanced=is_balanced(result.final_b, cfg.epsilon),
        evals_used=result.evals_used,
        initially_balanced=is_balanced(result.initial_b, cfg.epsilon),
        final_level=result.final_level,
    )


def balance_dataset(
    dataset: LevelDataset,
    method: str,
    arch1: ArchetypeSpec,
    arch2: ArchetypeSpec,
    cfg: EvalConfig,
    budget: SearchBudget,
    seed: int = 0,
    use_crn: bool = True,
    freeze_spawns: bool = True,
    processes: int | None = None,
) -> DatasetBalanceReport:
    """Run one baseline over every level; per-level rng seeds derive from seed.

    Initially balanced levels still get their single evaluation but are
    excluded from the balanced-fraction denominator.
    """
    if method not in BALANCERS:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(BALANCERS)}")
    if len(dataset) == 0:
        raise ValueError("balance_dataset needs a non-empty dataset")
    jobs = [
        (rec.id, rec.level, method, arch1, arch2, cfg, budget, mix_seed(seed, i), use_crn,
         freeze_spawns)
        for i, rec in enumerate(dataset)
    ]
    if processes and processes > 1:
        with Pool(processes) as pool:
            rows = pool.map(_balance_one, jobs, chunksize=4)
    else:
        rows = [_balance_one(job) for job in jobs]
    return DatasetBalanceReport(method, tuple(rows))
