"""Swap-action MDP over levels: observations, rewards, episode lifecycle.

An episode starts from an existing level. Each step swaps the contents of two
cells (spawn markers travel with their cells), re-estimates balance, and pays
the improvement in distance-to-even as reward:

    reward = |b_prev - 1/2| - |b_new - 1/2|

so episode return telescopes to total improvement. Rewards and balance scores
are exact Fractions (see balance module).

Two action-space layouts exist: the plain four-component [h, w, h, w] form
(two predicted cells) and the legacy five-component [h, w, h, w, 2] form whose
trailing flag decides whether the swap is applied at all. For a 6x6 level the
plain form has 1296 actions, half of the legacy 2592.

Seeding: with the default per-episode policy, one seed family fixed at reset
is reused for every estimate in the episode (common random numbers), so
re-evaluating an unchanged level is noise-free and a no-op swap pays exactly
zero. The per-step policy derives a fresh family each step instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Sequence

from .balance import HALF, BalanceEstimate, EvalConfig, estimate_balance, is_balanced, mix_seed
from .levels import Level, Position, TileKind
from .sim import ArchetypeSpec

SPAWN1_ID = 4
SPAWN2_ID = 5


class ActionSpaceVariant(Enum):
    SWAP_WIDE = "wide"
    SWAP_WIDE_LEGACY = "legacy"


def action_components(height: int, width: int, variant: ActionSpaceVariant) -> list[int]:
    """Sizes of the discrete action components, in wire order [y1,x1,y2,x2(,flag)]."""
    base = [height, width, height, width]
    if variant == ActionSpaceVariant.SWAP_WIDE_LEGACY:
        base.append(2)
    return base


def action_space_size(height: int, width: int, variant: ActionSpaceVariant) -> int:
    """Total number of flat actions: h*w*h*w, doubled by the legacy flag."""
    if height < 1 or width < 1:
        raise ValueError("grid dimensions must be >= 1")
    size = height * width * height * width
    if variant == ActionSpaceVariant.SWAP_WIDE_LEGACY:
        size *= 2
    return size


@dataclass(frozen=True)
class SwapAction:
    """Exchange the contents of two cells; the legacy flag can veto the swap."""

    pos_a: Position
    pos_b: Position
    apply_flag: bool | None = None

    def to_vector(self) -> list[int]:
        vec = [self.pos_a.y, self.pos_a.x, self.pos_b.y, self.pos_b.x]
        if self.apply_flag is not None:
            vec.append(int(self.apply_flag))
        return vec

    @classmethod
    def from_vector(cls, vector: Sequence[int], variant: ActionSpaceVariant) -> "SwapAction":
        expected = 5 if variant == ActionSpaceVariant.SWAP_WIDE_LEGACY else 4
        if len(vector) != expected:
            raise ValueError(
                f"{variant.value} action needs {expected} components, got {len(vector)}"
            )
        y1, x1, y2, x2 = (int(v) for v in vector[:4])
        flag = bool(int(vector[4])) if expected == 5 else None
        return cls(Position(x1, y1), Position(x2, y2), flag)


def apply_swap(level: Level, action: SwapAction) -> Level:
    """Return the level with the two cells exchanged.

    Spawn markers travel with their cells, so spawns always remain on grass
    and distinct. Identity cases: pos_a == pos_b, or a legacy apply_flag of
    False.
    """
    for pos in (action.pos_a, action.pos_b):
        if not (0 <= pos.x < level.width and 0 <= pos.y < level.height):
            raise ValueError(f"swap position {pos} out of bounds")
    if action.apply_flag is False or action.pos_a == action.pos_b:
        return level
    a, b = action.pos_a, action.pos_b
    ia, ib = a.y * level.width + a.x, b.y * level.width + b.x
    tiles = list(level.tiles)
    tiles[ia], tiles[ib] = tiles[ib], tiles[ia]
    relocate = {a: b, b: a}
    return Level(
        level.width,
        level.height,
        tuple(tiles),
        relocate.get(level.spawn1, level.spawn1),
        relocate.get(level.spawn2, level.spawn2),
    )


@dataclass(frozen=True)
class Observation:
    """Integer grid: tile ids 0..3 plus 4/5 marking the two spawn cells."""

    grid: tuple[tuple[int, ...], ...]

    @property
    def height(self) -> int:
        return len(self.grid)

    @property
    def width(self) -> int:
        return len(self.grid[0])

    def to_lists(self) -> list[list[int]]:
        return [list(row) for row in self.grid]


def encode(level: Level) -> Observation:
    rows = []
    for y in range(level.height):
        row = []
        for x in range(level.width):
            pos = Position(x, y)
            if pos == level.spawn1:
                row.append(SPAWN1_ID)
            elif pos == level.spawn2:
                row.append(SPAWN2_ID)
            else:
                row.append(int(level.tile_at(pos)))
        rows.append(tuple(row))
    return Observation(tuple(rows))


def decode(obs: Observation) -> Level:
    """Rebuild the level; spawn cells sit on grass by the level invariant."""
    grid = obs.grid
    if not grid or not grid[0]:
        raise ValueError("empty observation")
    width = len(grid[0])
    if any(len(row) != width for row in grid):
        raise ValueError("ragged observation grid")
    tiles: list[TileKind] = []
    spawn1: Position | None = None
    spawn2: Position | None = None
    for y, row in enumerate(grid):
        for x, v in enumerate(row):
            if v == SPAWN1_ID:
                if spawn1 is not None:
                    raise ValueError("observation has more than one spawn-1 cell")
                spawn1 = Position(x, y)
                tiles.append(TileKind.GRASS)
            elif v == SPAWN2_ID:
                if spawn2 is not None:
                    raise ValueError("observation has more than one spawn-2 cell")
                spawn2 = Position(x, y)
                tiles.append(TileKind.GRASS)
            elif 0 <= v <= 3:
                tiles.append(TileKind(v))
            else:
                raise ValueError(f"bad tile id {v!r} at ({x},{y})")
    if spawn1 is None or spawn2 is None:
        raise ValueError("observation is missing a spawn cell")
    return Level(width, len(grid), tuple(tiles), spawn1, spawn2)


class CrnPolicy(Enum):
    PER_EPISODE = "per_episode"
    PER_STEP = "per_step"


@dataclass(frozen=True)
class EnvConfig:
    """Episode shape: action variant, step cap, evaluation, seeding policy.

    With freeze_spawns (default) an action touching a spawn cell degrades to
    a no-op swap instead of relocating the marker, so the whole toolkit
    balances by moving terrain around fixed players; set it False to allow
    spawn-moving edits.
    """

    variant: ActionSpaceVariant = ActionSpaceVariant.SWAP_WIDE
    max_steps: int = 10
    eval: EvalConfig = field(default_factory=EvalConfig)
    crn_policy: CrnPolicy = CrnPolicy.PER_EPISODE
    terminal_bonus: float = 0.0
    freeze_spawns: bool = True

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class StepResult:
    obs: Observation
    reward: Fraction
    done: bool
    info: dict[str, Any]


class EpisodeError(RuntimeError):
    """Stepping before reset or after the episode finished."""


class BalanceEnv:
    """One balancing episode at a time over a fixed archetype pairing."""

    def __init__(self, config: EnvConfig, arch1: ArchetypeSpec, arch2: ArchetypeSpec):
        self.config = config
        self.arch1 = arch1
        self.arch2 = arch2
        self._level: Level | None = None
        self._b: Fraction | None = None
        self._steps_used = 0
        self._done = True
        self._episode_base = config.eval.base_seed
        self._eval_index = 0

    @property
    def level(self) -> Level | None:
        return self._level

    @property
    def steps_used(self) -> int:
        return self._steps_used

    @property
    def done(self) -> bool:
        return self._done

    def _eval_cfg(self) -> EvalConfig:
        base = self._episode_base
        if self.config.crn_policy == CrnPolicy.PER_STEP:
            base = mix_seed(base, self._eval_index)
        return EvalConfig(
            n_sims=self.config.eval.n_sims,
            base_seed=base,
            epsilon=self.config.eval.epsilon,
            match_config=self.config.eval.match_config,
        )

    def _estimate(self, level: Level) -> BalanceEstimate:
        est = estimate_balance(level, self.arch1, self.arch2, self._eval_cfg())
        self._eval_index += 1
        return est

    def _info(self, est: BalanceEstimate) -> dict[str, Any]:
        return {
            "b": est.b,
            "wins1": est.wins1,
            "wins2": est.wins2,
            "draws": est.draws,
            "draw_causes": {cause.name: cnt for cause, cnt in est.draw_causes.items()},
            "steps_used": self._steps_used,
            "balanced": is_balanced(est.b, self.config.eval.epsilon),
        }

    def reset(self, level: Level, seed: int | None = None) -> tuple[Observation, dict[str, Any]]:
        """Start an episode from the given level; returns (obs, info with b0).

        With the per-episode seed policy the whole episode reuses one seed
        family derived from (eval.base_seed, seed), so equal (level, seed)
        resets reproduce identical episodes.
        """
        if not isinstance(level, Level):
            raise TypeError("reset needs a Level")
        base = self.config.eval.base_seed
        self._episode_base = base if seed is None else mix_seed(base, seed)
        self._eval_index = 0
        self._level = level
        self._steps_used = 0
        self._done = False
        est = self._estimate(level)
        self._b = est.b
        return encode(level), self._info(est)

    def step(self, action: SwapAction) -> StepResult:
        """Apply one swap, re-estimate balance, pay the improvement."""
        if self._level is None:
            raise EpisodeError("step before reset")
        if self._done:
            raise EpisodeError("episode is done; call reset")
        if self.config.variant == ActionSpaceVariant.SWAP_WIDE_LEGACY:
            if action.apply_flag is None:
                raise ValueError("legacy variant requires apply_flag")
        elif action.apply_flag is not None:
            raise ValueError("wide variant takes no apply_flag")
        level = self._level
        spawn_touched = {action.pos_a, action.pos_b} & {level.spawn1, level.spawn2}
        if self.config.freeze_spawns and spawn_touched:
            new_level = level
        else:
            new_level = apply_swap(level, action)
        est = self._estimate(new_level)
        b_prev = self._b
        reward = abs(b_prev - HALF) - abs(est.b - HALF)
        eps = self.config.eval.epsilon
        newly_balanced = is_balanced(est.b, eps) and not is_balanced(b_prev, eps)
        if newly_balanced and self.config.terminal_bonus:
            reward += Fraction(self.config.terminal_bonus)
        self._level = new_level
        self._b = est.b
        self._steps_used += 1
        done = is_balanced(est.b, eps) or self._steps_used >= self.config.max_steps
        self._done = done
        return StepResult(encode(new_level), reward, done, self._info(est))
