"""Deterministic turn-based simulation of one match between two archetypes.

Each turn both players pick an action from the same pre-turn state, moves are
applied simultaneously, then resources deplete, regenerate and respawn, and the
match is adjudicated. All randomness (food-conflict draws, scrub respawn) comes
from a single per-match stream seeded by MatchConfig.seed, so a match replays
identically given equal inputs.

The agent policy is greedy: head for the nearest reachable food, else for the
nearest tile where water can be drunk, else stand still. Path ties are broken
deterministically; see shortest_path.

Hot-path layout: grids are flat row-major int lists, and per-terrain all-pairs
BFS distance tables are memoised per (shape, blocked cells) so the per-turn
work is a handful of table lookups.
"""

from __future__ import annotations

import random
from array import array
from bisect import insort
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from typing import IO, Sequence

from .levels import Level, Position

INF = 0xFFFF


class RuntimeTile(IntEnum):
    """Design tiles plus scrub, the consumed-food state."""

    GRASS = 0
    ROCK = 1
    WATER = 2
    FOOD = 3
    SCRUB = 4


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    DO_NOTHING = 4


# (dx, dy) per movement action, origin top-left so UP decreases y.
_DELTAS = {Action.UP: (0, -1), Action.DOWN: (0, 1), Action.LEFT: (-1, 0), Action.RIGHT: (1, 0)}


@dataclass(frozen=True)
class ArchetypeSpec:
    """A player archetype: movement ability, action cadence, win threshold.

    The archetype acts only on turns where turn_index % action_period == 0 and
    wins upon collecting food_to_win victory points.
    """

    name: str
    can_cross_rock: bool
    action_period: int
    food_to_win: int

    def __post_init__(self):
        if self.action_period < 1:
            raise ValueError("action_period must be >= 1")
        if self.food_to_win < 1:
            raise ValueError("food_to_win must be >= 1")


ARCHETYPES: dict[str, ArchetypeSpec] = {
    "A": ArchetypeSpec("A", can_cross_rock=False, action_period=1, food_to_win=5),
    "B": ArchetypeSpec("B", can_cross_rock=True, action_period=1, food_to_win=5),
    "C": ArchetypeSpec("C", can_cross_rock=False, action_period=2, food_to_win=5),
    "D1": ArchetypeSpec("D1", can_cross_rock=False, action_period=1, food_to_win=4),
    "D2": ArchetypeSpec("D2", can_cross_rock=False, action_period=1, food_to_win=3),
}


def passable(tile: RuntimeTile | int, arch: ArchetypeSpec) -> bool:
    """Grass, food and scrub carry everyone; rock only rock-crossers; water nobody."""
    if tile == RuntimeTile.WATER:
        return False
    if tile == RuntimeTile.ROCK:
        return arch.can_cross_rock
    return True


@dataclass(frozen=True)
class MatchConfig:
    """Match-level knobs: turn cap, gauge size, respawn odds, regen threshold.

    Health, food and water share one maximum (gauge_max). consume_on_stand
    controls whether a player standing still on a food tile (one that respawned
    underfoot) eats it; by default consumption requires entering the tile.
    """

    max_turns: int = 100
    gauge_max: int = 10
    respawn_prob: float = 0.025
    regen_threshold_frac: float = 0.5
    seed: int = 0
    consume_on_stand: bool = False

    def __post_init__(self):
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")
        if self.gauge_max < 1:
            raise ValueError("gauge_max must be >= 1")
        if not (0.0 <= self.respawn_prob <= 1.0):
            raise ValueError("respawn_prob must be in [0, 1]")


@dataclass(slots=True)
class PlayerState:
    pos: Position
    health: int
    food: int
    water: int
    victory_points: int = 0
    alive: bool = True


class Winner(IntEnum):
    PLAYER1 = 1
    PLAYER2 = 2
    DRAW = 0


class MatchCause(IntEnum):
    FOOD_GOAL = 0
    SURVIVED = 1
    TIMEOUT = 2
    MUTUAL_DEATH = 3
    MUTUAL_GOAL = 4


@dataclass(frozen=True)
class MatchOutcome:
    winner: Winner
    turns_played: int
    vp: tuple[int, int]
    cause: MatchCause


class MatchFinishedError(RuntimeError):
    """Raised when stepping a match that already has an outcome."""


@lru_cache(maxsize=256)
def _neighbor_lists(w: int, h: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Per cell: in-bounds ((neighbor_cell, action), ...) in U,D,L,R order."""
    out = []
    for y in range(h):
        for x in range(w):
            entries = []
            for act in (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT):
                dx, dy = _DELTAS[act]
                nx, ny = x + dx, y + dy
                if 0 <= nx < w and 0 <= ny < h:
                    entries.append((ny * w + nx, int(act)))
            out.append(tuple(entries))
    return tuple(out)


@dataclass(frozen=True)
class _Tables:
    """Per-(shape, blocked set) movement tables for one archetype.

    dist is a flat n*n all-pairs table (dist[a*n+b], INF if unreachable);
    water_action[c] is the precomputed water-branch action from cell c and
    water_reach[c] whether any drinking spot is reachable at all.
    """

    dist: array
    water_action: bytes
    water_reach: bytes


@lru_cache(maxsize=4096)
def _movement_tables(w: int, h: int, blocked_mask: int, water_mask: int) -> _Tables:
    n = w * h
    nbrs = _neighbor_lists(w, h)
    dist = array("H", [INF]) * n * n

    for src in range(n):
        if (blocked_mask >> src) & 1:
            continue
        base = src * n
        dist[base + src] = 0
        frontier = [src]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for c in frontier:
                for nc, _a in nbrs[c]:
                    if not (blocked_mask >> nc) & 1 and dist[base + nc] == INF:
                        dist[base + nc] = d
                        nxt.append(nc)
            frontier = nxt

    # Drinking spots: passable cells 4-adjacent to water, in row-major order.
    targets = [
        c
        for c in range(n)
        if not (blocked_mask >> c) & 1 and any((water_mask >> nc) & 1 for nc, _a in nbrs[c])
    ]
    water_action = bytearray([Action.DO_NOTHING]) * n
    water_reach = bytearray(n)
    for c in range(n):
        if (blocked_mask >> c) & 1:
            continue
        base = c * n
        best_d, best = INF, -1
        for t in targets:
            d = dist[base + t]
            if d < best_d:
                best_d, best = d, t
        if best < 0 or best_d == INF:
            continue
        water_reach[c] = 1
        if best_d == 0:
            continue
        row = best * n
        want = best_d - 1
        for nc, act in nbrs[c]:
            if dist[row + nc] == want:
                water_action[c] = act
                break
    return _Tables(dist, bytes(water_action), bytes(water_reach))


@dataclass(frozen=True, eq=False)
class _StaticContext:
    """Everything about a (level, archetype pair) that no turn can change."""

    width: int
    height: int
    grid0: tuple[int, ...]
    foods0: tuple[int, ...]
    nbrs: tuple[tuple[tuple[int, int], ...], ...]
    blocked: tuple[int, int]
    tables: tuple[_Tables, _Tables]
    water_adj: bytes
    can_ever_eat: tuple[bool, bool]
    spawn_cells: tuple[int, int]


@lru_cache(maxsize=4096)
def _static_context(level: Level, arch1: ArchetypeSpec, arch2: ArchetypeSpec) -> _StaticContext:
    w, h = level.width, level.height
    n = w * h
    grid0 = tuple(int(t) for t in level.tiles)
    water_mask = rock_mask = 0
    foods: list[int] = []
    for i, t in enumerate(grid0):
        if t == RuntimeTile.WATER:
            water_mask |= 1 << i
        elif t == RuntimeTile.ROCK:
            rock_mask |= 1 << i
        elif t == RuntimeTile.FOOD:
            foods.append(i)
    nbrs = _neighbor_lists(w, h)
    blocked = tuple(water_mask | (0 if a.can_cross_rock else rock_mask) for a in (arch1, arch2))
    tables = tuple(_movement_tables(w, h, b, water_mask) for b in blocked)
    water_adj = bytes(
        1 if any((water_mask >> nc) & 1 for nc, _a in nbrs[c]) else 0 for c in range(n)
    )
    spawns = (level.spawn1, level.spawn2)
    spawn_cells = tuple(s.y * w + s.x for s in spawns)
    # Food/scrub cells never enter or leave the food cycle, so whether a
    # player can ever eat is fixed for the whole match.
    can_ever_eat = tuple(
        any(tables[k].dist[spawn_cells[k] * n + f] != INF for f in foods) for k in (0, 1)
    )
    return _StaticContext(
        w, h, grid0, tuple(foods), nbrs, blocked, tables, water_adj, can_ever_eat, spawn_cells
    )


class MatchState:
    """Mutable single-owner state of a running match."""

    __slots__ = (
        "level",
        "config",
        "archetypes",
        "width",
        "height",
        "grid",
        "players",
        "turn_index",
        "rng",
        "outcome",
        "foods",
        "scrubs",
        "last_actions",
        "_n",
        "_ctx",
    )

    def __init__(self, level: Level, arch1: ArchetypeSpec, arch2: ArchetypeSpec, config: MatchConfig):
        ctx = _static_context(level, arch1, arch2)
        self.level = level
        self.config = config
        self.archetypes = (arch1, arch2)
        self.width, self.height = ctx.width, ctx.height
        self._n = ctx.width * ctx.height
        self._ctx = ctx
        self.grid = list(ctx.grid0)
        self.foods = list(ctx.foods0)
        self.scrubs: list[int] = []
        self.turn_index = 0
        self.rng = random.Random(config.seed)
        self.outcome: MatchOutcome | None = None
        self.last_actions: tuple[int, int] | None = None
        g = config.gauge_max
        self.players = [
            PlayerState(pos=p, health=g, food=g, water=g) for p in (level.spawn1, level.spawn2)
        ]

    @property
    def finished(self) -> bool:
        return self.outcome is not None


def init_match(
    level: Level, arch1: ArchetypeSpec, arch2: ArchetypeSpec, config: MatchConfig | None = None
) -> MatchState:
    return MatchState(level, arch1, arch2, config or MatchConfig())


def shortest_path(
    grid: Sequence[Sequence[RuntimeTile | int]],
    start: Position,
    goals: set[Position] | frozenset[Position] | Sequence[Position],
    arch: ArchetypeSpec,
) -> list[Position] | None:
    """Minimum-length 4-connected path from start to the nearest goal.

    Returns the positions stepped through after start ([] if start is a goal,
    None if no goal is reachable). Deterministic tie-breaking: the goal is the
    nearest one in row-major order, and each step takes the first direction in
    Up, Down, Left, Right order that stays on a shortest path.
    """
    h = len(grid)
    w = len(grid[0])
    flat = [int(t) for row in grid for t in row]
    if not (0 <= start.x < w and 0 <= start.y < h):
        raise ValueError(f"start {start} out of bounds for {w}x{h} grid")
    if start in goals:
        return []
    blocked_mask = 0
    for i, t in enumerate(flat):
        if not passable(t, arch):
            blocked_mask |= 1 << i
    water_mask = 0  # irrelevant here; tables cache keys on it, keep canonical
    for i, t in enumerate(flat):
        if t == RuntimeTile.WATER:
            water_mask |= 1 << i
    tables = _movement_tables(w, h, blocked_mask, water_mask)
    n = w * h
    nbrs = _neighbor_lists(w, h)
    start_cell = start.y * w + start.x
    goal_cells = sorted(p.y * w + p.x for p in goals)
    base = start_cell * n
    best_d, goal = INF, -1
    for g in goal_cells:
        d = tables.dist[base + g]
        if d < best_d:
            best_d, goal = d, g
    if goal < 0 or best_d == INF:
        return None
    path: list[Position] = []
    row = goal * n
    cell, d = start_cell, best_d
    dist = tables.dist
    while d > 0:
        for nc, _act in nbrs[cell]:
            if dist[row + nc] == d - 1:
                cell = nc
                break
        d -= 1
        path.append(Position(cell % w, cell // w))
    return path


_DO_NOTHING = int(Action.DO_NOTHING)
_FOOD = int(RuntimeTile.FOOD)
_SCRUB = int(RuntimeTile.SCRUB)


def _choose_action(state: MatchState, k: int) -> int:
    arch = state.archetypes[k]
    if state.turn_index % arch.action_period != 0:
        return _DO_NOTHING
    ctx = state._ctx
    p = state.players[k]
    cell = p.pos.y * ctx.width + p.pos.x
    tables = ctx.tables[k]
    if ctx.can_ever_eat[k]:
        # Only food the player could actually consume is a target: the tile
        # underfoot cannot be entered, so it counts only if standing consumes.
        own = -1 if state.config.consume_on_stand else cell
        dist = tables.dist
        n = state._n
        base = cell * n
        best_d, goal = INF, -1
        for f in state.foods:
            if f == own:
                continue
            d = dist[base + f]
            if d < best_d:
                best_d, goal = d, f
        if goal >= 0 and best_d != INF:
            if best_d == 0:
                return _DO_NOTHING
            row = goal * n
            want = best_d - 1
            for nc, act in ctx.nbrs[cell]:
                if dist[row + nc] == want:
                    return act
    if tables.water_reach[cell]:
        return tables.water_action[cell]
    return _DO_NOTHING


def agent_policy(state: MatchState, player: int) -> Action:
    """The greedy archetype policy: food first, then water, else stand still.

    Targets the nearest food tile the player could actually consume (the tile
    underfoot only counts when standing on food consumes it), falling back to
    the nearest drinking spot. Skips the turn entirely (DO_NOTHING) when the
    archetype's action period forbids acting at the current turn index.
    """
    if player not in (0, 1):
        raise ValueError("player must be 0 or 1")
    if not state.players[player].alive:
        raise ValueError("policy queried for a dead player")
    return Action(_choose_action(state, player))


def adjudicate(state: MatchState) -> MatchOutcome | None:
    """End-of-turn adjudication; None while the match is still live."""
    p1, p2 = state.players
    a1, a2 = state.archetypes
    vp = (p1.victory_points, p2.victory_points)
    turns = state.turn_index
    goal1 = p1.victory_points >= a1.food_to_win
    goal2 = p2.victory_points >= a2.food_to_win
    if goal1 and goal2:
        return MatchOutcome(Winner.DRAW, turns, vp, MatchCause.MUTUAL_GOAL)
    if goal1:
        return MatchOutcome(Winner.PLAYER1, turns, vp, MatchCause.FOOD_GOAL)
    if goal2:
        return MatchOutcome(Winner.PLAYER2, turns, vp, MatchCause.FOOD_GOAL)
    if not p1.alive and not p2.alive:
        return MatchOutcome(Winner.DRAW, turns, vp, MatchCause.MUTUAL_DEATH)
    if not p2.alive:
        return MatchOutcome(Winner.PLAYER1, turns, vp, MatchCause.SURVIVED)
    if not p1.alive:
        return MatchOutcome(Winner.PLAYER2, turns, vp, MatchCause.SURVIVED)
    if turns >= state.config.max_turns:
        return MatchOutcome(Winner.DRAW, turns, vp, MatchCause.TIMEOUT)
    return None


def step_match(state: MatchState) -> MatchState:
    """Advance the match by one turn (in place); returns the same state.

    Turn pipeline: simultaneous policy choice from the shared pre-state,
    movement (illegal moves degrade to standing still), food consumption with
    a random draw when both players enter the same food tile, water refill
    next to water, gauge depletion (health falls only on turns entered with
    both gauges empty), regeneration above the threshold, scrub respawn, then
    adjudication.
    """
    if state.outcome is not None:
        raise MatchFinishedError("match already adjudicated")

    cfg = state.config
    ctx = state._ctx
    w = ctx.width
    grid = state.grid
    players = state.players
    acts = (_choose_action(state, 0), _choose_action(state, 1))
    state.last_actions = acts

    new_cells = []
    moved = []
    for k in (0, 1):
        p = players[k]
        cell = p.pos.y * w + p.pos.x
        act = acts[k]
        target = cell
        if act != _DO_NOTHING:
            for nc, a in ctx.nbrs[cell]:
                if a == act:
                    if not (ctx.blocked[k] >> nc) & 1:
                        target = nc
                    break
        new_cells.append(target)
        moved.append(target != cell)

    # Food consumption: eligible means ending on food having entered it (or
    # standing on it, when configured). Same-tile conflicts go to a coin flip.
    eligible = [
        grid[new_cells[k]] == _FOOD and (moved[k] or cfg.consume_on_stand) for k in (0, 1)
    ]
    if eligible[0] and eligible[1] and new_cells[0] == new_cells[1]:
        loser = 1 if state.rng.random() < 0.5 else 0
        eligible[loser] = False
    gauge = cfg.gauge_max
    water_adj = ctx.water_adj
    threshold = cfg.regen_threshold_frac * gauge
    for k in (0, 1):
        p = players[k]
        cell = new_cells[k]
        if moved[k]:
            p.pos = Position(cell % w, cell // w)
        if eligible[k]:
            p.food = gauge
            p.victory_points += 1
            grid[cell] = _SCRUB
            state.foods.remove(cell)
            insort(state.scrubs, cell)
        # Water refill, then depletion (health drops only on turns entered
        # with both gauges already empty), then regeneration.
        if water_adj[cell]:
            p.water = gauge
        starved = p.food == 0 and p.water == 0
        if p.food:
            p.food -= 1
        if p.water:
            p.water -= 1
        if starved:
            p.health -= 1
            if p.health <= 0:
                p.health = 0
                p.alive = False
        elif p.food > threshold and p.water > threshold and p.health < gauge:
            p.health += 1

    # Scrub respawn, in row-major order for a reproducible draw sequence.
    if state.scrubs:
        rng_random = state.rng.random
        prob = cfg.respawn_prob
        respawned = [c for c in state.scrubs if rng_random() < prob]
        for c in respawned:
            grid[c] = _FOOD
            state.scrubs.remove(c)
            insort(state.foods, c)

    state.turn_index += 1
    state.outcome = adjudicate(state)
    return state


def _in_stasis(state: MatchState) -> bool:
    """True when nothing observable can ever change: neither player can ever
    eat, and both are parked on a drinking spot at the stable gauge point."""
    ctx = state._ctx
    if ctx.can_ever_eat[0] or ctx.can_ever_eat[1]:
        return False
    stable_water = state.config.gauge_max - 1
    for p in state.players:
        if p.food != 0 or p.water != stable_water:
            return False
        if not ctx.water_adj[p.pos.y * state.width + p.pos.x]:
            return False
    return True


def write_trace_line(state: MatchState, sink: IO[str]) -> None:
    """One tab-separated line per completed turn, for replay debugging."""
    p1, p2 = state.players
    raw = state.last_actions or (_DO_NOTHING, _DO_NOTHING)
    a1, a2 = Action(raw[0]), Action(raw[1])
    sink.write(
        "\t".join(
            (
                str(state.turn_index),
                f"{p1.pos.x},{p1.pos.y}",
                f"{p2.pos.x},{p2.pos.y}",
                f"{a1.name}/{a2.name}",
                f"h{p1.health}f{p1.food}w{p1.water}|h{p2.health}f{p2.food}w{p2.water}",
                f"{p1.victory_points}:{p2.victory_points}",
                f"food@{','.join(map(str, state.foods))}",
            )
        )
        + "\n"
    )


def run_match(
    level: Level,
    arch1: ArchetypeSpec,
    arch2: ArchetypeSpec,
    config: MatchConfig | None = None,
    *,
    fast_forward: bool = True,
    trace: IO[str] | None = None,
) -> MatchOutcome:
    """Play a full match and return its outcome.

    Deterministic given (level, archetypes, config.seed). With fast_forward
    (default), a provably static stalemate — neither player can ever eat and
    both sit immortal at water — is adjudicated as the timeout draw it will
    become, without simulating the remaining turns. Tracing disables it.
    """
    state = init_match(level, arch1, arch2, config)
    max_turns = state.config.max_turns
    check_stasis = fast_forward and trace is None
    while state.outcome is None:
        if check_stasis and _in_stasis(state):
            p1, p2 = state.players
            state.turn_index = max_turns
            state.outcome = MatchOutcome(
                Winner.DRAW,
                max_turns,
                (p1.victory_points, p2.victory_points),
                MatchCause.TIMEOUT,
            )
            break
        step_match(state)
        if trace is not None:
            write_trace_line(state, trace)
    return state.outcome
