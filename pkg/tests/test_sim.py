"""Match engine: policies, path-finding, turn pipeline and adjudication."""

import io
import math
import random
from collections import deque

import pytest

from tilebalance import (
    ARCHETYPES,
    Action,
    GeneratorConfig,
    Level,
    MatchCause,
    MatchConfig,
    MatchFinishedError,
    Position,
    RuntimeTile,
    TileKind,
    Winner,
    adjudicate,
    agent_policy,
    generate_level,
    init_match,
    passable,
    run_match,
    shortest_path,
    step_match,
)

A = ARCHETYPES["A"]
B = ARCHETYPES["B"]
C = ARCHETYPES["C"]
D1 = ARCHETYPES["D1"]
D2 = ARCHETYPES["D2"]

GLYPHS = {"G": TileKind.GRASS, "R": TileKind.ROCK, "W": TileKind.WATER, "F": TileKind.FOOD}


def lvl(*rows: str) -> Level:
    """Build a level from glyph rows; '1' and '2' mark spawns (on grass)."""
    h, w = len(rows), len(rows[0])
    tiles, spawn1, spawn2 = [], None, None
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "1":
                spawn1 = Position(x, y)
                tiles.append(TileKind.GRASS)
            elif ch == "2":
                spawn2 = Position(x, y)
                tiles.append(TileKind.GRASS)
            else:
                tiles.append(GLYPHS[ch])
    return Level(w, h, tuple(tiles), spawn1, spawn2)


def bfs_oracle(grid, start, goals, can_cross_rock):
    """Independent breadth-first distance to the nearest goal (None if cut off)."""
    h, w = len(grid), len(grid[0])
    goals = set(goals)
    if start in goals:
        return 0

    def blocked(pos):
        t = grid[pos.y][pos.x]
        return t == RuntimeTile.WATER or (t == RuntimeTile.ROCK and not can_cross_rock)

    if blocked(start):
        return None
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        pos, d = queue.popleft()
        for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)):
            nxt = Position(pos.x + dx, pos.y + dy)
            if not (0 <= nxt.x < w and 0 <= nxt.y < h) or nxt in seen or blocked(nxt):
                continue
            if nxt in goals:
                return d + 1
            seen.add(nxt)
            queue.append((nxt, d + 1))
    return None


def reachable_cells(grid, start, can_cross_rock):
    h, w = len(grid), len(grid[0])
    def blocked(p):
        t = grid[p.y][p.x]
        return t == RuntimeTile.WATER or (t == RuntimeTile.ROCK and not can_cross_rock)
    if blocked(start):
        return {start}
    seen = {start}
    queue = deque([start])
    while queue:
        pos = queue.popleft()
        for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)):
            nxt = Position(pos.x + dx, pos.y + dy)
            if 0 <= nxt.x < w and 0 <= nxt.y < h and nxt not in seen and not blocked(nxt):
                seen.add(nxt)
                queue.append(nxt)
    return seen


def random_runtime_grid(rng, w=6, h=6):
    kinds = [RuntimeTile.GRASS, RuntimeTile.ROCK, RuntimeTile.WATER, RuntimeTile.FOOD,
             RuntimeTile.SCRUB]
    weights = [0.45, 0.2, 0.15, 0.1, 0.1]
    return [rng.choices(kinds, weights=weights, k=w) for _ in range(h)]


class TestPassable:
    def test_rock_blocks_base_archetype(self):
        assert passable(RuntimeTile.ROCK, A) is False

    def test_rock_open_to_rock_crosser(self):
        assert passable(RuntimeTile.ROCK, B) is True

    def test_water_blocks_everyone(self):
        assert passable(RuntimeTile.WATER, B) is False
        assert passable(RuntimeTile.WATER, A) is False

    def test_soft_tiles_open_to_all(self):
        for tile in (RuntimeTile.GRASS, RuntimeTile.FOOD, RuntimeTile.SCRUB):
            assert passable(tile, A) and passable(tile, C)


class TestShortestPath:
    def test_straight_corridor(self):
        grid = [[RuntimeTile.GRASS] * 4]
        grid[0][3] = RuntimeTile.FOOD
        path = shortest_path(grid, Position(0, 0), {Position(3, 0)}, A)
        assert path == [Position(1, 0), Position(2, 0), Position(3, 0)]

    def test_food_ringed_by_water_unreachable(self):
        level = lvl(
            "1GGGGG",
            "GGWWWG",
            "GGWFWG",
            "GGWWWG",
            "GGGGG2",
        )
        grid = [[level.tile_at(Position(x, y)) for x in range(6)] for y in range(5)]
        assert shortest_path(grid, Position(0, 0), {Position(3, 2)}, A) is None

    def test_start_on_goal(self):
        grid = [[RuntimeTile.GRASS] * 2, [RuntimeTile.GRASS] * 2]
        assert shortest_path(grid, Position(0, 0), {Position(0, 0)}, A) == []

    def test_bfs_oracle_equivalence_1000_grids(self):
        rng = random.Random(1234)
        for trial in range(1000):
            grid = random_runtime_grid(rng)
            start = Position(rng.randrange(6), rng.randrange(6))
            goals = {Position(rng.randrange(6), rng.randrange(6))
                     for _ in range(rng.randint(1, 4))}
            for arch in (A, B):
                expected = bfs_oracle(grid, start, goals, arch.can_cross_rock)
                path = shortest_path(grid, start, goals, arch)
                if expected is None:
                    assert path is None, (trial, arch.name)
                else:
                    assert path is not None and len(path) == expected, (trial, arch.name)
                    # Path is a real 4-connected walk over passable tiles.
                    prev = start
                    for pos in path:
                        assert abs(pos.x - prev.x) + abs(pos.y - prev.y) == 1
                        assert passable(grid[pos.y][pos.x], arch)
                        prev = pos
                    if path:
                        assert path[-1] in goals

    def test_rock_crosser_reaches_superset(self):
        for seed in range(500):
            level = generate_level(GeneratorConfig(seed=seed))
            grid = [
                [level.tile_at(Position(x, y)) for x in range(level.width)]
                for y in range(level.height)
            ]
            reach_a = reachable_cells(grid, level.spawn1, can_cross_rock=False)
            reach_b = reachable_cells(grid, level.spawn1, can_cross_rock=True)
            assert reach_a <= reach_b


class TestAgentPolicy:
    def test_food_one_step_right(self):
        state = init_match(lvl("1F2G", "GGGG"), A, A)
        assert agent_policy(state, 0) == Action.RIGHT

    def test_water_branch_steps_toward_adjacent_cell(self):
        state = init_match(
            lvl(
                "G1G",
                "G2G",
                "GWG",
            ),
            A,
            A,
        )
        # No food anywhere; the nearest drinking spot from (1,0) is (1,1).
        assert agent_policy(state, 0) == Action.DOWN

    def test_handicap_skips_odd_turns(self):
        state = init_match(lvl("1F2G", "GGGG"), C, A)
        assert agent_policy(state, 0) == Action.RIGHT
        state.turn_index = 1
        assert agent_policy(state, 0) == Action.DO_NOTHING

    def test_nothing_reachable_stands_still(self):
        state = init_match(lvl("1G2G", "GGGG"), A, A)
        assert agent_policy(state, 0) == Action.DO_NOTHING

    def test_dead_player_rejected(self):
        state = init_match(lvl("1F2G", "GGGG"), A, A)
        state.players[0].alive = False
        with pytest.raises(ValueError):
            agent_policy(state, 0)


class TestStepMatch:
    def test_starvation_death_at_gauge_plus_health_turns(self):
        # No food, no water: gauges drain for gauge_max turns, then health
        # falls one per turn; both die on turn gauge_max + gauge_max.
        level = lvl("1GGG", "GGGG", "GGG2")
        outcome = run_match(level, A, A, MatchConfig(seed=0))
        assert outcome.winner == Winner.DRAW
        assert outcome.cause == MatchCause.MUTUAL_DEATH
        assert outcome.turns_played == 20

    def test_simultaneous_entry_awards_single_point(self):
        for seed in range(20):
            state = init_match(
                lvl("1F2", "GGG"), A, A, MatchConfig(seed=seed, respawn_prob=0.0)
            )
            step_match(state)
            p1, p2 = state.players
            assert p1.victory_points + p2.victory_points == 1
            assert state.grid.count(int(RuntimeTile.FOOD)) == 0
            assert state.grid.count(int(RuntimeTile.SCRUB)) == 1

    def test_both_coin_flip_sides_occur(self):
        winners = set()
        for seed in range(30):
            state = init_match(lvl("1F2", "GGG"), A, A, MatchConfig(seed=seed))
            step_match(state)
            winners.add(state.players[0].victory_points)
        assert winners == {0, 1}

    def test_scrub_stays_scrub_without_respawn(self):
        state = init_match(
            lvl("1F2", "GGG"), A, A, MatchConfig(seed=3, respawn_prob=0.0)
        )
        step_match(state)
        assert state.grid.count(int(RuntimeTile.SCRUB)) == 1
        for _ in range(50):
            if state.finished:
                break
            step_match(state)
            assert state.grid.count(int(RuntimeTile.SCRUB)) == 1

    def test_stepping_finished_match_rejected(self):
        level = lvl("1GGG", "GGG2")
        state = init_match(level, A, A)
        while not state.finished:
            step_match(state)
        with pytest.raises(MatchFinishedError):
            step_match(state)

    def test_food_respawning_underfoot_does_not_stall_the_eater(self):
        # With respawn_prob=1 every eaten tile turns back into food while the
        # eater stands on it. The policy must keep walking to food it can
        # enter instead of idling forever on a tile it cannot eat standing.
        level = lvl(
            "1FFFFF",
            "WWWWWW",
            "2GGGGG",
        )
        outcome = run_match(level, A, A, MatchConfig(seed=4, respawn_prob=1.0))
        assert outcome.winner == Winner.PLAYER1
        assert outcome.cause == MatchCause.FOOD_GOAL
        assert outcome.turns_played == 5

    def test_consume_on_stand_eats_underfoot_food(self):
        level = lvl(
            "1FFFFF",
            "WWWWWW",
            "2GGGGG",
        )
        cfg = MatchConfig(seed=4, respawn_prob=1.0, consume_on_stand=True)
        outcome = run_match(level, A, A, cfg)
        assert outcome.winner == Winner.PLAYER1
        assert outcome.cause == MatchCause.FOOD_GOAL


class TestAdjudicate:
    def _state(self, arch1=A, arch2=A):
        return init_match(lvl("1GGG", "GGG2"), arch1, arch2)

    def test_food_goal_win(self):
        state = self._state()
        state.players[0].victory_points = 5
        state.players[1].victory_points = 3
        out = adjudicate(state)
        assert out.winner == Winner.PLAYER1 and out.cause == MatchCause.FOOD_GOAL
        assert out.vp == (5, 3)

    def test_lower_threshold_archetype_wins_first(self):
        state = self._state(arch1=D2, arch2=A)
        state.players[0].victory_points = 3
        state.players[1].victory_points = 4
        out = adjudicate(state)
        assert out.winner == Winner.PLAYER1 and out.cause == MatchCause.FOOD_GOAL

    def test_d1_threshold(self):
        state = self._state(arch1=D1, arch2=A)
        state.players[0].victory_points = 4
        out = adjudicate(state)
        assert out.winner == Winner.PLAYER1

    def test_mutual_death_is_draw(self):
        state = self._state()
        state.players[0].alive = False
        state.players[1].alive = False
        out = adjudicate(state)
        assert out.winner == Winner.DRAW and out.cause == MatchCause.MUTUAL_DEATH

    def test_sole_survivor_wins(self):
        state = self._state()
        state.players[1].alive = False
        out = adjudicate(state)
        assert out.winner == Winner.PLAYER1 and out.cause == MatchCause.SURVIVED

    def test_mutual_goal_is_draw(self):
        state = self._state()
        state.players[0].victory_points = 5
        state.players[1].victory_points = 5
        out = adjudicate(state)
        assert out.winner == Winner.DRAW and out.cause == MatchCause.MUTUAL_GOAL

    def test_timeout_draw(self):
        state = self._state()
        state.turn_index = state.config.max_turns
        out = adjudicate(state)
        assert out.winner == Winner.DRAW and out.cause == MatchCause.TIMEOUT

    def test_live_match_has_no_outcome(self):
        assert adjudicate(self._state()) is None


class TestRunMatch:
    def test_one_sided_food_access(self):
        level = lvl(
            "1FFFFF",
            "GFFFFF",
            "WWWWWW",
            "GGGGGG",
            "2GGGGG",
        )
        outcome = run_match(level, A, A, MatchConfig(seed=5))
        assert outcome.winner == Winner.PLAYER1
        assert outcome.cause == MatchCause.FOOD_GOAL
        assert outcome.vp[0] == A.food_to_win

    def test_no_food_no_water_draw(self):
        outcome = run_match(lvl("1GGG", "GGG2"), A, A, MatchConfig(seed=9))
        assert outcome.winner == Winner.DRAW

    def test_determinism_same_seed(self):
        level = generate_level(GeneratorConfig(seed=42))
        cfg = MatchConfig(seed=77)
        assert run_match(level, A, B, cfg) == run_match(level, A, B, cfg)

    def test_full_trace_determinism(self):
        level = generate_level(GeneratorConfig(seed=7))
        traces = []
        for _ in range(2):
            buf = io.StringIO()
            run_match(level, A, C, MatchConfig(seed=3), trace=buf)
            traces.append(buf.getvalue())
        assert traces[0] == traces[1]
        assert traces[0].count("\n") > 0

    def test_fast_forward_matches_full_simulation(self):
        for seed in range(150):
            level = generate_level(GeneratorConfig(seed=seed + 5000))
            cfg = MatchConfig(seed=seed)
            fast = run_match(level, A, A, cfg, fast_forward=True)
            slow = run_match(level, A, A, cfg, fast_forward=False)
            assert fast == slow, seed

    def test_food_goal_winner_has_exact_threshold(self):
        # vp is adjudicated every turn, so a food-goal winner holds exactly
        # its threshold.
        hits = 0
        for seed in range(60):
            level = generate_level(GeneratorConfig(seed=seed))
            out = run_match(level, A, D2, MatchConfig(seed=seed))
            if out.cause == MatchCause.FOOD_GOAL:
                hits += 1
                winner_vp = out.vp[0] if out.winner == Winner.PLAYER1 else out.vp[1]
                threshold = (A if out.winner == Winner.PLAYER1 else D2).food_to_win
                assert winner_vp == threshold
        assert hits > 10


class TestMatchInvariants:
    def test_gauges_conservation_and_handicap(self):
        rng = random.Random(99)
        total_turns = 0
        for trial in range(120):
            level = generate_level(GeneratorConfig(seed=rng.randrange(1 << 30)))
            arch2 = rng.choice([A, B, C, D1, D2])
            state = init_match(level, C, arch2, MatchConfig(seed=trial))
            food_cycle = state.grid.count(int(RuntimeTile.FOOD)) + state.grid.count(
                int(RuntimeTile.SCRUB)
            )
            rocks = state.grid.count(int(RuntimeTile.ROCK))
            waters = state.grid.count(int(RuntimeTile.WATER))
            gauge = state.config.gauge_max
            prev_vp = (0, 0)
            c_active_turns = 0
            while not state.finished:
                step_match(state)
                total_turns += 1
                if state.last_actions[0] != Action.DO_NOTHING:
                    c_active_turns += 1
                for p in state.players:
                    assert 0 <= p.health <= gauge
                    assert 0 <= p.food <= gauge
                    assert 0 <= p.water <= gauge
                grid = state.grid
                assert (
                    grid.count(int(RuntimeTile.FOOD)) + grid.count(int(RuntimeTile.SCRUB))
                    == food_cycle
                )
                assert grid.count(int(RuntimeTile.ROCK)) == rocks
                assert grid.count(int(RuntimeTile.WATER)) == waters
                vp = (state.players[0].victory_points, state.players[1].victory_points)
                assert vp[0] >= prev_vp[0] and vp[1] >= prev_vp[1]
                assert (vp[0] - prev_vp[0]) + (vp[1] - prev_vp[1]) <= 2
                prev_vp = vp
            assert c_active_turns <= math.ceil(state.turn_index / 2)
        assert total_turns > 2000

    def test_role_swap_flips_balance(self):
        level = generate_level(GeneratorConfig(seed=42))
        n = 1000

        def balance(arch1, arch2, salt):
            wins1 = draws = 0
            for i in range(n):
                out = run_match(level, arch1, arch2, MatchConfig(seed=salt + i))
                if out.winner == Winner.PLAYER1:
                    wins1 += 1
                elif out.winner == Winner.DRAW:
                    draws += 1
            return (wins1 + 0.5 * draws) / n

        b_orig = balance(A, C, salt=0)
        b_swapped = balance(C, A, salt=10_000)
        assert abs(b_swapped - (1.0 - b_orig)) <= 0.05
