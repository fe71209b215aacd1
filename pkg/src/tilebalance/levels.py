"""Level representation, generation, dataset persistence and ASCII rendering.

A Level is an immutable rectangular grid of design tiles (grass, rock, water,
food) plus two distinct spawn positions that always sit on grass. Spawns are
stored separately from the terrain so that tile edits can move the markers
explicitly. Coordinates are 0-based with the origin at the top-left corner:
x indexes columns, y indexes rows. Human-readable cell labels use a column
letter and a 1-based row number ("A1" is the top-left cell).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import IntEnum
from typing import IO, Any, Iterator, Mapping, NamedTuple


class ConfigurationError(ValueError):
    """Raised for invalid generator or run configuration."""


class DatasetError(ValueError):
    """Raised for malformed dataset files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class TileKind(IntEnum):
    """The four design-time tile kinds (runtime adds scrub, see sim module)."""

    GRASS = 0
    ROCK = 1
    WATER = 2
    FOOD = 3


TILE_CHARS = {TileKind.GRASS: "G", TileKind.ROCK: "R", TileKind.WATER: "W", TileKind.FOOD: "F"}
CHAR_TILES = {c: t for t, c in TILE_CHARS.items()}


class Position(NamedTuple):
    x: int
    y: int


def coord_label(pos: Position) -> str:
    """Label a position as column letter + 1-based row number, e.g. (3,2) -> "D3"."""
    x, y = pos
    if not (0 <= x < 26) or y < 0:
        raise ValueError(f"position {pos!r} not labelable (need 0 <= x < 26, y >= 0)")
    return chr(ord("A") + x) + str(y + 1)


def parse_label(s: str) -> Position:
    """Inverse of coord_label: "D3" -> Position(3, 2)."""
    if len(s) < 2 or not s[0].isalpha() or not s[1:].isdigit():
        raise ValueError(f"malformed coordinate label {s!r}")
    x = ord(s[0].upper()) - ord("A")
    y = int(s[1:]) - 1
    if x < 0 or x >= 26 or y < 0:
        raise ValueError(f"malformed coordinate label {s!r}")
    return Position(x, y)


@dataclass(frozen=True)
class Level:
    """Immutable level design: terrain grid plus two spawn positions.

    ``tiles`` is a flat row-major tuple of length width*height.
    """

    width: int
    height: int
    tiles: tuple[TileKind, ...]
    spawn1: Position
    spawn2: Position

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError(f"level must be at least 2x2, got {self.width}x{self.height}")
        if len(self.tiles) != self.width * self.height:
            raise ValueError(
                f"tile count {len(self.tiles)} does not match {self.width}x{self.height} grid"
            )
        if self.spawn1 == self.spawn2:
            raise ValueError("spawn positions must be distinct")
        for name, pos in (("spawn1", self.spawn1), ("spawn2", self.spawn2)):
            if not (0 <= pos.x < self.width and 0 <= pos.y < self.height):
                raise ValueError(f"{name} {pos} out of bounds")
            if self.tile_at(pos) is not TileKind.GRASS:
                raise ValueError(f"{name} {pos} must sit on grass")

    def tile_at(self, pos: Position) -> TileKind:
        return self.tiles[pos.y * self.width + pos.x]

    def positions(self) -> Iterator[Position]:
        for y in range(self.height):
            for x in range(self.width):
                yield Position(x, y)

    def tile_string(self) -> str:
        return "".join(TILE_CHARS[t] for t in self.tiles)

    @classmethod
    def from_tile_string(
        cls, width: int, height: int, tilestring: str, spawn1: Position, spawn2: Position
    ) -> "Level":
        if len(tilestring) != width * height:
            raise ValueError(
                f"tile string length {len(tilestring)} does not match {width}x{height} grid"
            )
        tiles = []
        for i, c in enumerate(tilestring):
            kind = CHAR_TILES.get(c)
            if kind is None:
                raise ValueError(f"unknown tile character {c!r} at index {i}")
            tiles.append(kind)
        return cls(width, height, tuple(tiles), spawn1, spawn2)


DEFAULT_TILE_WEIGHTS: Mapping[TileKind, float] = {
    TileKind.GRASS: 0.50,
    TileKind.ROCK: 0.20,
    TileKind.WATER: 0.15,
    TileKind.FOOD: 0.15,
}


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters for iid per-tile level sampling."""

    width: int = 6
    height: int = 6
    tile_weights: Mapping[TileKind, float] = field(
        default_factory=lambda: dict(DEFAULT_TILE_WEIGHTS)
    )
    min_food_tiles: int = 2
    seed: int = 0

    def validate(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ConfigurationError("width and height must be >= 2")
        weights = [self.tile_weights.get(kind, 0.0) for kind in TileKind]
        if any(w < 0 for w in weights):
            raise ConfigurationError("tile weights must be non-negative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ConfigurationError(f"tile weights must sum to 1, got {sum(weights)}")
        if self.min_food_tiles < 0:
            raise ConfigurationError("min_food_tiles must be >= 0")
        area = self.width * self.height
        if self.min_food_tiles > area - 2:
            raise ConfigurationError(
                f"min_food_tiles {self.min_food_tiles} leaves no room for spawns on a "
                f"{self.width}x{self.height} grid"
            )
        if self.tile_weights.get(TileKind.GRASS, 0.0) <= 0:
            raise ConfigurationError("grass weight must be positive (spawns need grass)")
        if self.min_food_tiles > 0 and self.tile_weights.get(TileKind.FOOD, 0.0) <= 0:
            raise ConfigurationError("min_food_tiles > 0 requires a positive food weight")


def generate_level(config: GeneratorConfig, rng: random.Random | None = None) -> Level:
    """Sample one level: iid tiles per the configured weights, resampling the
    whole grid until it has at least 2 grass tiles and ``min_food_tiles`` food
    tiles, then place the two spawns uniformly on distinct grass tiles.

    Deterministic given (config, rng state); with no rng, a fresh stream is
    seeded from config.seed.
    """
    config.validate()
    if rng is None:
        rng = random.Random(config.seed)
    kinds = list(TileKind)
    weights = [config.tile_weights.get(kind, 0.0) for kind in TileKind]
    area = config.width * config.height
    while True:
        tiles = rng.choices(kinds, weights=weights, k=area)
        grass = [i for i, t in enumerate(tiles) if t is TileKind.GRASS]
        food_count = sum(1 for t in tiles if t is TileKind.FOOD)
        if len(grass) >= 2 and food_count >= config.min_food_tiles:
            break
    s1, s2 = rng.sample(grass, 2)
    w = config.width
    return Level(
        width=w,
        height=config.height,
        tiles=tuple(tiles),
        spawn1=Position(s1 % w, s1 // w),
        spawn2=Position(s2 % w, s2 // w),
    )


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    level: Level
    meta: Mapping[str, Any] = field(default_factory=dict)


@dataclass
class LevelDataset:
    """Ordered collection of identified levels; ids are unique."""

    records: list[DatasetRecord] = field(default_factory=list)

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValueError(f"duplicate level id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DatasetRecord]:
        return iter(self.records)

    def __getitem__(self, index: int) -> DatasetRecord:
        return self.records[index]

    def get(self, level_id: str) -> DatasetRecord:
        for rec in self.records:
            if rec.id == level_id:
                return rec
        raise KeyError(level_id)


def generate_dataset(config: GeneratorConfig, count: int, id_prefix: str = "L") -> LevelDataset:
    """Generate ``count`` levels from one rng stream seeded by config.seed."""
    if count < 0:
        raise ConfigurationError("count must be >= 0")
    rng = random.Random(config.seed)
    records = [
        DatasetRecord(id=f"{id_prefix}{i:05d}", level=generate_level(config, rng), meta={})
        for i in range(count)
    ]
    return LevelDataset(records)


def _format_record(rec: DatasetRecord) -> str:
    lvl = rec.level
    return "\t".join(
        (
            rec.id,
            str(lvl.width),
            str(lvl.height),
            lvl.tile_string(),
            f"{lvl.spawn1.x},{lvl.spawn1.y}",
            f"{lvl.spawn2.x},{lvl.spawn2.y}",
            json.dumps(dict(rec.meta), sort_keys=True),
        )
    )


def serialize_dataset(dataset: LevelDataset, sink: IO[str]) -> None:
    """Write one tab-separated record per line (UTF-8, LF)."""
    for rec in dataset:
        sink.write(_format_record(rec) + "\n")


def _parse_position(text: str, line_no: int, what: str) -> Position:
    parts = text.split(",")
    if len(parts) != 2:
        raise DatasetError(f"{what} must be 'x,y', got {text!r}", line_no)
    try:
        return Position(int(parts[0]), int(parts[1]))
    except ValueError:
        raise DatasetError(f"{what} has non-integer coordinates: {text!r}", line_no) from None


def load_dataset(source: IO[str]) -> LevelDataset:
    """Parse a dataset file; malformed lines raise DatasetError naming the line."""
    records: list[DatasetRecord] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 7:
            raise DatasetError(f"expected 7 tab-separated fields, got {len(fields)}", line_no)
        rec_id, w_s, h_s, tilestring, s1_s, s2_s, meta_s = fields
        if rec_id in seen:
            raise DatasetError(f"duplicate level id {rec_id!r}", line_no)
        try:
            width, height = int(w_s), int(h_s)
        except ValueError:
            raise DatasetError(f"non-integer dimensions {w_s!r}x{h_s!r}", line_no) from None
        spawn1 = _parse_position(s1_s, line_no, "spawn1")
        spawn2 = _parse_position(s2_s, line_no, "spawn2")
        try:
            level = Level.from_tile_string(width, height, tilestring, spawn1, spawn2)
        except ValueError as exc:
            raise DatasetError(str(exc), line_no) from None
        try:
            meta = json.loads(meta_s)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"bad meta JSON: {exc}", line_no) from None
        if not isinstance(meta, dict):
            raise DatasetError("meta must be a JSON object", line_no)
        seen.add(rec_id)
        records.append(DatasetRecord(rec_id, level, meta))
    return LevelDataset(records)


def save_dataset(dataset: LevelDataset, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        serialize_dataset(dataset, fh)


def load_dataset_file(path: str) -> LevelDataset:
    with open(path, "r", encoding="utf-8") as fh:
        return load_dataset(fh)


def render_ascii(level: Level) -> str:
    """Render a level as a letter/number-labelled glyph grid.

    Tiles print as G/R/W/F; the spawn cells print as '1' and '2'. The column
    header and row numbers match coord_label, so the cell printed at column D
    row 3 is the cell labelled "D3".
    """
    pad = len(str(level.height))
    header = " " * (pad + 1) + "".join(chr(ord("A") + x) for x in range(level.width))
    lines = [header]
    for y in range(level.height):
        row = []
        for x in range(level.width):
            pos = Position(x, y)
            if pos == level.spawn1:
                row.append("1")
            elif pos == level.spawn2:
                row.append("2")
            else:
                row.append(TILE_CHARS[level.tile_at(pos)])
        lines.append(str(y + 1).rjust(pad) + " " + "".join(row))
    return "\n".join(lines) + "\n"


def parse_ascii(text: str) -> Level:
    """Inverse of render_ascii (spawn cells decode to grass underneath)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 3:
        raise ValueError("render too short to be a level")
    header = lines[0].strip()
    width = len(header)
    if header != "".join(chr(ord("A") + x) for x in range(width)):
        raise ValueError(f"bad column header {header!r}")
    height = len(lines) - 1
    pad = len(str(height))
    tiles: list[TileKind] = []
    spawn1: Position | None = None
    spawn2: Position | None = None
    for y, line in enumerate(lines[1:]):
        label, glyphs = line[:pad], line[pad + 1 :]
        if label.strip() != str(y + 1):
            raise ValueError(f"bad row label {label!r} for row {y + 1}")
        if len(glyphs) != width:
            raise ValueError(f"row {y + 1} has {len(glyphs)} cells, expected {width}")
        for x, c in enumerate(glyphs):
            if c == "1":
                spawn1 = Position(x, y)
                tiles.append(TileKind.GRASS)
            elif c == "2":
                spawn2 = Position(x, y)
                tiles.append(TileKind.GRASS)
            elif c in CHAR_TILES:
                tiles.append(CHAR_TILES[c])
            else:
                raise ValueError(f"unknown glyph {c!r} at {coord_label(Position(x, y))}")
    if spawn1 is None or spawn2 is None:
        raise ValueError("render is missing a spawn marker")
    return Level(width, height, tuple(tiles), spawn1, spawn2)
