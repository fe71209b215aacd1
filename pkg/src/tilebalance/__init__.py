"""Balance asymmetric two-player tile levels entirely through level edits.

Simulate matches between heuristic archetypes, score levels by win
frequencies, and search the space of tile swaps by random search, hill
climbing, or an RL-ready swap environment.
"""

from .levels import (
    ConfigurationError,
    DatasetError,
    DatasetRecord,
    GeneratorConfig,
    Level,
    LevelDataset,
    Position,
    TileKind,
    coord_label,
    generate_dataset,
    generate_level,
    load_dataset,
    load_dataset_file,
    parse_ascii,
    parse_label,
    render_ascii,
    save_dataset,
    serialize_dataset,
)
from .sim import (
    ARCHETYPES,
    Action,
    ArchetypeSpec,
    MatchCause,
    MatchConfig,
    MatchFinishedError,
    MatchOutcome,
    MatchState,
    PlayerState,
    RuntimeTile,
    Winner,
    adjudicate,
    agent_policy,
    init_match,
    passable,
    run_match,
    shortest_path,
    step_match,
)

__all__ = [name for name in dir() if not name.startswith("_")]
