"""CSV reports and ASCII before/after panels for measurement and search runs."""

from __future__ import annotations

import csv
from fractions import Fraction
from typing import IO, Iterable

from .balance import BalanceEstimate, ImbalanceSummary, is_balanced
from .levels import Level, render_ascii
from .search import DatasetBalanceReport

IMBALANCE_COLUMNS = ["level_id", "wins1", "wins2", "draws", "b", "class", "draw_cause_histogram"]
BALANCE_COLUMNS = ["level_id", "method", "initial_b", "final_b", "balanced", "evals_used"]


def _fmt_b(b: Fraction) -> str:
    return repr(float(b))


def _histogram(est: BalanceEstimate) -> str:
    return ";".join(
        f"{cause.name}={count}"
        for cause, count in sorted(est.draw_causes.items(), key=lambda kv: kv[0].name)
        if count
    )


def write_imbalance_csv(summary: ImbalanceSummary, sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(IMBALANCE_COLUMNS)
    for item in summary.per_level:
        est = item.estimate
        writer.writerow(
            (
                item.level_id,
                est.wins1,
                est.wins2,
                est.draws,
                _fmt_b(est.b),
                item.label.value,
                _histogram(est),
            )
        )


def write_pair_summary_csv(rows: Iterable[tuple[str, float]], sink: IO[str]) -> None:
    """Rows of (setup, initial_imbalance_fraction), one per archetype pairing."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["setup", "initial_imbalance_fraction"])
    for setup, fraction in rows:
        writer.writerow((setup, repr(float(fraction))))


def write_balance_csv(report: DatasetBalanceReport, sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(BALANCE_COLUMNS)
    for row in report.rows:
        writer.writerow(
            (
                row.level_id,
                row.method,
                _fmt_b(row.initial_b),
                _fmt_b(row.final_b),
                str(row.balanced).lower(),
                row.evals_used,
            )
        )


def balance_caption(est: BalanceEstimate, epsilon: float = 0.0) -> str:
    """Fig-style caption: "Balanced, 0.5" / "Unbalanced, 1.0", flagging
    draw-dominated scores so a 0.5 made of stalemates is visibly suspect."""
    word = "Balanced" if is_balanced(est.b, epsilon) else "Unbalanced"
    caption = f"{word}, {float(est.b):g}"
    if est.draws * 2 >= est.n_sims:
        caption += f" (draws {100 * est.draws // est.n_sims}%)"
    return caption


def side_by_side(left: str, right: str, gap: str = "   ") -> str:
    left_lines = left.rstrip("\n").splitlines()
    right_lines = right.rstrip("\n").splitlines()
    width = max(len(ln) for ln in left_lines)
    height = max(len(left_lines), len(right_lines))
    left_lines += [""] * (height - len(left_lines))
    right_lines += [""] * (height - len(right_lines))
    return "\n".join(
        f"{l.ljust(width)}{gap}{r}".rstrip() for l, r in zip(left_lines, right_lines)
    ) + "\n"


def render_panel(
    before: Level,
    after: Level,
    before_est: BalanceEstimate | None = None,
    after_est: BalanceEstimate | None = None,
    epsilon: float = 0.0,
) -> str:
    """Side-by-side renders with balance captions underneath."""
    left, right = render_ascii(before), render_ascii(after)
    grid_width = max(len(ln) for ln in left.splitlines())
    body = side_by_side(left, right)
    captions = []
    for est in (before_est, after_est):
        captions.append(balance_caption(est, epsilon) if est is not None else "")
    if any(captions):
        body += f"{captions[0].ljust(grid_width)}   {captions[1]}".rstrip() + "\n"
    return body
