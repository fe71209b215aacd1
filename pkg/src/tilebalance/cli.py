"""Command-line surface: dataset generation, measurement, balancing, serving.

Exit codes: 0 ok, 1 usage, 2 I/O, 3 protocol/connection.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .balance import EvalConfig, dataset_imbalance, estimate_balance, is_balanced
from .env import ActionSpaceVariant, BalanceEnv, SwapAction
from .gateway import GatewayClient, GatewayConfig, serve_stdio, serve_tcp
from .levels import (
    ConfigurationError,
    DatasetError,
    DatasetRecord,
    GeneratorConfig,
    LevelDataset,
    TileKind,
    generate_dataset,
    load_dataset_file,
    render_ascii,
    save_dataset,
)
from .reports import (
    render_panel,
    write_balance_csv,
    write_imbalance_csv,
    write_pair_summary_csv,
)
from .search import (
    BALANCERS,
    DatasetBalanceReport,
    DatasetBalanceRow,
    SearchBudget,
    balance_dataset,
)
from .sim import ARCHETYPES, MatchConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_PROTOCOL = 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; the contract says 1
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def parse_pair(text: str):
    parts = text.split(":")
    if len(parts) != 2 or not all(p in ARCHETYPES for p in parts):
        raise UsageError(
            f"bad pair {text!r}; expected like A:C with archetypes {sorted(ARCHETYPES)}"
        )
    return ARCHETYPES[parts[0]], ARCHETYPES[parts[1]]


def _setup_name(pair: str) -> str:
    return pair.replace(":", "_vs_")


def _open_out(path: str):
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="")


def _generator_config(args) -> GeneratorConfig:
    cfg = GeneratorConfig()
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        weights = raw.get("tile_weights")
        if weights is not None:
            by_name = {k.name.lower(): k for k in TileKind}
            try:
                weights = {by_name[k.lower()]: float(v) for k, v in weights.items()}
            except KeyError as exc:
                raise UsageError(f"unknown tile kind in config: {exc}") from None
        cfg = GeneratorConfig(
            width=int(raw.get("width", cfg.width)),
            height=int(raw.get("height", cfg.height)),
            tile_weights=weights if weights is not None else cfg.tile_weights,
            min_food_tiles=int(raw.get("min_food_tiles", cfg.min_food_tiles)),
        )
    if args.width is not None:
        cfg = replace(cfg, width=args.width)
    if args.height is not None:
        cfg = replace(cfg, height=args.height)
    if args.min_food is not None:
        cfg = replace(cfg, min_food_tiles=args.min_food)
    return replace(cfg, seed=args.seed)


def _eval_config(args) -> EvalConfig:
    return EvalConfig(
        n_sims=args.sims,
        base_seed=args.seed,
        epsilon=args.epsilon,
        match_config=MatchConfig(max_turns=args.max_turns),
    )


def cmd_gen(args) -> int:
    config = _generator_config(args)
    dataset = generate_dataset(config, args.count)
    if args.out == "-":
        from .levels import serialize_dataset

        serialize_dataset(dataset, sys.stdout)
    else:
        save_dataset(dataset, args.out)
        print(f"wrote {len(dataset)} levels to {args.out}")
    return EXIT_OK


def cmd_measure(args) -> int:
    dataset = load_dataset_file(args.dataset)
    arch1, arch2 = parse_pair(args.pair)
    summary = dataset_imbalance(dataset, arch1, arch2, _eval_config(args), processes=args.jobs)
    with _open_out(args.out) as out:
        write_imbalance_csv(summary, out)
    setup = _setup_name(args.pair)
    print(
        f"setup={setup} levels={summary.n_levels} "
        f"favor1={summary.frac_favor1:.3f} favor2={summary.frac_favor2:.3f} "
        f"balanced={summary.frac_balanced:.3f} share_favor1={summary.share_favor1:.3f} "
        f"imbalance={summary.imbalance:.3f}"
    )
    if args.summary_out:
        new_row = (setup, summary.imbalance)
        path = Path(args.summary_out)
        exists = path.exists()
        with open(path, "a", encoding="utf-8", newline="") as fh:
            if not exists:
                write_pair_summary_csv([new_row], fh)
            else:
                write_pair_summary_csv([new_row], _SkipHeader(fh))
    return EXIT_OK


class _SkipHeader:
    """File-like wrapper that drops the first written line (the CSV header)."""

    def __init__(self, fh):
        self._fh = fh
        self._skipped = False

    def write(self, text):
        if not self._skipped:
            self._skipped = True
            return 0
        return self._fh.write(text)


def _balance_external(dataset, args, cfg: EvalConfig) -> DatasetBalanceReport:
    if not args.gateway:
        raise UsageError("method external requires --gateway HOST:PORT")
    host, _, port_s = args.gateway.rpartition(":")
    try:
        client = GatewayClient(host or "127.0.0.1", int(port_s))
    except (ConnectionError, ValueError) as exc:
        raise ConnectionError(f"no gateway peer at {args.gateway!r}: {exc}") from exc
    try:
        hello = client.request("hello")
        variant = ActionSpaceVariant(hello.get("variant", "wide"))
        arch1, arch2 = parse_pair(args.pair)
        from .env import EnvConfig

        env = BalanceEnv(
            EnvConfig(
                variant=variant,
                max_steps=args.budget,
                eval=cfg,
                freeze_spawns=not args.moveable_spawns,
            ),
            arch1,
            arch2,
        )
        rows = []
        for rec in dataset:
            obs, info = env.reset(rec.level, seed=args.seed)
            initial_b = info["b"]
            initially_balanced = info["balanced"]
            evals = 1
            final_b = initial_b
            while not env.done and not initially_balanced:
                data = client.request(
                    "act", obs=obs.to_lists(), components=hello["action_components"]
                )
                result = env.step(SwapAction.from_vector(data["action"], variant))
                obs, final_b, evals = result.obs, result.info["b"], evals + 1
                if result.done:
                    break
            rows.append(
                DatasetBalanceRow(
                    level_id=rec.id,
                    method="external",
                    initial_b=initial_b,
                    final_b=final_b,
                    balanced=is_balanced(final_b, cfg.epsilon),
                    evals_used=evals,
                    initially_balanced=initially_balanced,
                    final_level=env.level,
                )
            )
        return DatasetBalanceReport("external", tuple(rows))
    finally:
        client.close()


def cmd_balance(args) -> int:
    dataset = load_dataset_file(args.dataset)
    arch1, arch2 = parse_pair(args.pair)
    cfg = _eval_config(args)
    if args.method in BALANCERS:
        report = balance_dataset(
            dataset,
            args.method,
            arch1,
            arch2,
            cfg,
            SearchBudget(max_evals=args.budget),
            seed=args.seed,
            use_crn=not args.no_crn,
            freeze_spawns=not args.moveable_spawns,
            processes=args.jobs,
        )
    elif args.method == "external":
        report = _balance_external(dataset, args, cfg)
    else:
        raise UsageError(f"unknown method {args.method!r}")
    with _open_out(args.out) as out:
        write_balance_csv(report, out)
    eligible = report.eligible
    print(
        f"setup={_setup_name(args.pair)} method={args.method} levels={len(report.rows)} "
        f"eligible={len(eligible)} balanced_fraction={report.balanced_fraction:.3f}"
    )
    if args.out_levels:
        balanced_ds = LevelDataset(
            [DatasetRecord(row.level_id, row.final_level, {}) for row in report.rows]
        )
        save_dataset(balanced_ds, args.out_levels)
    return EXIT_OK


def cmd_serve(args) -> int:
    arch1, arch2 = parse_pair(args.pair)
    dataset = load_dataset_file(args.dataset) if args.dataset else None
    config = GatewayConfig(
        arch1=arch1,
        arch2=arch2,
        variant=ActionSpaceVariant(args.variant),
        max_steps=args.max_steps,
        eval=_eval_config(args),
        freeze_spawns=not args.moveable_spawns,
        dataset=dataset,
        width=args.width or 6,
        height=args.height or 6,
    )
    transport = args.transport
    if transport == "stdio":
        serve_stdio(config)
        return EXIT_OK
    if transport.startswith("tcp:"):
        try:
            port = int(transport.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad tcp transport {transport!r}; expected tcp:PORT") from None
        print(f"serving {args.pair} ({args.variant}) on tcp port {port}", file=sys.stderr)
        serve_tcp(config, port)
        return EXIT_OK
    raise UsageError(f"unknown transport {transport!r}; expected stdio or tcp:PORT")


def cmd_render(args) -> int:
    if args.before or args.after:
        if not (args.before and args.after and args.id):
            raise UsageError("panel mode needs --before, --after and --id")
        ds_before = load_dataset_file(args.before)
        ds_after = load_dataset_file(args.after)
        try:
            before = ds_before.get(args.id).level
            after = ds_after.get(args.id).level
        except KeyError as exc:
            raise UsageError(f"level id {exc} not found") from None
        est_b = est_a = None
        if args.pair:
            arch1, arch2 = parse_pair(args.pair)
            cfg = _eval_config(args)
            est_b = estimate_balance(before, arch1, arch2, cfg)
            est_a = estimate_balance(after, arch1, arch2, cfg)
        text = render_panel(before, after, est_b, est_a, args.epsilon)
    else:
        if not args.dataset:
            raise UsageError("render needs --dataset (or --before/--after)")
        dataset = load_dataset_file(args.dataset)
        if args.id:
            try:
                rec = dataset.get(args.id)
            except KeyError:
                raise UsageError(f"level id {args.id!r} not found") from None
        else:
            index = args.index or 0
            if not (0 <= index < len(dataset)):
                raise UsageError(f"index {index} out of range 0..{len(dataset) - 1}")
            rec = dataset[index]
        text = f"{rec.id}\n{render_ascii(rec.level)}"
    with _open_out(args.out) as out:
        out.write(text)
    return EXIT_OK


def _add_eval_args(p, sims_default=10):
    p.add_argument("--sims", type=int, default=sims_default, help="simulations per estimate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.0, help="balance tolerance")
    p.add_argument("--max-turns", type=int, default=100, help="turn cap per match")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tilebalance", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="generate a level dataset")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--min-food", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("measure", help="measure initial imbalance of a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pair", required=True, help="archetype pairing like A:C")
    _add_eval_args(p)
    p.add_argument("--out", default="-", help="per-level CSV")
    p.add_argument("--summary-out", help="append (setup, imbalance) row to this CSV")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("balance", help="run a balancer over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pair", required=True)
    p.add_argument("--method", required=True, help="random | hillclimb | external")
    p.add_argument("--budget", type=int, default=100, help="balance evaluations per level")
    _add_eval_args(p)
    p.add_argument("--no-crn", action="store_true", help="fresh seeds per evaluation")
    p.add_argument(
        "--moveable-spawns", action="store_true", help="let swaps relocate spawn markers"
    )
    p.add_argument("--out", default="-", help="per-level results CSV")
    p.add_argument("--out-levels", help="write final levels as a dataset")
    p.add_argument("--gateway", help="HOST:PORT of external action server")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("serve", help="serve the swap MDP over stdio or TCP")
    p.add_argument("--pair", default="A:A")
    p.add_argument("--variant", choices=["wide", "legacy"], default="wide")
    p.add_argument("--transport", default="stdio", help="stdio or tcp:PORT")
    p.add_argument("--dataset", help="level pool for reset draws")
    p.add_argument(
        "--moveable-spawns", action="store_true", help="let swaps relocate spawn markers"
    )
    p.add_argument("--max-steps", type=int, default=10)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    _add_eval_args(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("render", help="render levels or before/after panels")
    p.add_argument("--in", "--dataset", dest="dataset", help="dataset file to render from")
    p.add_argument("--id")
    p.add_argument("--index", type=int)
    p.add_argument("--before", help="dataset holding the initial level")
    p.add_argument("--after", help="dataset holding the balanced level")
    p.add_argument("--pair", help="estimate balance for captions")
    _add_eval_args(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConnectionError as exc:
        print(f"connection error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"I/O error: {exc.filename or exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
