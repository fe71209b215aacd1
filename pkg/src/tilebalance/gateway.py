"""JSON-lines gateway exposing the swap MDP to external trainers.

One JSON object per LF-terminated line, over stdio or a TCP socket. Every
request carries a cmd and a req_id; every request gets exactly one response,
in order, echoing the req_id:

    -> {"cmd": "hello", "req_id": 1}
    <- {"req_id": 1, "ok": true, "data": {"protocol_version": 1, ...}}
    -> {"cmd": "reset", "req_id": 2, "seed": 7}
    <- {"req_id": 2, "ok": true, "data": {"obs": [[...]], "info": {...}}}
    -> {"cmd": "step", "req_id": 3, "action": [2, 3, 3, 2]}
    <- {"req_id": 3, "ok": true, "data": {"obs": ..., "reward": 0.1, ...}}

Actions are integer vectors in [y1, x1, y2, x2] order (legacy variant appends
the apply flag). A session multiplexes independent env slots via an optional
"slot" field, for vectorized trainers. Malformed input never kills a session:
the offending line is answered with an error object (E_PARSE / E_CMD /
E_STATE / E_ARGS) and the loop continues.
"""

from __future__ import annotations

import json
import socket
import socketserver
import sys
from dataclasses import dataclass, field
from typing import IO, Any

from .balance import EvalConfig, mix_seed
from .env import (
    ActionSpaceVariant,
    BalanceEnv,
    CrnPolicy,
    EnvConfig,
    EpisodeError,
    Observation,
    SwapAction,
    action_components,
    decode,
)
from .levels import Level, LevelDataset, Position
from .sim import ARCHETYPES, ArchetypeSpec

PROTOCOL_VERSION = 1

E_PARSE = "E_PARSE"
E_CMD = "E_CMD"
E_STATE = "E_STATE"
E_ARGS = "E_ARGS"


@dataclass(frozen=True)
class GatewayConfig:
    """Everything a session needs: pairing, env knobs, optional level pool."""

    arch1: ArchetypeSpec = ARCHETYPES["A"]
    arch2: ArchetypeSpec = ARCHETYPES["A"]
    variant: ActionSpaceVariant = ActionSpaceVariant.SWAP_WIDE
    max_steps: int = 10
    eval: EvalConfig = field(default_factory=EvalConfig)
    crn_policy: CrnPolicy = CrnPolicy.PER_EPISODE
    terminal_bonus: float = 0.0
    freeze_spawns: bool = True
    dataset: LevelDataset | None = None
    width: int = 6
    height: int = 6

    def env_config(self) -> EnvConfig:
        return EnvConfig(
            variant=self.variant,
            max_steps=self.max_steps,
            eval=self.eval,
            crn_policy=self.crn_policy,
            terminal_bonus=self.terminal_bonus,
            freeze_spawns=self.freeze_spawns,
        )


def _level_from_payload(payload: Any) -> Level:
    """Accept either {"grid": [[ids]]} or {"w","h","tiles","spawn1","spawn2"}."""
    if not isinstance(payload, dict):
        raise ValueError("level payload must be an object")
    if "grid" in payload:
        grid = payload["grid"]
        if not isinstance(grid, list) or not all(isinstance(r, list) for r in grid):
            raise ValueError("level grid must be a list of rows")
        return decode(Observation(tuple(tuple(int(v) for v in row) for row in grid)))
    try:
        spawn1 = Position(int(payload["spawn1"][0]), int(payload["spawn1"][1]))
        spawn2 = Position(int(payload["spawn2"][0]), int(payload["spawn2"][1]))
        return Level.from_tile_string(
            int(payload["w"]), int(payload["h"]), str(payload["tiles"]), spawn1, spawn2
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"bad level payload: {exc!r}") from None


class GatewaySession:
    """One protocol session; owns a set of numbered env slots."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        self.envs: dict[int, BalanceEnv] = {}
        self.closed = False

    # -- plumbing ---------------------------------------------------------

    def _env(self, slot: int) -> BalanceEnv:
        if slot not in self.envs:
            self.envs[slot] = BalanceEnv(self.config.env_config(), self.config.arch1,
                                         self.config.arch2)
        return self.envs[slot]

    @staticmethod
    def _ok(req_id: Any, data: dict[str, Any]) -> str:
        return json.dumps({"req_id": req_id, "ok": True, "data": data}, sort_keys=True)

    @staticmethod
    def _err(req_id: Any, code: str, message: str) -> str:
        return json.dumps(
            {"req_id": req_id, "ok": False, "error": {"code": code, "message": message}},
            sort_keys=True,
        )

    @staticmethod
    def _info_payload(info: dict[str, Any]) -> dict[str, Any]:
        out = dict(info)
        out["b"] = float(info["b"])
        return out

    # -- commands ----------------------------------------------------------

    def _spec_data(self) -> dict[str, Any]:
        cfg = self.config
        return {
            "protocol_version": PROTOCOL_VERSION,
            "variant": cfg.variant.value,
            "action_components": action_components(cfg.height, cfg.width, cfg.variant),
            "observation_shape": [cfg.height, cfg.width],
            "pairing": [cfg.arch1.name, cfg.arch2.name],
        }

    def _cmd_hello(self, msg: dict) -> dict:
        return self._spec_data()

    def _cmd_spec(self, msg: dict) -> dict:
        data = self._spec_data()
        data.update(
            {
                "max_steps": self.config.max_steps,
                "n_sims": self.config.eval.n_sims,
                "epsilon": self.config.eval.epsilon,
                "crn_policy": self.config.crn_policy.value,
                "dataset_size": len(self.config.dataset) if self.config.dataset else 0,
            }
        )
        return data

    def _resolve_level(self, msg: dict) -> tuple[Level, str | None]:
        dataset = self.config.dataset
        if "level" in msg:
            return _level_from_payload(msg["level"]), None
        if "index" in msg:
            if dataset is None:
                raise ValueError("no dataset loaded; reset with an inline level")
            index = int(msg["index"])
            if not (0 <= index < len(dataset)):
                raise ValueError(f"dataset index {index} out of range 0..{len(dataset) - 1}")
            rec = dataset[index]
            return rec.level, rec.id
        if dataset is None:
            raise ValueError("reset needs a level, or an index/seed with a dataset loaded")
        if msg.get("seed") is None:
            raise ValueError("dataset draw needs a seed")
        rec = dataset[mix_seed(int(msg["seed"]), 0x5EED) % len(dataset)]
        return rec.level, rec.id

    def _cmd_reset(self, msg: dict) -> dict:
        level, level_id = self._resolve_level(msg)
        seed = msg.get("seed")
        env = self._env(int(msg.get("slot", 0)))
        obs, info = env.reset(level, None if seed is None else int(seed))
        data = {"obs": obs.to_lists(), "info": self._info_payload(info)}
        if level_id is not None:
            data["level_id"] = level_id
        return data

    def _cmd_step(self, msg: dict) -> dict:
        env = self._env(int(msg.get("slot", 0)))
        if "action" not in msg:
            raise ValueError("step needs an action vector")
        action = SwapAction.from_vector(msg["action"], self.config.variant)
        result = env.step(action)
        return {
            "obs": result.obs.to_lists(),
            "reward": float(result.reward),
            "done": result.done,
            "info": self._info_payload(result.info),
        }

    def _cmd_close(self, msg: dict) -> dict:
        self.closed = True
        return {"closed": True}

    _COMMANDS = {
        "hello": _cmd_hello,
        "spec": _cmd_spec,
        "reset": _cmd_reset,
        "step": _cmd_step,
        "close": _cmd_close,
    }

    # -- entry point -------------------------------------------------------

    def handle_line(self, line: str) -> str:
        """Turn one request line into one response line (never raises)."""
        line = line.strip()
        try:
            msg = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return self._err(None, E_PARSE, f"malformed JSON: {exc}")
        if not isinstance(msg, dict):
            return self._err(None, E_PARSE, "request must be a JSON object")
        req_id = msg.get("req_id")
        cmd = msg.get("cmd")
        handler = self._COMMANDS.get(cmd)
        if handler is None:
            return self._err(req_id, E_CMD, f"unknown cmd {cmd!r}")
        try:
            return self._ok(req_id, handler(self, msg))
        except EpisodeError as exc:
            return self._err(req_id, E_STATE, str(exc))
        except Exception as exc:  # malformed payloads must never kill the session
            return self._err(req_id, E_ARGS, f"{type(exc).__name__}: {exc}")


def serve_stdio(config: GatewayConfig, stdin: IO[str] | None = None,
                stdout: IO[str] | None = None) -> None:
    """Serve one session over line-buffered stdio until close/EOF."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    session = GatewaySession(config)
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(session.handle_line(line) + "\n")
        stdout.flush()
        if session.closed:
            break


class _GatewayTCPHandler(socketserver.StreamRequestHandler):
    def handle(self):
        session = GatewaySession(self.server.gateway_config)  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace")
            if not line.strip():
                continue
            self.wfile.write((session.handle_line(line) + "\n").encode("utf-8"))
            self.wfile.flush()
            if session.closed:
                break


class GatewayTCPServer(socketserver.ThreadingTCPServer):
    """One independent session per connection."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], config: GatewayConfig):
        super().__init__(address, _GatewayTCPHandler)
        self.gateway_config = config


def serve_tcp(config: GatewayConfig, port: int, host: str = "127.0.0.1") -> None:
    with GatewayTCPServer((host, port), config) as server:
        server.serve_forever()


class GatewayClient:
    """Small line-protocol client (used by the external-method balancer)."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ConnectionError(f"cannot reach gateway at {host}:{port}: {exc}") from exc
        self._rfile = self._sock.makefile("r", encoding="utf-8", newline="\n")
        self._req_id = 0

    def request(self, cmd: str, **payload: Any) -> dict[str, Any]:
        self._req_id += 1
        msg = {"cmd": cmd, "req_id": self._req_id, **payload}
        self._sock.sendall((json.dumps(msg) + "\n").encode("utf-8"))
        raw = self._rfile.readline()
        if not raw:
            raise ConnectionError("gateway closed the connection")
        reply = json.loads(raw)
        if reply.get("req_id") != self._req_id:
            raise ConnectionError(f"out-of-order reply: {reply!r}")
        if not reply.get("ok"):
            err = reply.get("error", {})
            raise RuntimeError(f"gateway error {err.get('code')}: {err.get('message')}")
        return reply["data"]

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass
