"""Live episode sessions over a JSON/WebSocket protocol.

A human (or scripted client) plays the same episodes the policies face:
only the two camera views are transmitted, never 3D state or the simulator
distance. One session per connection; message handling is serialized in
arrival order, sessions are fully isolated.

Client messages:  start {camera_mode?, seed?} | probe | action {ax, ay} | reset
Server messages:  state | probe_result | result | tally | error

Every client message gets exactly one typed reply; an episode-ending action
additionally pushes the final ``state`` before its ``result`` reply. ``reset``
replies with the running tally (the cockpit polls it that way after each
result); resetting mid-episode abandons the episode without counting it.
"""

from __future__ import annotations

import asyncio
import json
import secrets
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import wire
from .env import (
    Action,
    EnvConfig,
    EnvState,
    Observation,
    ProbeOutOfView,
    ProbeVectors,
    Status,
    create_env,
    observe,
    run_calibration_probe,
    step,
)
from .stats import success_rate_ci

PROTOCOL_VERSION = 1

# Outbound schema: exact field sets per message type. Validated on every send
# so ground-truth state can never leak onto the wire.
OUTBOUND_SCHEMA = {
    "state": {"v", "type", "step", "points", "h_img", "done", "status"},
    "probe_result": {"v", "type", "v_l1", "v_l2", "v_r1", "v_r2"},
    "result": {"v", "type", "success", "steps"},
    "tally": {"v", "type", "successes", "attempts"},
    "error": {"v", "type", "code", "message"},
}

ALLOWED_STATUS = {s.value for s in Status}


class NoEpisodes(ValueError):
    pass


class SchemaViolation(AssertionError):
    pass


def _vec(value) -> list[float]:
    return [float(value[0]), float(value[1])]


def validate_outbound(msg: dict) -> dict:
    """Assert an outbound message matches the wire schema exactly."""
    kind = msg.get("type")
    if kind not in OUTBOUND_SCHEMA:
        raise SchemaViolation(f"unknown outbound type {kind!r}")
    if set(msg) != OUTBOUND_SCHEMA[kind]:
        raise SchemaViolation(f"{kind} fields {sorted(msg)} != {sorted(OUTBOUND_SCHEMA[kind])}")
    if kind == "state":
        for side in ("left", "right"):
            pts = msg["points"][side]
            if set(pts) != {"a", "b", "aux"}:
                raise SchemaViolation(f"bad point set for {side}: {sorted(pts)}")
            for key in ("a", "b", "aux"):
                if len(pts[key]) != 2:
                    raise SchemaViolation("image points must be 2D")
            if len(msg["h_img"][side]) != 2:
                raise SchemaViolation("target-line vectors must be 2D")
        if msg["status"] not in ALLOWED_STATUS:
            raise SchemaViolation(f"unknown status {msg['status']!r}")
    if kind == "probe_result":
        for key in ("v_l1", "v_l2", "v_r1", "v_r2"):
            if len(msg[key]) != 2:
                raise SchemaViolation("probe vectors must be 2D")
    return msg


@dataclass
class SessionState:
    session_id: str
    env_cfg: EnvConfig
    state: Optional[EnvState] = None
    obs: Optional[Observation] = None
    probe: Optional[ProbeVectors] = None
    episode_seed: int = 0
    successes: int = 0
    attempts: int = 0
    log: list = field(default_factory=list)


class PlaySession:
    """State machine for one client; transport-agnostic for testability."""

    def __init__(self, env_cfg_defaults: EnvConfig, session_id: str | None = None):
        self.defaults = env_cfg_defaults
        self.s = SessionState(
            session_id=session_id or uuid.uuid4().hex,
            env_cfg=env_cfg_defaults,
            episode_seed=secrets.randbits(31),
        )
        self.rng: Optional[np.random.Generator] = None

    # -- message handling ---------------------------------------------------

    def handle(self, raw: str) -> list[dict]:
        """Process one client message, returning outbound messages in order."""
        try:
            msg = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            return [self._error("bad_message", "payload is not valid JSON")]
        if not isinstance(msg, dict) or "type" not in msg:
            return [self._error("bad_message", "expected an object with a 'type' field")]
        handler = {
            "start": self._on_start,
            "probe": self._on_probe,
            "action": self._on_action,
            "reset": self._on_reset,
        }.get(msg["type"])
        if handler is None:
            return [self._error("bad_message", f"unknown message type {msg['type']!r}")]
        try:
            replies = handler(msg)
        except (TypeError, ValueError) as exc:
            replies = [self._error("bad_message", str(exc))]
        return [validate_outbound(m) for m in replies]

    def _running(self) -> bool:
        return self.s.state is not None and self.s.state.status is Status.RUNNING

    def _on_start(self, msg: dict) -> list[dict]:
        if self._running():
            return [self._error("bad_state", "an episode is already running; reset first")]
        cfg = self.defaults
        mode = msg.get("camera_mode")
        if mode is not None:
            if mode not in ("fc", "rc"):
                return [self._error("bad_message", f"unknown camera mode {mode!r}")]
            if mode != cfg.camera_mode:
                # Mode switch: fall back to the canonical sampler for that mode.
                cfg = replace(cfg, camera_mode=mode, rig_sampler=None)
        seed = msg.get("seed")
        if seed is None:
            seed = self.s.episode_seed
            self.s.episode_seed += 1
        else:
            seed = int(seed)
        cfg = replace(cfg, seed=seed)
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        self.s.env_cfg = cfg
        self.s.state = create_env(cfg, self.rng)
        self.s.obs = observe(cfg, self.s.state, self.rng)
        self.s.probe = None
        self._log("start", seed=seed, camera_mode=cfg.camera_mode)
        return [self._state_msg()]

    def _on_probe(self, msg: dict) -> list[dict]:
        if not self._running():
            return [self._error("bad_state", "no running episode")]
        if self.s.state.step_count != 0:
            return [self._error("bad_state", "probe is only available before the first step")]
        try:
            self.s.probe = run_calibration_probe(self.s.env_cfg, self.s.state, self.rng)
        except ProbeOutOfView as exc:
            return [self._error("bad_state", str(exc))]
        self._log("probe")
        p = self.s.probe
        return [
            {
                "v": PROTOCOL_VERSION,
                "type": "probe_result",
                "v_l1": _vec(p.v_l1),
                "v_l2": _vec(p.v_l2),
                "v_r1": _vec(p.v_r1),
                "v_r2": _vec(p.v_r2),
            }
        ]

    def _on_action(self, msg: dict) -> list[dict]:
        if not self._running():
            return [self._error("bad_state", "no running episode")]
        if "ax" not in msg or "ay" not in msg:
            return [self._error("bad_message", "action requires ax and ay")]
        action = Action(ax=float(msg["ax"]), ay=float(msg["ay"]))
        result = step(self.s.env_cfg, self.s.state, action, self.rng)
        if result.obs is not None:
            self.s.obs = result.obs
        self._log("action", ax=action.ax, ay=action.ay, status=result.status.value)
        if not result.done:
            return [self._state_msg()]
        success = result.status is Status.SUCCESS
        self.s.attempts += 1
        self.s.successes += int(success)
        self._log("done", success=success, steps=self.s.state.step_count)
        return [
            self._state_msg(),
            {
                "v": PROTOCOL_VERSION,
                "type": "result",
                "success": success,
                "steps": self.s.state.step_count,
            },
        ]

    def _on_reset(self, msg: dict) -> list[dict]:
        if self._running():
            self._log("abandon", step=self.s.state.step_count)
        self.s.state = None
        self.s.obs = None
        self.s.probe = None
        return [self._tally_msg()]

    # -- outbound builders ----------------------------------------------------

    def _state_msg(self) -> dict:
        obs, state = self.s.obs, self.s.state
        return {
            "v": PROTOCOL_VERSION,
            "type": "state",
            "step": state.step_count,
            "points": {
                "left": {"a": _vec(obs.a_left), "b": _vec(obs.b_left), "aux": _vec(obs.aux_left)},
                "right": {
                    "a": _vec(obs.a_right),
                    "b": _vec(obs.b_right),
                    "aux": _vec(obs.aux_right),
                },
            },
            "h_img": {"left": _vec(obs.h_img_left), "right": _vec(obs.h_img_right)},
            "done": state.status is not Status.RUNNING,
            "status": state.status.value,
        }

    def _tally_msg(self) -> dict:
        return {
            "v": PROTOCOL_VERSION,
            "type": "tally",
            "successes": self.s.successes,
            "attempts": self.s.attempts,
        }

    def _error(self, code: str, message: str) -> dict:
        return {"v": PROTOCOL_VERSION, "type": "error", "code": code, "message": message}

    def _log(self, event: str, **data) -> None:
        self.s.log.append({"t": time.time(), "event": event, **data})


def session_summary(session: PlaySession) -> dict:
    """Attempts, successes, rate, and Wilson interval for a finished session."""
    s = session.s
    if s.attempts == 0:
        raise NoEpisodes("session has no completed episodes")
    rate, lo, hi = success_rate_ci(s.successes, s.attempts)
    return {
        "session_id": s.session_id,
        "attempts": s.attempts,
        "successes": s.successes,
        "rate": rate,
        "wilson_95": [lo, hi],
    }


def write_session_summary(session: PlaySession, output_dir: str | Path) -> Optional[Path]:
    if session.s.attempts == 0:
        return None
    path = Path(output_dir) / "human" / f"{session.s.session_id}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    summary = session_summary(session)
    summary["log"] = session.s.log
    path.write_text(json.dumps(summary, indent=2) + "\n")
    return path


async def _handle_connection(
    reader: asyncio.StreamReader,
    writer: asyncio.StreamWriter,
    env_cfg_defaults: EnvConfig,
    output_dir: str | Path,
) -> None:
    session = PlaySession(env_cfg_defaults)
    try:
        await wire.server_handshake(reader, writer)
        while True:
            text = await wire.recv_text(reader, writer)
            if text is None:
                break
            for reply in session.handle(text):
                await wire.send_text(writer, json.dumps(reply))
            if session.s.attempts > 0:
                write_session_summary(session, output_dir)
    except (wire.ConnectionClosed, asyncio.IncompleteReadError, ConnectionResetError):
        pass
    finally:
        if session.s.attempts > 0:
            write_session_summary(session, output_dir)
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionResetError, BrokenPipeError):  # pragma: no cover
            pass


async def serve(
    port: int,
    env_cfg_defaults: Optional[EnvConfig] = None,
    output_dir: str | Path = "runs",
    host: str = "127.0.0.1",
    ready: Optional[asyncio.Event] = None,
) -> None:
    """Accept play sessions until cancelled. Human sessions default to the
    fixed rig with noise-free observations."""
    if env_cfg_defaults is None:
        env_cfg_defaults = EnvConfig(camera_mode="fc", obs_noise_std=0.0)
    server = await asyncio.start_server(
        lambda r, w: _handle_connection(r, w, env_cfg_defaults, output_dir), host, port
    )
    async with server:
        if ready is not None:
            ready.set()
        await server.serve_forever()
