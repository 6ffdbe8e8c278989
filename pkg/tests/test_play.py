import asyncio
import json

import numpy as np
import pytest

from stereoalign import wire
from stereoalign.env import EnvConfig, Status, create_env, observe, run_calibration_probe, step
from stereoalign.features import compute_residual, analytic_iml_action
from stereoalign.play import (
    NoEpisodes,
    PlaySession,
    SchemaViolation,
    serve,
    session_summary,
    validate_outbound,
    write_session_summary,
)

QUIET = EnvConfig(camera_mode="fc", seed=0, obs_noise_std=0.0)


def start_session(seed=0, cfg=QUIET) -> PlaySession:
    session = PlaySession(cfg)
    replies = session.handle(json.dumps({"type": "start", "seed": seed}))
    assert [r["type"] for r in replies] == ["state"]
    return session


def oracle_action(session: PlaySession) -> dict:
    cfg = session.s.env_cfg
    act = analytic_iml_action(
        session.s.probe, compute_residual(session.s.obs), 0.8, cfg.probe_scale, cfg.action_scale
    )
    return {"type": "action", "ax": act.ax, "ay": act.ay}


def play_episode(session: PlaySession, seed=0) -> list[dict]:
    """Start + probe + oracle actions until the episode finishes."""
    outbound = session.handle(json.dumps({"type": "start", "seed": seed}))
    outbound += session.handle(json.dumps({"type": "probe"}))
    for _ in range(QUIET.max_steps):
        replies = session.handle(json.dumps(oracle_action(session)))
        outbound += replies
        if any(r["type"] == "result" for r in replies):
            break
    return outbound


class TestProtocol:
    def test_start_gives_initial_state(self):
        session = PlaySession(QUIET)
        replies = session.handle(json.dumps({"type": "start", "seed": 7}))
        assert len(replies) == 1
        msg = replies[0]
        assert msg["type"] == "state"
        assert msg["step"] == 0
        assert msg["done"] is False
        assert msg["status"] == "running"

    def test_action_without_episode(self):
        session = PlaySession(QUIET)
        replies = session.handle(json.dumps({"type": "action", "ax": 0.1, "ay": 0.0}))
        assert replies[0]["type"] == "error"
        assert replies[0]["code"] == "bad_state"

    def test_probe_only_at_step_zero(self):
        session = start_session()
        ok = session.handle(json.dumps({"type": "probe"}))
        assert ok[0]["type"] == "probe_result"
        session.handle(json.dumps({"type": "action", "ax": 0.1, "ay": 0.0}))
        denied = session.handle(json.dumps({"type": "probe"}))
        assert denied[0]["type"] == "error"
        assert denied[0]["code"] == "bad_state"

    def test_action_after_done(self):
        session = PlaySession(QUIET)
        play_episode(session)
        replies = session.handle(json.dumps({"type": "action", "ax": 0.0, "ay": 0.0}))
        assert replies[0]["type"] == "error"
        assert replies[0]["code"] == "bad_state"

    def test_double_start_rejected(self):
        session = start_session()
        replies = session.handle(json.dumps({"type": "start"}))
        assert replies[0]["type"] == "error"
        assert replies[0]["code"] == "bad_state"

    def test_malformed_messages(self):
        session = PlaySession(QUIET)
        for raw in ["not json", "[1,2,3]", json.dumps({"no_type": 1}), json.dumps({"type": "warp"})]:
            replies = session.handle(raw)
            assert replies[0]["type"] == "error"
            assert replies[0]["code"] == "bad_message"
        # Session survives malformed traffic.
        assert session.handle(json.dumps({"type": "start", "seed": 1}))[0]["type"] == "state"

    def test_action_requires_components(self):
        session = start_session()
        replies = session.handle(json.dumps({"type": "action", "ax": 0.5}))
        assert replies[0]["type"] == "error"
        assert replies[0]["code"] == "bad_message"

    def test_episode_completion_pushes_state_then_result(self):
        session = PlaySession(QUIET)
        outbound = play_episode(session)
        assert outbound[-1]["type"] == "result"
        assert outbound[-2]["type"] == "state"
        assert outbound[-2]["done"] is True
        assert outbound[-1]["success"] is True
        tally = session.handle(json.dumps({"type": "reset"}))
        assert tally[0] == {"v": 1, "type": "tally", "successes": 1, "attempts": 1}

    def test_reset_mid_episode_not_counted(self):
        session = start_session()
        session.handle(json.dumps({"type": "action", "ax": 0.1, "ay": 0.1}))
        tally = session.handle(json.dumps({"type": "reset"}))
        assert tally[0]["attempts"] == 0
        # A new episode can start afterwards.
        assert session.handle(json.dumps({"type": "start"}))[0]["type"] == "state"

    def test_seeded_start_is_reproducible(self):
        a = PlaySession(QUIET).handle(json.dumps({"type": "start", "seed": 42}))
        b = PlaySession(QUIET).handle(json.dumps({"type": "start", "seed": 42}))
        assert a == b


class TestInformationHiding:
    def test_every_outbound_passes_schema(self):
        session = PlaySession(QUIET)
        outbound = play_episode(session)
        outbound += session.handle(json.dumps({"type": "reset"}))
        outbound += session.handle(json.dumps({"type": "probe"}))
        for msg in outbound:
            validate_outbound(msg)
            blob = json.dumps(msg)
            for needle in ('"p_a"', '"p_b"', '"d_sim"', '"rig"', '"rotation"', '"translation"', '"p_star"', '"reward"'):
                assert needle not in blob

    def test_schema_rejects_extra_fields(self):
        with pytest.raises(SchemaViolation):
            validate_outbound(
                {"v": 1, "type": "result", "success": True, "steps": 3, "d_sim": 0.001}
            )
        with pytest.raises(SchemaViolation):
            validate_outbound({"v": 1, "type": "telemetry"})

    def test_state_message_is_image_space_only(self):
        session = start_session()
        msg = session.handle(json.dumps({"type": "probe"}))[0]
        for key in ("v_l1", "v_l2", "v_r1", "v_r2"):
            assert len(msg[key]) == 2


class TestSessionIsolation:
    def test_interleaved_sessions_independent(self):
        rng = np.random.default_rng(0)
        for trial in range(5):
            solo_a = PlaySession(QUIET)
            solo_b = PlaySession(QUIET)
            mixed_a = PlaySession(QUIET)
            mixed_b = PlaySession(QUIET)
            msgs_a = [json.dumps({"type": "start", "seed": 10 + trial}), json.dumps({"type": "probe"})] + [
                json.dumps({"type": "action", "ax": float(rng.uniform(-1, 1)), "ay": float(rng.uniform(-1, 1))})
                for _ in range(6)
            ]
            msgs_b = [json.dumps({"type": "start", "seed": 90 + trial}), json.dumps({"type": "probe"})] + [
                json.dumps({"type": "action", "ax": float(rng.uniform(-1, 1)), "ay": float(rng.uniform(-1, 1))})
                for _ in range(6)
            ]
            expected_a = [solo_a.handle(m) for m in msgs_a]
            expected_b = [solo_b.handle(m) for m in msgs_b]
            # Random interleaving preserving per-session order.
            queue = [("a", m) for m in msgs_a] + [("b", m) for m in msgs_b]
            order = rng.permutation(len(queue))
            ia = ib = 0
            got_a, got_b = [], []
            for _ in queue:
                pick_a = bool(rng.integers(0, 2)) if ia < len(msgs_a) and ib < len(msgs_b) else ia < len(msgs_a)
                if pick_a:
                    got_a.append(mixed_a.handle(msgs_a[ia]))
                    ia += 1
                else:
                    got_b.append(mixed_b.handle(msgs_b[ib]))
                    ib += 1
            assert got_a == expected_a
            assert got_b == expected_b


class TestSummary:
    def test_three_of_ten(self):
        session = PlaySession(QUIET)
        session.s.successes = 3
        session.s.attempts = 10
        summary = session_summary(session)
        assert summary["rate"] == pytest.approx(0.3)
        lo, hi = summary["wilson_95"]
        # Frozen from tests/_oracles.py wilson_interval(3, 10).
        assert lo == pytest.approx(0.10779126740630099, abs=1e-12)
        assert hi == pytest.approx(0.6032218525388546, abs=1e-12)

    def test_no_episodes(self):
        with pytest.raises(NoEpisodes):
            session_summary(PlaySession(QUIET))

    def test_perfect_score(self):
        session = PlaySession(QUIET)
        session.s.successes = 10
        session.s.attempts = 10
        assert session_summary(session)["rate"] == 1.0

    def test_summary_file(self, tmp_path):
        session = PlaySession(QUIET)
        play_episode(session)
        path = write_session_summary(session, tmp_path)
        data = json.loads(path.read_text())
        assert data["attempts"] == 1
        assert 0.0 <= data["rate"] <= 1.0
        assert any(e["event"] == "done" for e in data["log"])


def in_process_trajectory(seed: int) -> list[tuple]:
    """Reference episode: same op order as the wire protocol (create, observe,
    probe, steps), recording actions and per-step status."""
    cfg = EnvConfig(camera_mode="fc", seed=seed, obs_noise_std=0.0)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    state = create_env(cfg, rng)
    obs = observe(cfg, state, rng)
    probe = run_calibration_probe(cfg, state, rng)
    steps = []
    while state.status is Status.RUNNING:
        act = analytic_iml_action(probe, compute_residual(obs), 0.8, cfg.probe_scale, cfg.action_scale)
        res = step(cfg, state, act, rng)
        if res.obs is not None:
            obs = res.obs
        steps.append((act.ax, act.ay, res.status.value, state.step_count))
    return steps


async def drive_over_wire(port: int, seed: int, actions: list[tuple]) -> list[tuple]:
    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    await wire.client_handshake(reader, writer, f"127.0.0.1:{port}")

    async def ask(msg: dict) -> dict:
        await wire.send_text(writer, json.dumps(msg), mask=True)
        return json.loads(await wire.recv_text(reader, writer, mask_replies=True))

    observed = []
    first = await ask({"type": "start", "seed": seed})
    assert first["type"] == "state" and first["step"] == 0
    probe = await ask({"type": "probe"})
    assert probe["type"] == "probe_result"
    for ax, ay, _, _ in actions:
        reply = await ask({"type": "action", "ax": ax, "ay": ay})
        assert reply["type"] == "state"
        observed.append((ax, ay, reply["status"], reply["step"]))
        if reply["done"]:
            final = json.loads(await wire.recv_text(reader, writer, mask_replies=True))
            assert final["type"] == "result"
    await wire.send_close(writer, mask=True)
    writer.close()
    return observed


class TestWireEquivalence:
    def test_transcript_matches_in_process(self, unused_tcp_port=None):
        async def scenario():
            ready = asyncio.Event()
            server_cfg = EnvConfig(camera_mode="fc", seed=0, obs_noise_std=0.0)
            task = asyncio.create_task(serve(18431, server_cfg, "/tmp/stereoalign-test-play", ready=ready))
            await asyncio.wait_for(ready.wait(), 5)
            try:
                for seed in (3, 11):
                    reference = in_process_trajectory(seed)
                    observed = await drive_over_wire(18431, seed, reference)
                    assert observed == reference
            finally:
                task.cancel()
                try:
                    await task
                except asyncio.CancelledError:
                    pass

        asyncio.run(scenario())

    def test_concurrent_wire_sessions(self):
        async def scenario():
            ready = asyncio.Event()
            server_cfg = EnvConfig(camera_mode="fc", seed=0, obs_noise_std=0.0)
            task = asyncio.create_task(serve(18432, server_cfg, "/tmp/stereoalign-test-play", ready=ready))
            await asyncio.wait_for(ready.wait(), 5)
            try:
                ref_a = in_process_trajectory(5)
                ref_b = in_process_trajectory(8)
                got_a, got_b = await asyncio.gather(
                    drive_over_wire(18432, 5, ref_a), drive_over_wire(18432, 8, ref_b)
                )
                assert got_a == ref_a
                assert got_b == ref_b
            finally:
                task.cancel()
                try:
                    await task
                except asyncio.CancelledError:
                    pass

        asyncio.run(scenario())
