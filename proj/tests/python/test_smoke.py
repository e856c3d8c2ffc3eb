import json
import math

import numpy as np
import pytest

import demoforge as df


def test_tasks_and_harness():
    assert df.task_names() == ["block-insertion", "place-red-in-green", "towers-of-hanoi", "stack-block-pyramid"]
    for task in df.task_names():
        report = df.harness(task, episodes=20, seed=3, workers=2)
        assert report["success_rate"] >= 0.95
    assert df.harness("towers-of-hanoi", episodes=5)["mean_steps"] == 7.0


def test_error_code():
    with pytest.raises(df.DemoforgeError) as info:
        df.Env("no-such-task")
    assert info.value.code == "UNKNOWN_TASK"


def test_env_pyramid_episode():
    env = df.Env("stack-block-pyramid", width=32, height=24)
    obs = env.reset(seed=11)
    assert obs["rgb"].shape == (24, 32, 3) and obs["rgb"].dtype == np.uint8
    assert obs["depth"].shape == (24, 32) and obs["depth"].dtype == np.float32
    rewards = []
    done = False
    while not done:
        pick, place = env.oracle_action()
        obs, reward, done, effective = env.step(pick, place)
        assert effective
        rewards.append(reward)
    assert env.success()
    assert len(rewards) == 6
    assert all(abs(r - 1 / 6) < 1e-12 for r in rewards)
    assert math.isclose(sum(rewards), 1.0, abs_tol=1e-9)


def test_spec_format_and_lint():
    text = df.builtin_spec("block-insertion")
    canonical = df.format_spec(text)
    assert df.format_spec(canonical) == canonical
    assert not [d for d in df.lint_spec(text) if d["severity"] == "error"]
    bad = df.lint_spec("(define (problem broken")
    assert any(d["severity"] == "error" for d in bad)


def test_generate_aggregate_container(tmp_path):
    reports = df.generate(tmp_path / "eps", ["stack-block-pyramid"], episodes=3, seed=42, width=32, height=24)
    assert reports[0]["successes"] == 3
    assert df.validate([tmp_path / "eps"])["accepted"] == 3
    out = tmp_path / "data.dfar"
    summary = df.aggregate([tmp_path / "eps"], out, "stack-block-pyramid", created_at="2024-01-01T00:00:00Z")
    assert summary["demos"] == 3 and summary["total_steps"] == 21
    c = df.read_container(out)
    for k in range(3):
        g = f"data/demo_{k}"
        assert c[g + "/rgb"].shape == (7, 24, 32, 3)
        assert c[g + "/depth"].shape == (7, 24, 32)
        assert c[g + "/rewards"].dtype == np.float32
        assert abs(float(c[g + "/rewards"].astype(np.float64).sum()) - 1.0) < 1e-6
        actions = json.loads(c[g + "/actions"])
        assert len(actions) == 7 and actions[-1] is None
    assert c["attrs/created_at"] == "2024-01-01T00:00:00Z"
    assert float(c["attrs/control_freq"]) == 20.0
    stats = df.container_stats(out)
    assert stats["episodes"] == 3 and stats["total_steps"] == 21


def planar_fk(links, q, base):
    x, y, yaw = base
    theta = yaw
    for length, angle in zip(links, q):
        theta += angle
        x += length * math.cos(theta)
        y += length * math.sin(theta)
    return x, y, math.atan2(math.sin(theta), math.cos(theta))


def test_forward_kinematics_matches_numpy():
    rng = np.random.default_rng(0)
    for _ in range(50):
        links = list(rng.uniform(0.05, 0.5, size=rng.integers(1, 6)))
        q = list(rng.uniform(-math.pi, math.pi, size=len(links)))
        base = tuple(rng.uniform(-0.5, 0.5, size=3))
        pose = df.forward_kinematics(links, q, base)
        x, y, yaw = planar_fk(links, q, base)
        assert abs(pose[0] - x) < 1e-12 and abs(pose[1] - y) < 1e-12
        assert pose[2] == 0 and pose[3] == 0 and pose[4] == 0
        assert abs(math.remainder(pose[5] - yaw, 2 * math.pi)) < 1e-12


def test_normalize_integrate():
    rng = np.random.default_rng(1)
    links = [0.3, 0.2, 0.1]
    q = np.cumsum(rng.uniform(-0.3, 0.3, size=(50, 3)), axis=0)
    grip = rng.integers(0, 2, size=50).astype(float)
    actions = df.normalize_trajectory(links, q.tolist(), grip.tolist())
    assert actions.shape == (49, 7)
    assert np.array_equal(actions[:, 6], grip[1:])
    end = df.integrate_actions(df.forward_kinematics(links, q[0].tolist()), actions.tolist())
    want = df.forward_kinematics(links, q[-1].tolist())
    assert max(abs(a - b) for a, b in zip(end[:5], want[:5])) < 1e-9
    assert abs(math.remainder(end[5] - want[5], 2 * math.pi)) < 1e-9


def test_mixture_frequencies():
    draws = df.sample_mixture([("a", 10), ("b", 20), ("c", 30)], [0.40, 0.25, 0.35], 10000, seed=42)
    counts = np.bincount([s for s, _ in draws], minlength=3) / 10000
    assert np.all(np.abs(counts - [0.40, 0.25, 0.35]) < 0.02)
    assert all(0 <= e < [10, 20, 30][s] for s, e in draws)
    assert draws == df.sample_mixture([("a", 10), ("b", 20), ("c", 30)], [0.40, 0.25, 0.35], 10000, seed=42)


def test_debounce_boundary():
    assert df.debounce([True] * 10)[-1] == "saved"
    assert df.debounce([True] * 9)[-1] == "debouncing"
    assert df.debounce([True] * 9 + [False])[-1] == "running"


def test_wire_protocol():
    msg = df.parse_client_message('{"type":"input","dpos":[1,0,-0.5],"drot":[0,0,0.25],"grip":"close"}')
    assert msg["dpos"] == [1, 0, -0.5] and msg["grip"] == "close"
    assert df.parse_client_message(df.serialize_message(msg)) == msg
    assert df.parse_client_message('{"type":"control","cmd":"reset"}') == {"type": "control", "cmd": "reset"}
    for bad in ["not json", '{"type":"input","dpos":[2,0,0],"drot":[0,0,0],"grip":"hold"}',
                '{"type":"control","cmd":"explode"}', '{"type":"frame"}']:
        with pytest.raises(df.DemoforgeError) as info:
            df.parse_client_message(bad)
        assert info.value.code == "BAD_MESSAGE"
