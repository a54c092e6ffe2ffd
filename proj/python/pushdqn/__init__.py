"""Pushing DQN: simulator, informed exploration and Q-learning from Python."""

import json as _json

from . import _core
from ._core import CheckpointError, GenerationFailure

__all__ = [
    "CheckpointError",
    "GenerationFailure",
    "Session",
    "action_distribution",
    "checkpoint_info",
    "evaluate",
    "make_scene",
    "parameter_count",
    "render",
    "step",
    "train",
]


def _dump(value):
    return "" if value is None else _json.dumps(value)


def make_scene(seed, n_obstacles, geometry=None):
    """Generates a scenario and returns its scene description."""
    return _json.loads(_core.make_scene(seed, n_obstacles, _dump(geometry)))


def step(scene, action):
    """Applies action 1..5; returns (scene, reward, status)."""
    text, reward, status = _core.step_scene(_json.dumps(scene), action)
    return _json.loads(text), reward, status


def render(scene, resolution=64):
    """Top-down RGB observation as a (H, W, 3) uint8 array."""
    return _core.render_scene(_json.dumps(scene), resolution)


def action_distribution(scene, explore=None):
    """Exploration probabilities of the five actions at the tool pose."""
    return _core.action_distribution(_json.dumps(scene), _dump(explore))


def train(config, out_dir, stop_after=0):
    """Runs training and returns a summary with the evaluations."""
    return _json.loads(_core.train(_dump(config), str(out_dir), stop_after))


def evaluate(checkpoint, n_scenes, n_obstacles, seed=0, config=None):
    """Greedy evaluation of a checkpoint on held-out scenes."""
    return _json.loads(
        _core.evaluate_checkpoint(
            str(checkpoint), n_scenes, n_obstacles, seed, _dump(config)
        )
    )


def checkpoint_info(path):
    return _json.loads(_core.checkpoint_info(str(path)))


def parameter_count(resolution=64):
    return _core.parameter_count(resolution)


class Session:
    """In-process session service speaking the wire protocol."""

    def __init__(self, geometry=None, default_checkpoint=""):
        self._manager = _core.SessionManager(_dump(geometry), default_checkpoint)

    def request(self, message):
        return _json.loads(self._manager.handle(_json.dumps(message)))

    def finished_episodes(self):
        return [_json.loads(line) for line in self._manager.take_log().splitlines()]
