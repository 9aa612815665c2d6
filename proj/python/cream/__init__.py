"""Python access to the pairwise engagement core."""
import json

from . import _core
from ._core import (
    CreamError,
    accuracy,
    approximate_randomization_p,
    assign_bucket,
    f1_positive,
    predict,
    render_compare_prompt,
    render_engaging_prompt,
    run_cli,
    train_model,
)


def build_pairs(tweets_path, timezone="America/New_York", seed=0):
    return json.loads(_core.build_pairs_json(str(tweets_path), timezone, seed))


def select_best_replay(candidates, scorer_replay_path):
    return json.loads(_core.select_best_replay(list(candidates), str(scorer_replay_path)))


def error_body(exc):
    """Decodes the {code, message, detail} payload carried by CreamError."""
    return json.loads(str(exc))


__all__ = [
    "CreamError",
    "accuracy",
    "approximate_randomization_p",
    "assign_bucket",
    "build_pairs",
    "error_body",
    "f1_positive",
    "predict",
    "render_compare_prompt",
    "render_engaging_prompt",
    "run_cli",
    "select_best_replay",
    "train_model",
]
