"""Python access to the risk-of-bias assessment core."""

import json
import os
from pathlib import Path

_packaged = Path(__file__).with_name("data")
if _packaged.is_dir() and not os.environ.get("ROB_DATA_DIR"):
    os.environ["ROB_DATA_DIR"] = str(_packaged)

from . import _core  # noqa: E402
from ._core import RobError, apply_gating, cohens_kappa, ingest_document, retrieve  # noqa: E402,F401

__all__ = [
    "RobError",
    "apply_gating",
    "assess",
    "cohens_kappa",
    "f1_scores",
    "ingest_document",
    "judge",
    "questionnaire",
    "retrieve",
]


def questionnaire():
    return json.loads(_core.questionnaire_json())


def judge(answers):
    """Domain and overall judgments for a {qid: answer} mapping, after gating."""
    return json.loads(_core.judge_json(answers))


def assess(document, model="stub-hash", mode="topk:3", retriever="dense", embed_dim=64):
    return json.loads(_core.assess_json(document, model, mode, retriever, embed_dim))


def f1_scores(qids, gold, pred):
    """gold/pred hold answers or three-class labels; None in pred counts as unanswered."""
    return json.loads(_core.f1_json(list(qids), list(gold), list(pred)))
