"""Offline replay of exported sessions through the library run loop.

A session driven via next/answer must be reproducible from its export alone:
re-proposing with the same seed yields the same pair sequence, and replaying
the answers yields the same parameters. Records imported at session creation
are replayed without proposals (no sampler draw happened for them).
"""

from __future__ import annotations

import csv
import io

import numpy as np

from ..data import ItemPool
from ..samplers import SamplerSpec
from .store import build_run


def _parse_items_csv(text: str) -> ItemPool:
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    has_score = header[-1] == "score"
    d = len(header) - (2 if has_score else 1)
    feats, scores = [], []
    for row in rows[1:]:
        if not row:
            continue
        feats.append([float(v) for v in row[1 : 1 + d]])
        if has_score:
            scores.append(float(row[1 + d]))
    return ItemPool(np.asarray(feats), np.asarray(scores) if has_score else None)


def _parse_history_csv(text: str) -> list[tuple[int, int, int]]:
    rows = list(csv.reader(io.StringIO(text)))
    return [(int(r[0]), int(r[1]), int(r[2])) for r in rows[1:] if r]


def replay_export(export: dict) -> dict:
    """Replay an export payload; returns the comparison of replay vs. export.

    The result carries ``pairs_match`` (proposal sequence identical),
    ``theta_max_diff`` (infinity norm between replayed and exported
    parameters), and the replayed pair list.
    """
    pool = _parse_items_csv(export["items_csv"])
    history = _parse_history_csv(export["history_csv"])
    sampler = SamplerSpec(
        export["sampler"]["kind"],
        export["sampler"]["posterior_samples"],
        export["sampler"]["candidate_cap"],
        export["sampler"]["confidence_width"],
    )
    comparisons = export.get("comparisons")
    run = build_run(
        pool,
        sampler,
        export["model_kind"],
        export["seed"],
        ridge=export["ridge"],
        reg_zeta=export["reg_zeta"],
        refit_stride=export["refit_stride"],
        budget=export["budget"],
        comparisons=None if comparisons is None else [tuple(c) for c in comparisons],
    )
    imported = int(export.get("imported", 0))
    pairs_match = True
    replayed_pairs = []
    for k, (i, j, c) in enumerate(history):
        if k >= imported:
            pair = run.propose()
            replayed_pairs.append(pair)
            if pair != (i, j):
                pairs_match = False
                break
        run.observe(i, j, c)

    checkpoint = export["checkpoint"]
    if export["model_kind"] == "trueskill":
        exported_params = np.asarray(checkpoint["mu"], dtype=float)
        replayed_params = run.model.mu
    else:
        exported_params = np.asarray(checkpoint["theta"], dtype=float)
        if export["model_kind"] == "hybrid":
            exported_params = np.concatenate(
                [exported_params, np.asarray(checkpoint["zeta"], dtype=float)]
            )
            replayed_params = np.concatenate([run.model.theta, run.model.zeta])
        elif export["model_kind"] == "bayes":
            replayed_params = run.model.theta_map
        else:
            replayed_params = run.model.theta
    theta_max_diff = (
        float(np.max(np.abs(replayed_params - exported_params))) if pairs_match else np.inf
    )
    return {
        "pairs_match": pairs_match,
        "theta_max_diff": theta_max_diff,
        "replayed_pairs": replayed_pairs,
        "steps": len(history),
    }


def verify_export(export: dict, tol: float = 1e-10) -> bool:
    result = replay_export(export)
    return result["pairs_match"] and result["theta_max_diff"] <= tol
