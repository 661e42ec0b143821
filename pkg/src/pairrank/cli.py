"""Command-line interface.

``run``, ``aggregate``, and ``report`` drive seeded experiments locally and
emit CSV. ``serve`` starts the annotation service; the ``session`` commands
are thin HTTP clients against a running service.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import PairRankError


def _add_run_parser(sub) -> None:
    p = sub.add_parser("run", help="run a seeded experiment and write a trajectory CSV")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--scenario", help="synthetic-logistic | replay-pool | generalization-split | few-shot-add")
    p.add_argument("--sampler", help="guro | bayes-guro | bald | normmin | uniform | colstim | trueskill")
    p.add_argument("--model", help="contextual | bayes | hybrid | trueskill")
    p.add_argument("--budget", help="number of comparisons per seed")
    p.add_argument("--seeds", help="comma list; 'a-b' expands inclusively")
    p.add_argument("--eval-stride", dest="eval_stride")
    p.add_argument("--refit-stride", dest="refit_stride")
    p.add_argument("--n"), p.add_argument("--d")
    p.add_argument("--theta-range", dest="theta_range")
    p.add_argument("--noise")
    p.add_argument("--bound"), p.add_argument("--bound-eps", dest="bound_eps")
    p.add_argument("--items"), p.add_argument("--comparisons")
    p.add_argument("--holdout-fraction", dest="holdout_fraction")
    p.add_argument("--candidate-cap", dest="candidate_cap")
    p.add_argument("--posterior-samples", dest="posterior_samples")
    p.add_argument("--confidence-width", dest="confidence_width")
    p.add_argument("--initial-n", dest="initial_n"), p.add_argument("--add-at", dest="add_at")
    p.add_argument("--out", help="trajectory CSV path")


_RUN_KEYS = (
    "scenario", "sampler", "model", "budget", "seeds", "eval_stride", "refit_stride",
    "n", "d", "theta_range", "noise", "bound", "bound_eps", "items", "comparisons",
    "holdout_fraction", "candidate_cap", "posterior_samples", "confidence_width",
    "initial_n", "add_at", "out",
)


def _cmd_run(args) -> int:
    from .harness import build_config, load_config, run_experiment

    overrides = {key: getattr(args, key) for key in _RUN_KEYS if getattr(args, key) is not None}
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = build_config(overrides)
    out = run_experiment(cfg)
    print(f"wrote {out}")
    return 0


def _cmd_aggregate(args) -> int:
    from .harness import aggregate_runs, write_summary_csv

    summary = aggregate_runs(args.trajectories)
    write_summary_csv(summary, args.out)
    print(f"wrote {args.out} ({len(summary)} rows)")
    return 0


def _cmd_report(args) -> int:
    from .harness import emit_report, read_summary_csv

    summary = read_summary_csv(args.summary)
    aggregate_path, long_path = emit_report(summary, args.out_dir)
    print(f"wrote {aggregate_path} and {long_path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_dir, checkpoint_every=args.checkpoint_every)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _client(server: str):
    import httpx

    return httpx.Client(base_url=server.rstrip("/"), timeout=30.0)


def _cmd_session(args) -> int:
    if args.session_cmd == "verify":
        from .service.replay import replay_export

        export = json.loads(Path(args.export).read_text(encoding="utf-8"))
        result = replay_export(export)
        ok = result["pairs_match"] and result["theta_max_diff"] <= args.tol
        print(
            f"steps={result['steps']} pairs_match={result['pairs_match']} "
            f"theta_max_diff={result['theta_max_diff']:.3e} -> {'OK' if ok else 'MISMATCH'}"
        )
        return 0 if ok else 1

    with _client(args.server) as client:
        if args.session_cmd == "create":
            from .data import load_items_csv

            pool = load_items_csv(args.items)
            display = None
            if args.display:
                display = json.loads(Path(args.display).read_text(encoding="utf-8"))
            body = {
                "pool": {
                    "features": pool.features.tolist(),
                    "true_scores": None if pool.true_scores is None else pool.true_scores.tolist(),
                    "display": display,
                },
                "sampler": {"kind": args.sampler},
                "model": args.model,
                "seed": args.seed,
            }
            response = client.post("/sessions", json=body)
        elif args.session_cmd == "next":
            response = client.get(f"/sessions/{args.id}/next")
        elif args.session_cmd == "answer":
            i, j = (int(v) for v in args.pair.split(","))
            body = {"i": i, "j": j, "choice": args.choice}
            response = client.post(f"/sessions/{args.id}/answers", json=body)
        elif args.session_cmd == "ranking":
            response = client.get(f"/sessions/{args.id}/ranking")
        elif args.session_cmd == "export":
            response = client.get(f"/sessions/{args.id}/export")
        else:  # pragma: no cover
            raise ValueError(args.session_cmd)
        if response.status_code >= 400:
            print(f"error {response.status_code}: {response.text}", file=sys.stderr)
            return 1
        payload = response.json()
        if args.session_cmd == "export" and args.out:
            Path(args.out).write_text(json.dumps(payload), encoding="utf-8")
            print(f"wrote {args.out}")
        else:
            print(json.dumps(payload, indent=2))
        return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairrank")
    sub = parser.add_subparsers(dest="cmd", required=True)

    _add_run_parser(sub)

    p = sub.add_parser("aggregate", help="aggregate trajectory CSVs into a summary table")
    p.add_argument("trajectories", nargs="+")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="emit aggregate and plot-ready CSVs from a summary")
    p.add_argument("summary")
    p.add_argument("--out-dir", dest="out_dir", required=True)

    p = sub.add_parser("serve", help="start the annotation service")
    p.add_argument("--host", default=os.environ.get("PAIRRANK_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("PAIRRANK_PORT", "8000")))
    p.add_argument(
        "--data-dir", dest="data_dir", default=os.environ.get("PAIRRANK_DATA_DIR", "./sessions")
    )
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=25)

    p = sub.add_parser("session", help="thin client for a running service")
    ssub = p.add_subparsers(dest="session_cmd", required=True)

    c = ssub.add_parser("create")
    c.add_argument("--server", default="http://127.0.0.1:8000")
    c.add_argument("--items", required=True, help="items CSV")
    c.add_argument("--display", help="JSON file with per-item display payloads")
    c.add_argument("--sampler", default="guro")
    c.add_argument("--model", default="contextual")
    c.add_argument("--seed", type=int, default=0)

    for name in ("next", "ranking"):
        c = ssub.add_parser(name)
        c.add_argument("--server", default="http://127.0.0.1:8000")
        c.add_argument("--id", required=True)

    c = ssub.add_parser("answer")
    c.add_argument("--server", default="http://127.0.0.1:8000")
    c.add_argument("--id", required=True)
    c.add_argument("--pair", required=True, help="i,j as returned by next")
    c.add_argument("--choice", type=int, required=True, help="1 if the first item wins")

    c = ssub.add_parser("export")
    c.add_argument("--server", default="http://127.0.0.1:8000")
    c.add_argument("--id", required=True)
    c.add_argument("--out")

    c = ssub.add_parser("verify", help="replay an exported session offline")
    c.add_argument("export")
    c.add_argument("--tol", type=float, default=1e-10)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "aggregate": _cmd_aggregate,
        "report": _cmd_report,
        "serve": _cmd_serve,
        "session": _cmd_session,
    }
    try:
        return handlers[args.cmd](args)
    except PairRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
