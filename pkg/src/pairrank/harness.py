"""Seeded experiment orchestration, aggregation, and report emission.

Configs are flat ``key = value`` text files with CLI flag overrides. One run
writes a trajectory CSV (bitwise deterministic for a given config) plus a
``<out>.meta.json`` sidecar carrying config echo and wall-clock timings;
timing lives in the sidecar so reruns stay byte-identical.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import t as student_t

from .bounds import BoundConstants, BoundResult, MarginSpec, oracle_margins, ordering_error_bound
from .data import ComparisonPool, ItemPool, load_dataset, split_generalization
from .engine import MODEL_KINDS, ActiveRun, check_compatible
from .errors import AlignmentError, NoEligiblePairsError, ValidationError
from .models import induced_ranking
from .rng import substream
from .samplers import SAMPLER_KINDS, SamplerSpec
from .simenv import LogisticAnnotator, ReplayAnnotator, kendall_tau_error, holdout_error

SCENARIOS = ("synthetic-logistic", "replay-pool", "generalization-split", "few-shot-add")

TRAJECTORY_COLUMNS = (
    "seed",
    "step",
    "pair_i",
    "pair_j",
    "ordering_error",
    "ordering_error_eval",
    "gen_gap",
    "holdout_error",
    "bound",
    "bound_approx",
    "bound_vacuous",
    "truncated",
)

SUMMARY_COLUMNS = ("algorithm", "metric", "step", "n", "mean", "sd", "ci_lo", "ci_hi")

REPORT_COLUMNS = ("step", "metric", "mean", "sd", "ci_lo", "ci_hi", "algorithm")

_AGGREGATED_METRICS = (
    "ordering_error",
    "ordering_error_eval",
    "gen_gap",
    "holdout_error",
    "bound",
    "bound_approx",
)


@dataclass
class TrajectoryRecord:
    """Metrics recorded at one evaluated step of one seeded run."""

    seed: int
    step: int
    pair_i: int
    pair_j: int
    ordering_error: float | None = None
    ordering_error_eval: float | None = None
    gen_gap: float | None = None
    holdout_error: float | None = None
    bound: float | None = None
    bound_approx: float | None = None
    bound_vacuous: bool | None = None
    truncated: bool = False
    wall_time: float | None = None  # kept out of the CSV; see module docstring


@dataclass
class ExperimentConfig:
    scenario: str = "synthetic-logistic"
    sampler: str = "guro"
    model: str = "contextual"
    budget: int = 100
    seeds: list[int] = field(default_factory=lambda: [0])
    eval_stride: int = 10
    refit_stride: int = 1
    ridge: float = 1.0
    reg_zeta: float = 1.0
    # synthetic instance parameters
    n: int = 100
    d: int = 10
    theta_range: float = 3.0
    noise: float = 0.5
    # sampler hyperparameters
    posterior_samples: int = 50
    candidate_cap: int | None = None
    confidence_width: float | None = None
    # bound diagnostics
    bound: bool = False
    bound_eps: float = 0.2
    # replay datasets
    items: str | None = None
    comparisons: str | None = None
    holdout_fraction: float = 0.1
    # few-shot item addition
    initial_n: int | None = None
    add_at: int | None = None
    out: str = "trajectory.csv"

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValidationError(
                f"unknown scenario '{self.scenario}'; valid: {', '.join(SCENARIOS)}"
            )
        if self.sampler not in SAMPLER_KINDS:
            raise ValidationError(
                f"unknown sampler '{self.sampler}'; valid: {', '.join(SAMPLER_KINDS)}"
            )
        if self.model not in MODEL_KINDS:
            raise ValidationError(
                f"unknown model '{self.model}'; valid: {', '.join(MODEL_KINDS)}"
            )
        check_compatible(self.sampler, self.model)
        if self.budget < 1:
            raise ValidationError("budget must be >= 1")
        if not self.seeds:
            raise ValidationError("need at least one seed")
        if self.eval_stride < 1 or self.refit_stride < 1:
            raise ValidationError("strides must be >= 1")
        if self.scenario == "replay-pool":
            if self.items is None or self.comparisons is None:
                raise ValidationError("replay scenario needs items and comparisons paths")
        if self.scenario == "few-shot-add":
            if self.initial_n is None or self.add_at is None:
                raise ValidationError("few-shot scenario needs initial_n and add_at")
            if not 2 <= self.initial_n < self.n:
                raise ValidationError("initial_n must be in [2, n)")
        if self.bound:
            if self.scenario == "replay-pool":
                raise ValidationError("bound diagnostics need a synthetic ground truth")
            if self.model not in ("contextual", "bayes"):
                raise ValidationError("bound diagnostics need a contextual or bayes model")
            if not 0.0 < self.bound_eps < 1.0:
                raise ValidationError("bound_eps must be in (0, 1)")

    def sampler_spec(self) -> SamplerSpec:
        return SamplerSpec(
            self.sampler, self.posterior_samples, self.candidate_cap, self.confidence_width
        )

    def label(self) -> str:
        return f"{self.sampler}:{self.model}"


_BOOL_KEYS = {"bound"}
_INT_KEYS = {
    "budget", "eval_stride", "refit_stride", "n", "d",
    "posterior_samples", "candidate_cap", "initial_n", "add_at",
}
_FLOAT_KEYS = {
    "ridge", "reg_zeta", "theta_range", "noise",
    "confidence_width", "bound_eps", "holdout_fraction",
}


def _parse_seeds(text: str) -> list[int]:
    """Comma list of seeds; 'a-b' expands to the inclusive range."""
    out: list[int] = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part and not part.startswith("-"):
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key] = val
    return values


def build_config(values: dict) -> ExperimentConfig:
    """Typed config from raw string values; unknown keys are rejected."""
    known = {f.name for f in fields(ExperimentConfig)}
    cfg = ExperimentConfig()
    for key, val in values.items():
        if key not in known:
            raise ValidationError(f"unknown config key '{key}'")
        if val is None or val == "":
            continue
        if key == "seeds":
            cfg.seeds = _parse_seeds(val) if isinstance(val, str) else list(val)
        elif key in _BOOL_KEYS:
            cfg.bound = str(val).lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS:
            setattr(cfg, key, int(val))
        elif key in _FLOAT_KEYS:
            setattr(cfg, key, float(val))
        else:
            setattr(cfg, key, str(val))
    cfg.validate()
    return cfg


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(values)


def _synthetic_instance(cfg: ExperimentConfig, seed: int) -> tuple[ItemPool, np.ndarray]:
    """Standard-normal features with a uniformly drawn true parameter.

    Redraws the parameter in the probability-zero event of an exact tie.
    """
    rng = substream(seed, "instance")
    features = rng.standard_normal((cfg.n, cfg.d))
    for _ in range(100):
        theta_star = rng.uniform(-cfg.theta_range, cfg.theta_range, cfg.d)
        diffs = features @ theta_star
        if len(np.unique(diffs)) == cfg.n:
            return ItemPool(features, diffs), theta_star
    raise ValidationError("could not draw a tie-free synthetic instance")


def _truth_ranking(pool: ItemPool) -> np.ndarray:
    return np.argsort(-pool.true_scores, kind="stable")


@dataclass
class _SeedRun:
    records: list[TrajectoryRecord]
    wall_time: float


def _run_seed(cfg: ExperimentConfig, seed: int) -> _SeedRun:
    started = time.perf_counter()
    eval_pool = None
    truth_eval = None
    replay = None
    holdout = None
    margins = None
    consts_base = None
    theta_eff = None
    pending_add = None

    if cfg.scenario == "replay-pool":
        holdout_seed = int(substream(seed, "holdout").integers(2**63))
        pool, comp_pool = load_dataset(
            cfg.items, cfg.comparisons, holdout_fraction=cfg.holdout_fraction, seed=holdout_seed
        )
        if comp_pool is None:
            raise ValidationError("replay scenario needs a comparisons file")
        replay = ReplayAnnotator(comp_pool, substream(seed, "annotator"))
        holdout = comp_pool.holdout
        annotator = None
        train_pool = pool
    else:
        full_pool, theta_star = _synthetic_instance(cfg, seed)
        theta_eff = cfg.noise * theta_star
        annotator = LogisticAnnotator(theta_star, cfg.noise, substream(seed, "annotator"))
        if cfg.scenario == "generalization-split":
            train_pool, eval_pool = split_generalization(full_pool, full_pool.true_scores)
            truth_eval = _truth_ranking(eval_pool)
        elif cfg.scenario == "few-shot-add":
            train_pool = ItemPool(
                full_pool.features[: cfg.initial_n], full_pool.true_scores[: cfg.initial_n]
            )
            pending_add = (
                full_pool.features[cfg.initial_n :],
                full_pool.true_scores[cfg.initial_n :],
            )
        else:
            train_pool = full_pool

    run = ActiveRun(
        train_pool,
        cfg.sampler_spec(),
        cfg.model,
        seed,
        ridge=cfg.ridge,
        reg_zeta=cfg.reg_zeta,
        refit_stride=cfg.refit_stride,
        budget=cfg.budget,
    )
    if replay is not None:
        run.set_eligibility(replay.eligible_mask)

    if cfg.bound:
        margins = oracle_margins(train_pool, theta_eff)
        consts_base = {
            "s_norm": float(np.linalg.norm(theta_eff)),
            "q_norm": float(np.max(np.linalg.norm(train_pool.features, axis=1))),
            "d": train_pool.d,
        }

    truth = _truth_ranking(train_pool) if train_pool.true_scores is not None else None

    def evaluate(step: int, pair: tuple[int, int], truncated: bool) -> TrajectoryRecord:
        rec = TrajectoryRecord(seed, step, pair[0], pair[1], truncated=truncated)
        if truth is not None:
            rec.ordering_error = kendall_tau_error(run.ranking(), truth)
        if eval_pool is not None:
            err_eval = kendall_tau_error(induced_ranking(run.model, eval_pool), truth_eval)
            rec.ordering_error_eval = err_eval
            rec.gen_gap = err_eval - rec.ordering_error
        if holdout:
            rec.holdout_error = holdout_error(run.model, run.pool, holdout)
        if cfg.bound:
            rec_bound = _bound_at(run, cfg, margins, consts_base, step)
            rec.bound = rec_bound.value
            rec.bound_approx = rec_bound.approx
            rec.bound_vacuous = rec_bound.vacuous
        return rec

    records: list[TrajectoryRecord] = []
    last_pair = (-1, -1)
    for step in range(1, cfg.budget + 1):
        if pending_add is not None and step == cfg.add_at:
            run.add_items(*pending_add)
            truth = _truth_ranking(run.pool)
            pending_add = None
        try:
            pair = run.propose()
        except NoEligiblePairsError:
            records.append(evaluate(step - 1, last_pair, truncated=True))
            break
        if annotator is not None:
            label = annotator.annotate(run.pool.features[pair[0]] - run.pool.features[pair[1]])
        else:
            label = replay.annotate(*pair)
        run.observe(pair[0], pair[1], label)
        last_pair = pair
        if step % cfg.eval_stride == 0 or step == cfg.budget:
            records.append(evaluate(step, pair, truncated=False))
    return _SeedRun(records, time.perf_counter() - started)


def _bound_at(
    run: ActiveRun, cfg: ExperimentConfig, margins: MarginSpec, base: dict, step: int
) -> BoundResult:
    """Theorem-style bound with the eigenvalue floor taken from the data."""
    h_tilde_min = float(np.linalg.eigvalsh(run.info.h / max(step, 1))[0])
    consts = BoundConstants(
        base["s_norm"], base["q_norm"], max(h_tilde_min, 1e-6), base["d"]
    )
    theta_t = run.model.theta if cfg.model == "contextual" else run.model.theta_map
    return ordering_error_bound(
        run.pool, theta_t, run.info, max(step, 1), cfg.bound_eps, consts, margins
    )


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def run_experiment(cfg: ExperimentConfig, out_path: str | Path | None = None) -> Path:
    """Run every seed and write the trajectory CSV (plus a timing sidecar)."""
    cfg.validate()
    out_path = Path(out_path if out_path is not None else cfg.out)
    results = [(seed, _run_seed(cfg, seed)) for seed in cfg.seeds]

    lines = [",".join(TRAJECTORY_COLUMNS)]
    for _, seed_run in results:
        for rec in seed_run.records:
            lines.append(
                ",".join(_format_cell(getattr(rec, col)) for col in TRAJECTORY_COLUMNS)
            )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    meta = {
        "algorithm": cfg.label(),
        "config": {f.name: getattr(cfg, f.name) for f in fields(ExperimentConfig)},
        "wall_time_per_seed": {str(seed): r.wall_time for seed, r in results},
    }
    Path(str(out_path) + ".meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    return out_path


def read_trajectory(path: str | Path) -> tuple[str, list[dict]]:
    """Read a trajectory CSV; the algorithm label comes from the sidecar."""
    path = Path(path)
    label = path.stem
    meta_path = Path(str(path) + ".meta.json")
    if meta_path.exists():
        label = json.loads(meta_path.read_text(encoding="utf-8")).get("algorithm", label)
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    if tuple(header) != TRAJECTORY_COLUMNS:
        raise ValidationError(f"unexpected trajectory columns in {path}")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        rows.append({col: cell for col, cell in zip(header, cells)})
    return label, rows


@dataclass
class SummaryRow:
    algorithm: str
    metric: str
    step: int
    n: int
    mean: float
    sd: float
    ci_lo: float
    ci_hi: float


def aggregate_runs(paths: list[str | Path]) -> list[SummaryRow]:
    """Per-step mean, sd, and 95% t-interval across seeds, aligned on step.

    Seeds within one algorithm must share the same step grid per metric.
    """
    grouped: dict[tuple[str, str], dict[int, dict[int, float]]] = {}
    for path in paths:
        label, rows = read_trajectory(path)
        for row in rows:
            seed = int(row["seed"])
            step = int(row["step"])
            for metric in _AGGREGATED_METRICS:
                cell = row[metric]
                if cell == "":
                    continue
                grouped.setdefault((label, metric), {}).setdefault(seed, {})[step] = float(cell)

    out: list[SummaryRow] = []
    for (label, metric), by_seed in sorted(grouped.items()):
        grids = {tuple(sorted(steps)) for steps in by_seed.values()}
        if len(grids) != 1:
            raise AlignmentError(f"misaligned step grids for {label}/{metric}")
        steps = sorted(next(iter(grids)))
        seeds = sorted(by_seed)
        for step in steps:
            values = np.array([by_seed[s][step] for s in seeds])
            k = len(values)
            mean = float(values.mean())
            if k == 1:
                sd, lo, hi = 0.0, mean, mean
            else:
                sd = float(values.std(ddof=1))
                half = float(student_t.ppf(0.975, k - 1)) * sd / np.sqrt(k)
                lo, hi = mean - half, mean + half
            out.append(SummaryRow(label, metric, step, k, mean, sd, lo, hi))
    return out


def write_summary_csv(summary: list[SummaryRow], path: str | Path) -> Path:
    path = Path(path)
    lines = [",".join(SUMMARY_COLUMNS)]
    for row in summary:
        lines.append(
            ",".join(_format_cell(getattr(row, col)) for col in SUMMARY_COLUMNS)
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_summary_csv(path: str | Path) -> list[SummaryRow]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split(",")) != SUMMARY_COLUMNS:
        raise ValidationError(f"unexpected summary columns in {path}")
    out = []
    for line in lines[1:]:
        cells = line.split(",")
        out.append(
            SummaryRow(
                cells[0], cells[1], int(cells[2]), int(cells[3]),
                float(cells[4]), float(cells[5]), float(cells[6]), float(cells[7]),
            )
        )
    return out


def emit_report(summary: list[SummaryRow], out_dir: str | Path) -> tuple[Path, Path]:
    """Write the aggregate CSV and a plot-ready long-format CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    aggregate_path = write_summary_csv(summary, out_dir / "aggregate.csv")
    long_lines = [",".join(REPORT_COLUMNS)]
    for row in summary:
        long_lines.append(
            ",".join(_format_cell(getattr(row, col)) for col in REPORT_COLUMNS)
        )
    long_path = out_dir / "plot_long.csv"
    long_path.write_text("\n".join(long_lines) + "\n", encoding="utf-8")
    return aggregate_path, long_path
