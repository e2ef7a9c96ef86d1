"""Replication runner: execute simulation grids, score estimators, emit artifacts.

A replication generates one primary/auxiliary pair, splits the primary
50/50 into training and test halves, runs the multi-study fit on the
training half plus the auxiliary study, and scores every estimator by the
root mean squared error of its effect predictions against the known
ground truth on the test half.

Replication seeds derive injectively from (master seed, scenario id,
replication index), so a study is reproducible as a whole, per scenario,
or per single replication, and its results are byte-identical no matter
how many worker processes execute it. The long-format results CSV is the
canonical artifact; the aggregate table and the box-plot SVG are derived
views.
"""

from __future__ import annotations

import csv
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .data import SplitSpec, split_train_test
from .forest import ForestConfig
from .causal import default_causal_config
from .mcf import EstimatorKind, fit_mcf, predict_all
from .seeding import derive_seed
from .simgen import SimScenario, generate_pair

LONG_CSV_COLUMNS = ("scenario", "estimator", "seed", "rho", "rmse")


def rmse(tau_hat, tau_true) -> float:
    """Root mean squared error between two equal-length vectors."""
    a = np.asarray(tau_hat, dtype=np.float64)
    b = np.asarray(tau_true, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors must have equal length")
    if a.size == 0:
        raise ValueError("rmse of empty vectors is undefined")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def desk_scale_configs(seed: int = 0) -> tuple[ForestConfig, ForestConfig]:
    """(causal, propensity) configs sized for quick desk runs."""
    return (default_causal_config(seed=seed, num_trees=500),
            ForestConfig(num_trees=200, min_node_size=10, seed=seed))


def full_scale_configs(seed: int = 0) -> tuple[ForestConfig, ForestConfig]:
    """(causal, propensity) configs at full study scale."""
    return (default_causal_config(seed=seed, num_trees=2000),
            ForestConfig(num_trees=500, min_node_size=10, seed=seed))


@dataclass
class ReplicationResult:
    scenario_id: str
    seed: int
    rep_index: int
    rho: float
    rmse: dict[EstimatorKind, float]
    wall_time: dict[str, float]


@dataclass
class FailedReplication:
    scenario_id: str
    seed: int
    rep_index: int
    error: str


def run_replication(scenario: SimScenario, seed: int, *,
                    causal_config: ForestConfig | None = None,
                    propensity_config: ForestConfig | None = None,
                    train_fraction: float = 0.5) -> ReplicationResult:
    """Generate, split, fit, predict and score one replication."""
    if causal_config is None:
        causal_config, default_prop = desk_scale_configs()
        if propensity_config is None:
            propensity_config = default_prop
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    pair = generate_pair(scenario, derive_seed(seed, "pair"))
    timings["generate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    train, test = split_train_test(pair.primary, SplitSpec(train_fraction, derive_seed(seed, "split")))
    timings["split"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fit = fit_mcf(train, pair.auxiliary,
                  causal_config.with_seed(derive_seed(seed, "forests")),
                  propensity_config=None if propensity_config is None
                  else propensity_config.with_seed(derive_seed(seed, "propensity")))
    timings["fit"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    predictions = predict_all(fit, test)
    scores = {kind: rmse(predictions[kind], test.tau_true) for kind in EstimatorKind}
    timings["predict"] = time.perf_counter() - t0

    return ReplicationResult(scenario_id=scenario.scenario_id, seed=seed, rep_index=-1,
                             rho=fit.rho, rmse=scores, wall_time=timings)


def _replication_task(args):
    scenario, seed, rep_index, causal_config, propensity_config, train_fraction = args
    try:
        result = run_replication(scenario, seed, causal_config=causal_config,
                                 propensity_config=propensity_config, train_fraction=train_fraction)
        result.rep_index = rep_index
        return result
    except Exception as exc:  # a failed replication is data, not an abort
        return FailedReplication(scenario_id=scenario.scenario_id, seed=seed,
                                 rep_index=rep_index, error=f"{type(exc).__name__}: {exc}")


@dataclass
class StudySummary:
    """All replication results of a study plus its failure log."""

    scenario_ids: list[str]
    n_reps: int
    master_seed: int
    results: list[ReplicationResult]
    failures: list[FailedReplication]

    def rmse_sample(self, scenario_id: str, kind: EstimatorKind) -> np.ndarray:
        """Per-replication RMSE values of one estimator in one scenario."""
        return np.array([r.rmse[kind] for r in self.results if r.scenario_id == scenario_id],
                        dtype=np.float64)

    def rho_sample(self, scenario_id: str) -> np.ndarray:
        return np.array([r.rho for r in self.results if r.scenario_id == scenario_id],
                        dtype=np.float64)

    def failure_count(self, scenario_id: str) -> int:
        return sum(1 for f in self.failures if f.scenario_id == scenario_id)

    def aggregate(self) -> list[dict]:
        """Per (scenario, estimator) summary rows, recomputed from the sample."""
        rows = []
        for sid in self.scenario_ids:
            rho = self.rho_sample(sid)
            for kind in EstimatorKind:
                sample = self.rmse_sample(sid, kind)
                if sample.size:
                    q1, med, q3 = np.quantile(sample, [0.25, 0.5, 0.75])
                    rows.append({
                        "scenario": sid, "estimator": kind.value, "n": int(sample.size),
                        "mean_rmse": float(sample.mean()), "median_rmse": float(med),
                        "q1_rmse": float(q1), "q3_rmse": float(q3),
                        "mean_rho": float(rho.mean()) if rho.size else float("nan"),
                        "failures": self.failure_count(sid),
                    })
                else:
                    rows.append({
                        "scenario": sid, "estimator": kind.value, "n": 0,
                        "mean_rmse": float("nan"), "median_rmse": float("nan"),
                        "q1_rmse": float("nan"), "q3_rmse": float("nan"),
                        "mean_rho": float("nan"), "failures": self.failure_count(sid),
                    })
        return rows


def run_study(scenarios, n_reps: int, master_seed: int = 0, parallelism: int = 1, *,
              causal_config: ForestConfig | None = None,
              propensity_config: ForestConfig | None = None,
              train_fraction: float = 0.5) -> StudySummary:
    """Run ``n_reps`` replications of every scenario.

    The MCF_THREADS environment variable, when set, overrides
    ``parallelism``. Results are identical for any parallelism degree.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    scenarios = list(scenarios)
    env = os.environ.get("MCF_THREADS")
    if env:
        parallelism = max(1, int(env))

    tasks = []
    for scenario in scenarios:
        sid = scenario.scenario_id
        for rep in range(n_reps):
            seed = derive_seed(master_seed, sid, rep)
            tasks.append((scenario, seed, rep, causal_config, propensity_config, train_fraction))

    if parallelism <= 1:
        outcomes = [_replication_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(_replication_task, tasks, chunksize=1))

    results = [o for o in outcomes if isinstance(o, ReplicationResult)]
    failures = [o for o in outcomes if isinstance(o, FailedReplication)]
    return StudySummary(scenario_ids=[s.scenario_id for s in scenarios], n_reps=n_reps,
                        master_seed=master_seed, results=results, failures=failures)


def _fmt(value: float) -> str:
    return repr(float(value))


def agg_csv_path(long_path) -> Path:
    long_path = Path(long_path)
    return long_path.with_name(long_path.stem + "_agg.csv")


def emit_csv(summary: StudySummary, path) -> Path:
    """Write the long-format results CSV plus the aggregate sibling file.

    Long columns: scenario, estimator, seed, rho, rmse (one row per
    replication and estimator, in scenario then replication order). Float
    cells use shortest round-trip formatting. Returns the long-file path.
    """
    if not summary.results and not summary.failures:
        raise ValueError("refusing to emit an empty study summary")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    order = {sid: i for i, sid in enumerate(summary.scenario_ids)}
    results = sorted(summary.results, key=lambda r: (order.get(r.scenario_id, len(order)), r.rep_index))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LONG_CSV_COLUMNS)
        for r in results:
            for kind in EstimatorKind:
                writer.writerow([r.scenario_id, kind.value, str(r.seed), _fmt(r.rho), _fmt(r.rmse[kind])])

    with open(agg_csv_path(path), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["scenario", "estimator", "n", "mean_rmse", "median_rmse",
                  "q1_rmse", "q3_rmse", "mean_rho", "failures"]
        writer.writerow(header)
        for row in summary.aggregate():
            writer.writerow([row["scenario"], row["estimator"], str(row["n"]),
                             _fmt(row["mean_rmse"]), _fmt(row["median_rmse"]),
                             _fmt(row["q1_rmse"]), _fmt(row["q3_rmse"]),
                             _fmt(row["mean_rho"]), str(row["failures"])])
    return path


def read_long_csv(path) -> StudySummary:
    """Reconstruct a summary from a long-format results CSV."""
    path = Path(path)
    by_kind = {k.value: k for k in EstimatorKind}
    grouped: dict[tuple[str, str], dict] = {}
    scenario_ids: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in LONG_CSV_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns: {', '.join(missing)}")
        for row in reader:
            sid = row["scenario"]
            if sid not in scenario_ids:
                scenario_ids.append(sid)
            key = (sid, row["seed"])
            entry = grouped.setdefault(key, {"rho": float(row["rho"]), "rmse": {}})
            entry["rmse"][by_kind[row["estimator"]]] = float(row["rmse"])

    results = []
    counters: dict[str, int] = {}
    for (sid, seed), entry in grouped.items():
        rep = counters.get(sid, 0)
        counters[sid] = rep + 1
        results.append(ReplicationResult(scenario_id=sid, seed=int(seed), rep_index=rep,
                                         rho=entry["rho"], rmse=entry["rmse"], wall_time={}))
    n_reps = max(counters.values()) if counters else 0
    return StudySummary(scenario_ids=scenario_ids, n_reps=n_reps, master_seed=-1,
                        results=results, failures=[])


# --- box-plot SVG -----------------------------------------------------------

_PANEL_W = 320
_PANEL_H = 240
_MARGIN_L = 52
_MARGIN_B = 58
_MARGIN_T = 30
_MARGIN_R = 12
_SHEET_PAD = 26


def _box_stats(sample: np.ndarray) -> dict:
    q1, med, q3 = np.quantile(sample, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_lim, hi_lim = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = sample[(sample >= lo_lim) & (sample <= hi_lim)]
    lo = inside.min() if inside.size else q1
    hi = inside.max() if inside.size else q3
    fliers = sample[(sample < lo_lim) | (sample > hi_lim)]
    return {"q1": q1, "median": med, "q3": q3, "lo": lo, "hi": hi, "fliers": fliers}


def _grid_position(scenario_id: str):
    """(row, col) on the magnitude x heterogeneity grid for canonical ids."""
    m = re.match(
        r"^(none|medium|high)-heterogeneity/(low|mid|high)/rho[0-9.]+/(?:diff|common)-ps$",
        scenario_id)
    if not m:
        return None
    het, mag = m.group(1), m.group(2)
    return ("low", "mid", "high").index(mag), ("none", "medium", "high").index(het)


def emit_boxplot_svg(summary: StudySummary, path) -> Path:
    """Render one RMSE box per estimator per scenario panel into a static SVG.

    Canonical scenarios land on a grid with heterogeneity level as columns
    and coefficient magnitude as rows; scenarios with custom names flow
    row-major below the grid.
    """
    if not summary.results:
        raise ValueError("refusing to plot an empty study summary")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    positions: dict[str, tuple[int, int]] = {}
    taken = set()
    flow = []
    for sid in summary.scenario_ids:
        pos = _grid_position(sid)
        if pos is None or pos in taken:
            flow.append(sid)
        else:
            positions[sid] = pos
            taken.add(pos)
    n_cols = 3 if positions else min(3, max(1, len(flow)))
    grid_rows = 1 + max(r for r, _ in positions.values()) if positions else 0
    for i, sid in enumerate(flow):
        positions[sid] = (grid_rows + i // n_cols, i % n_cols)
    total_rows = 1 + max(r for r, _ in positions.values())
    total_cols = 1 + max(c for _, c in positions.values())

    cell_w = _PANEL_W + _MARGIN_L + _MARGIN_R
    cell_h = _PANEL_H + _MARGIN_T + _MARGIN_B
    width = total_cols * cell_w + 2 * _SHEET_PAD
    height = total_rows * cell_h + 2 * _SHEET_PAD

    kinds = list(EstimatorKind)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
        '<style>.box{fill:#7db3d8;stroke:#1f4e6e;stroke-width:1}'
        '.median{stroke:#c23b22;stroke-width:2}.whisker{stroke:#1f4e6e;stroke-width:1}'
        '.flier{fill:none;stroke:#1f4e6e;stroke-width:0.8}.axis{stroke:#333;stroke-width:1}'
        '.tick{font-size:9px;fill:#333}.lab{font-size:9px;fill:#333}.title{font-size:11px;fill:#111}</style>',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]

    for sid in summary.scenario_ids:
        row, col = positions[sid]
        ox = _SHEET_PAD + col * cell_w + _MARGIN_L
        oy = _SHEET_PAD + row * cell_h + _MARGIN_T
        samples = {k: summary.rmse_sample(sid, k) for k in kinds}
        if all(s.size == 0 for s in samples.values()):
            continue
        stats = {k: _box_stats(s) for k, s in samples.items() if s.size}
        top = max(max(st["hi"], st["fliers"].max() if st["fliers"].size else 0.0)
                  for st in stats.values())
        y_max = top * 1.05 if top > 0 else 1.0

        def sy(v: float) -> float:
            return oy + _PANEL_H - (v / y_max) * _PANEL_H

        parts.append(f'<g class="panel" data-scenario={quoteattr(sid)}>')
        parts.append(f'<text class="title" x="{ox + _PANEL_W / 2:.1f}" y="{oy - 10:.1f}" '
                     f'text-anchor="middle">{escape(sid)}</text>')
        parts.append(f'<line class="axis" x1="{ox}" y1="{oy}" x2="{ox}" y2="{oy + _PANEL_H}"/>')
        parts.append(f'<line class="axis" x1="{ox}" y1="{oy + _PANEL_H}" '
                     f'x2="{ox + _PANEL_W}" y2="{oy + _PANEL_H}"/>')
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            v = frac * y_max
            parts.append(f'<line class="axis" x1="{ox - 3}" y1="{sy(v):.1f}" x2="{ox}" y2="{sy(v):.1f}"/>')
            parts.append(f'<text class="tick" x="{ox - 6}" y="{sy(v) + 3:.1f}" '
                         f'text-anchor="end">{v:.3g}</text>')

        slot = _PANEL_W / len(kinds)
        box_w = slot * 0.52
        for j, kind in enumerate(kinds):
            cx = ox + slot * (j + 0.5)
            label_y = oy + _PANEL_H + 12
            parts.append(f'<text class="lab" x="{cx:.1f}" y="{label_y:.1f}" text-anchor="end" '
                         f'transform="rotate(-38 {cx:.1f} {label_y:.1f})">{kind.label}</text>')
            if kind not in stats:
                continue
            st = stats[kind]
            x0 = cx - box_w / 2
            parts.append(f'<line class="whisker" x1="{cx:.1f}" y1="{sy(st["lo"]):.1f}" '
                         f'x2="{cx:.1f}" y2="{sy(st["q1"]):.1f}"/>')
            parts.append(f'<line class="whisker" x1="{cx:.1f}" y1="{sy(st["q3"]):.1f}" '
                         f'x2="{cx:.1f}" y2="{sy(st["hi"]):.1f}"/>')
            for v in (st["lo"], st["hi"]):
                parts.append(f'<line class="whisker" x1="{cx - box_w / 4:.1f}" y1="{sy(v):.1f}" '
                             f'x2="{cx + box_w / 4:.1f}" y2="{sy(v):.1f}"/>')
            parts.append(f'<rect class="box" x="{x0:.1f}" y="{sy(st["q3"]):.1f}" '
                         f'width="{box_w:.1f}" height="{max(sy(st["q1"]) - sy(st["q3"]), 0.5):.1f}"/>')
            parts.append(f'<line class="median" x1="{x0:.1f}" y1="{sy(st["median"]):.1f}" '
                         f'x2="{x0 + box_w:.1f}" y2="{sy(st["median"]):.1f}"/>')
            for v in st["fliers"]:
                parts.append(f'<circle class="flier" cx="{cx:.1f}" cy="{sy(float(v)):.1f}" r="2"/>')
        parts.append("</g>")

    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path
