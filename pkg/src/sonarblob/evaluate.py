"""Ground truth, per-scenario outcomes, detection/classification metrics and sweeps.

Clustering does not depend on the classification thresholds, so a sweep
runs the pipeline once per scenario and keeps compact per-cluster features
(:class:`ScenarioFeatures`). Any number of ``(eta_c, eta_h)`` pairs are then
scored from those features without reprocessing.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .classify import CLUTTER, TARGET, ClusterReport, decide_many
from .errors import ParameterError
from .graphbuild import AffinityParams
from .pipeline import BlockResult, DetectorConfig, cluster_cloud
from .signalproc import ChirpSpec, PointCloud, build_point_cloud
from .simulate import ScenarioConfig, SyntheticClutter, make_scenario, synth_block

GATE = 0.5

TRUE_DETECTION = "true_detection"
FALSE_ALARM = "false_alarm"
MISS = "miss"
CORRECT_REJECTION = "correct_rejection"


@dataclass(frozen=True)
class GroundTruth:
    """Target range per ping (index ``p - 1`` for ping ``p``) and the match gate."""

    path: np.ndarray
    gate: float = GATE

    def __post_init__(self):
        if self.gate <= 0:
            raise ParameterError("ground-truth gate must be positive")

    def range_at(self, ping):
        ping = np.asarray(ping)
        if np.any(ping < 1) or np.any(ping > len(self.path)):
            raise ParameterError("ping outside the ground-truth path")
        return np.asarray(self.path)[ping - 1]


def point_ground_truth(range_m: float, ping: int, truth: GroundTruth) -> str:
    return TARGET if abs(range_m - float(truth.range_at(ping))) < truth.gate else CLUTTER


def point_truth_mask(cloud: PointCloud, truth: GroundTruth | None) -> np.ndarray:
    """True for points within the gate of the target path."""
    if truth is None or len(cloud) == 0:
        return np.zeros(len(cloud), dtype=bool)
    return np.abs(cloud.ranges - truth.range_at(cloud.pings)) < truth.gate


@dataclass(frozen=True)
class ScenarioOutcome:
    has_target: bool
    detected: bool
    false_alarm: bool
    n_tp: int
    n_fp: int
    n_fn: int

    @property
    def events(self) -> frozenset[str]:
        ev = set()
        if self.has_target:
            ev.add(TRUE_DETECTION if self.detected else MISS)
        elif not self.false_alarm:
            ev.add(CORRECT_REJECTION)
        if self.false_alarm:
            ev.add(FALSE_ALARM)
        return frozenset(ev)


def _outcome(has_target, is_target, true_members, sizes, n_true_total):
    """Outcome from per-cluster decisions and member truth counts."""
    credited = is_target & (2 * true_members >= sizes) & (true_members > 0)
    spurious = is_target & ~credited
    n_tp = int(true_members[is_target].sum())
    n_fp = int((sizes - true_members)[is_target].sum())
    return ScenarioOutcome(
        has_target=bool(has_target),
        detected=bool(has_target and credited.any()),
        false_alarm=bool(spurious.any()),
        n_tp=n_tp,
        n_fp=n_fp,
        n_fn=int(n_true_total - n_tp),
    )


def scenario_detection(
    reports: Sequence[ClusterReport],
    cloud: PointCloud,
    truth: GroundTruth | None,
) -> ScenarioOutcome:
    """Score one block.

    A target-labelled cluster is credited to the true target when at least
    half of its members pass the ground-truth gate; any other
    target-labelled cluster is a false alarm. Without a target every
    target-labelled cluster is a false alarm.
    """
    mask = point_truth_mask(cloud, truth)
    is_target = np.array([r.label == TARGET for r in reports], dtype=bool)
    true_members = np.array([int(mask[r.member_indices].sum()) for r in reports], dtype=int)
    sizes = np.array([r.size for r in reports], dtype=int)
    return _outcome(truth is not None, is_target, true_members, sizes, int(mask.sum()))


def _rate(num: int, den: int) -> float:
    return num / den if den else float("nan")


@dataclass
class MetricsRow:
    p_d: float
    p_fa: float
    precision: float
    recall: float
    n_tp: int
    n_fp: int
    n_fn: int
    n_target_scenarios: int
    n_detected: int
    n_clutter_scenarios: int
    n_false_alarm: int
    params: dict = field(default_factory=dict)


def aggregate(outcomes: Iterable[ScenarioOutcome], **params) -> MetricsRow:
    """Pool scenario outcomes into rates; undefined rates are NaN."""
    n_t = n_det = n_c = n_fa = tp = fp = fn = 0
    for o in outcomes:
        if o.has_target:
            n_t += 1
            n_det += o.detected
        else:
            n_c += 1
            n_fa += o.false_alarm
        tp += o.n_tp
        fp += o.n_fp
        fn += o.n_fn
    return MetricsRow(
        p_d=_rate(n_det, n_t),
        p_fa=_rate(n_fa, n_c),
        precision=_rate(tp, tp + fp),
        recall=_rate(tp, tp + fn),
        n_tp=tp,
        n_fp=fp,
        n_fn=fn,
        n_target_scenarios=n_t,
        n_detected=n_det,
        n_clutter_scenarios=n_c,
        n_false_alarm=n_fa,
        params=dict(params),
    )


PARAM_COLUMNS = ("alpha", "beta", "tau", "scr_db", "valid_fraction", "eta_c", "eta_h")
METRIC_COLUMNS = tuple(f.name for f in fields(MetricsRow) if f.name != "params")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(float(x), ".10g")


@dataclass
class MetricsTable:
    rows: list[MetricsRow] = field(default_factory=list)
    master_seed: int | None = None

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        extra = sorted({k for r in self.rows for k in r.params} - set(PARAM_COLUMNS))
        columns = list(PARAM_COLUMNS) + extra + list(METRIC_COLUMNS)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for r in self.rows:
            values = {**r.params, **{k: getattr(r, k) for k in METRIC_COLUMNS}}
            writer.writerow([_fmt(values[c]) if c in values else "" for c in columns])
        return buf.getvalue()

    def write(self, path, metadata: dict | None = None) -> None:
        from .io import atomic_write_text

        atomic_write_text(path, self.to_csv())
        meta = {"master_seed": self.master_seed, "rows": len(self.rows), **(metadata or {})}
        atomic_write_text(str(path) + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")

    def select(self, **conditions) -> list[MetricsRow]:
        return [r for r in self.rows if all(np.isclose(r.params.get(k), v) for k, v in conditions.items())]


@dataclass(frozen=True)
class ScenarioFeatures:
    """Threshold-independent summary of one processed scenario."""

    seed: int
    has_target: bool
    n_points: int
    n_true: int
    connectivity: np.ndarray
    median_entropy: np.ndarray
    sizes: np.ndarray
    true_members: np.ndarray

    def outcome(self, eta_c: float, eta_h: float) -> ScenarioOutcome:
        is_target = decide_many(self.connectivity, self.median_entropy, eta_c, eta_h)
        return _outcome(self.has_target, is_target, self.true_members, self.sizes, self.n_true)

    @classmethod
    def from_result(cls, seed, result: BlockResult, truth: GroundTruth | None) -> "ScenarioFeatures":
        mask = point_truth_mask(result.cloud, truth)
        labels = result.clustering.labels
        K = result.clustering.K
        return cls(
            seed=int(seed),
            has_target=truth is not None,
            n_points=len(result.cloud),
            n_true=int(mask.sum()),
            connectivity=np.asarray(result.connectivity, dtype=float),
            median_entropy=np.asarray(result.median_entropy, dtype=float),
            sizes=np.bincount(labels, minlength=K).astype(int),
            true_members=np.bincount(labels, weights=mask, minlength=K).astype(int),
        )


@dataclass(frozen=True)
class SimulationSetup:
    """Fixed ingredients shared by every scenario of an experiment."""

    chirp: ChirpSpec = ChirpSpec()
    scenario: ScenarioConfig = ScenarioConfig()
    detector: DetectorConfig = DetectorConfig()
    gate: float = GATE
    clutter_rate: float = 250.0
    clutter_scale: float = 1.0
    clutter_noise_power: float = 0.05

    def clutter(self) -> SyntheticClutter:
        return SyntheticClutter(self.chirp, self.clutter_rate, self.clutter_scale, self.clutter_noise_power)


def scenario_seed(master_seed: int, kind: int, index: int) -> int:
    """Independent 63-bit seed for scenario ``index`` of a given kind."""
    return int(np.random.SeedSequence([master_seed, kind, index]).generate_state(2, np.uint64)[0] >> np.uint64(1))


TARGET_KIND, CLUTTER_KIND = 1, 2


def run_scenario(
    seed: int,
    has_target: bool,
    setup: SimulationSetup,
    params: AffinityParams,
    **scenario_changes,
) -> ScenarioFeatures:
    from dataclasses import replace

    config = replace(setup.scenario, **scenario_changes) if scenario_changes else setup.scenario
    scenario = make_scenario(seed, config, setup.chirp, has_target=has_target)
    pings = synth_block(scenario, setup.chirp, setup.clutter())
    cloud = build_point_cloud(pings, setup.chirp, setup.detector.eta_mf, setup.detector.n_bins)
    result = cluster_cloud(cloud, params, setup.detector)
    truth = GroundTruth(scenario.path, setup.gate) if has_target else None
    return ScenarioFeatures.from_result(seed, result, truth)


def _run_star(args):
    seed, has_target, setup, params, changes = args
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_scenario(seed, has_target, setup, params, **changes)


def run_scenarios(
    seeds: Sequence[int],
    has_target: bool,
    setup: SimulationSetup,
    params: AffinityParams,
    jobs: int = 1,
    **scenario_changes,
) -> list[ScenarioFeatures]:
    """Process many scenarios; output order follows ``seeds`` for any ``jobs``."""
    tasks = [(s, has_target, setup, params, scenario_changes) for s in seeds]
    if jobs <= 1 or len(tasks) < 2:
        return [_run_star(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_star, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def score(features: Iterable[ScenarioFeatures], eta_c: float, eta_h: float, **params) -> MetricsRow:
    return aggregate((f.outcome(eta_c, eta_h) for f in features), eta_c=eta_c, eta_h=eta_h, **params)


@dataclass(frozen=True)
class SweepGrid:
    scr_db: tuple[float, ...] = (-9.0,)
    valid_fraction: tuple[float, ...] = (1.0,)
    affinity: tuple[tuple[float, float, float], ...] = ((0.1, 1.0, 1.0),)
    eta_c: tuple[float, ...] = (20.0,)
    eta_h: tuple[float, ...] = (4.5,)
    n_target: int = 300
    n_clutter: int = 1000

    def __post_init__(self):
        for name in ("scr_db", "valid_fraction", "affinity", "eta_c", "eta_h"):
            if len(getattr(self, name)) == 0:
                raise ParameterError(f"grid axis {name!r} is empty")
        if self.n_target < 0 or self.n_clutter < 0:
            raise ParameterError("scenario counts must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepGrid":
        d = dict(d)
        for k in ("scr_db", "valid_fraction", "eta_c", "eta_h"):
            if k in d:
                d[k] = tuple(float(x) for x in np.atleast_1d(d[k]))
        if "affinity" in d:
            d["affinity"] = tuple(tuple(float(v) for v in a) for a in d["affinity"])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SweepFeatures:
    """Cached scenario features of a sweep, keyed by pipeline cell."""

    clutter: dict = field(default_factory=dict)
    target: dict = field(default_factory=dict)


def sweep_features(
    grid: SweepGrid,
    setup: SimulationSetup = SimulationSetup(),
    base_params: AffinityParams = AffinityParams(),
    master_seed: int = 0,
    jobs: int = 1,
) -> SweepFeatures:
    """Run the pipeline for every (affinity, scr, valid fraction) cell.

    Target scenario ``i`` uses the same seed in every cell, and clutter-only
    scenarios are shared by all SCR and valid-fraction cells.
    """
    from dataclasses import replace

    t_seeds = [scenario_seed(master_seed, TARGET_KIND, i) for i in range(grid.n_target)]
    c_seeds = [scenario_seed(master_seed, CLUTTER_KIND, i) for i in range(grid.n_clutter)]
    out = SweepFeatures()
    for abt in grid.affinity:
        params = replace(base_params, alpha=abt[0], beta=abt[1], tau=abt[2])
        out.clutter[abt] = run_scenarios(c_seeds, False, setup, params, jobs)
        for scr, vf in itertools.product(grid.scr_db, grid.valid_fraction):
            out.target[(abt, scr, vf)] = run_scenarios(
                t_seeds, True, setup, params, jobs, scr_db=scr, valid_fraction=vf
            )
    return out


def score_sweep(grid: SweepGrid, feats: SweepFeatures, master_seed: int | None = None) -> MetricsTable:
    rows = []
    for abt in grid.affinity:
        for scr, vf in itertools.product(grid.scr_db, grid.valid_fraction):
            scen = feats.target.get((abt, scr, vf), []) + feats.clutter.get(abt, [])
            for eta_c, eta_h in itertools.product(grid.eta_c, grid.eta_h):
                rows.append(
                    score(
                        scen, eta_c, eta_h,
                        alpha=abt[0], beta=abt[1], tau=abt[2], scr_db=scr, valid_fraction=vf,
                    )
                )
    return MetricsTable(rows, master_seed)


def sweep(
    grid: SweepGrid,
    setup: SimulationSetup = SimulationSetup(),
    base_params: AffinityParams = AffinityParams(),
    master_seed: int = 0,
    jobs: int = 1,
) -> MetricsTable:
    """One metrics row per grid cell, reproducible from ``master_seed``."""
    feats = sweep_features(grid, setup, base_params, master_seed, jobs)
    return score_sweep(grid, feats, master_seed)


def pd_at_pfa(rows: Sequence[MetricsRow], max_pfa: float) -> float:
    """Best detection probability among operating points with ``P_FA <= max_pfa``."""
    ok = [r.p_d for r in rows if not math.isnan(r.p_fa) and r.p_fa <= max_pfa and not math.isnan(r.p_d)]
    return max(ok) if ok else 0.0
