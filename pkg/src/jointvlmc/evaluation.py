"""Monte-Carlo comparison of joint estimation against separate estimation.

The baseline fits one BIC tree per sample, then declares a context shared
when it appears in both trees and the chi-squared statistic of its two
conditional empirical distributions falls below a threshold.  The threshold
is tuned on the same replications to maximize the frequency of recovering
the exact true triple.

Replication ``r`` draws both samples from ``numpy.random.default_rng(base_seed + r)``
(PCG64), X first; every method and grid point sees the same samples.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .counts import build_count_trie, default_depth
from .estimators import (EstimationResult, JointPartition, fit_joint, fit_single,
                         kt_theta, ml_theta)
from .modelio import model_from_dict
from .scoring import PenaltyConfig, criterion
from .seqio import Alphabet
from .vlmc import ModelError, ProbabilisticContextTree, embed_markov, kl_rate, sample

METRICS = ("tau_x", "tau_y", "both", "sigma0", "sigma1", "sigma2")
COLUMNS = ("tau_X", "tau_Y", "tau_X and tau_Y", "sigma0", "sigma1", "sigma2", "KL_X", "KL_Y")

DEFAULT_THRESHOLDS = (0.0, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4, 12.8)
DEFAULT_LAMBDAS = (0.25, 0.5, 1.0, 2.0, 4.0)

BUNDLED = Path(__file__).parent / "data"


# --------------------------------------------------------------------------
# baseline

def chi2_stat(counts_x, counts_y) -> float:
    """Two-sample chi-squared homogeneity statistic of two count vectors."""
    cx = np.asarray(counts_x, dtype=np.float64)
    cy = np.asarray(counts_y, dtype=np.float64)
    nx, ny = cx.sum(), cy.sum()
    if nx <= 0 or ny <= 0:
        raise ValueError("chi-squared statistic needs positive totals on both sides")
    p = (cx + cy) / (nx + ny)
    keep = p > 0
    ex, ey = nx * p[keep], ny * p[keep]
    return float(np.sum((cx[keep] - ex) ** 2 / ex) + np.sum((cy[keep] - ey) ** 2 / ey))


def chi2_distance(counts_x, counts_y) -> float:
    """Symmetric chi-squared distance between the two normalized conditionals."""
    cx = np.asarray(counts_x, dtype=np.float64)
    cy = np.asarray(counts_y, dtype=np.float64)
    if cx.sum() <= 0 or cy.sum() <= 0:
        raise ValueError("chi-squared distance needs positive totals on both sides")
    p, q = cx / cx.sum(), cy / cy.sum()
    keep = (p + q) > 0
    return float(np.sum((p[keep] - q[keep]) ** 2 / (p[keep] + q[keep])))


STATISTICS = {"homogeneity": chi2_stat, "distance": chi2_distance}


def _shared_statistics(fx, fy, statistic) -> dict:
    """Statistic for every context present in both trees (inf if a side is empty)."""
    stat = STATISTICS[statistic]
    out = {}
    for s in set(fx.tree) & set(fy.tree):
        cx, cy = fx.counts[s], fy.counts[s]
        out[s] = stat(cx, cy) if cx.sum() > 0 and cy.sum() > 0 else math.inf
    return out


def _split_by_threshold(fx, fy, stats: dict, threshold: float) -> EstimationResult:
    s0 = frozenset(s for s, t in stats.items() if t < threshold)
    part = JointPartition(s0, frozenset(fx.tree) - s0, frozenset(fy.tree) - s0)
    return EstimationResult(part, dict(fx.counts), dict(fy.counts), math.nan)


def fit_separate_with_sharing(tx, ty, pen: PenaltyConfig = PenaltyConfig(),
                              threshold: float = 3.84, depth: int | None = None,
                              statistic: str = "homogeneity") -> EstimationResult:
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    fx = fit_single(tx, pen, depth)
    fy = fit_single(ty, pen, depth)
    res = _split_by_threshold(fx, fy, _shared_statistics(fx, fy, statistic), threshold)
    res.score = criterion(res.partition, tx, ty, pen)
    return res


# --------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    alphabet: Alphabet
    model_x: ProbabilisticContextTree
    model_y: ProbabilisticContextTree
    true_partition: JointPartition
    n: int
    m: int
    reps: int = 1000
    base_seed: int = 0
    lam: float = 1.0
    lambda_grid: tuple = DEFAULT_LAMBDAS
    threshold_grid: tuple = DEFAULT_THRESHOLDS
    depth: int | None = None
    kl_smoothing: str = "add-half"
    statistic: str = "homogeneity"
    name: str = "experiment"

    def __post_init__(self):
        if self.reps < 1 or self.n < 1 or self.m < 1:
            raise ValueError("reps, n and m must be >= 1")
        if not self.lambda_grid or not self.threshold_grid:
            raise ValueError("grids must be non-empty")
        if self.kl_smoothing not in ("add-half", "ml"):
            raise ValueError(f"unknown kl_smoothing {self.kl_smoothing!r}")
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")
        p = self.true_partition
        if set(p.tau1) != set(self.model_x.theta) or set(p.tau2) != set(self.model_y.theta):
            raise ValueError("true partition does not match the model trees")
        for s in p.sigma0:
            if not np.allclose(self.model_x.theta[s], self.model_y.theta[s], atol=1e-12):
                raise ValueError(f"shared context {s} has different distributions")

    @property
    def fit_depth(self) -> int:
        return self.depth if self.depth is not None else default_depth(self.n, self.m)

    def with_(self, **changes) -> "ExperimentConfig":
        from dataclasses import replace
        return replace(self, **changes)


def derive_partition(model_x, model_y) -> JointPartition:
    common = set(model_x.theta) & set(model_y.theta)
    s0 = {s for s in common if np.allclose(model_x.theta[s], model_y.theta[s], atol=1e-12)}
    return JointPartition(frozenset(s0), frozenset(set(model_x.theta) - s0),
                          frozenset(set(model_y.theta) - s0))


def config_from_dict(obj: dict) -> ExperimentConfig:
    mx = model_from_dict(obj["model_x"])
    my = model_from_dict(obj["model_y"])
    if mx.alphabet != my.alphabet:
        raise ModelError("model_x and model_y use different alphabets")
    alphabet = mx.alphabet
    model_x, model_y = mx.source(), my.source()
    if "true_partition" in obj:
        tp = obj["true_partition"]
        part = JointPartition.of(*(
            [alphabet.parse_context(c) for c in tp.get(key, [])]
            for key in ("sigma0", "sigma1", "sigma2")))
    else:
        part = derive_partition(model_x, model_y)
    seed = int(os.environ.get("VLMC_SEED", obj.get("base_seed", 0)))
    return ExperimentConfig(
        alphabet=alphabet, model_x=model_x, model_y=model_y, true_partition=part,
        n=int(obj["n"]), m=int(obj["m"]), reps=int(obj.get("reps", 1000)), base_seed=seed,
        lam=float(obj.get("lambda", 1.0)),
        lambda_grid=tuple(float(v) for v in obj.get("lambda_grid", DEFAULT_LAMBDAS)),
        threshold_grid=tuple(float(v) for v in obj.get("threshold_grid", DEFAULT_THRESHOLDS)),
        depth=obj.get("depth"), kl_smoothing=obj.get("kl_smoothing", "add-half"),
        statistic=obj.get("statistic", "homogeneity"), name=obj.get("name", "experiment"))


def load_config(path) -> ExperimentConfig:
    """Load a config file; bare names ``favorable``/``unfavorable`` select the bundled ones."""
    p = Path(path)
    if not p.exists() and (BUNDLED / f"{path}.json").exists():
        p = BUNDLED / f"{path}.json"
    return config_from_dict(json.loads(p.read_text(encoding="utf-8")))


# --------------------------------------------------------------------------
# one replication

def _flags(part: JointPartition, truth: JointPartition) -> np.ndarray:
    tx = part.tau1 == truth.tau1
    ty = part.tau2 == truth.tau2
    return np.array([tx, ty, tx and ty, part.sigma0 == truth.sigma0,
                     part.sigma1 == truth.sigma1, part.sigma2 == truth.sigma2], dtype=bool)


def fitted_sources(res: EstimationResult, k: int, smoothing: str):
    """The two fitted sources; None stands for a context without a distribution."""
    out = []
    for which in ("x", "y"):
        theta = res.source_theta(which, "ml" if smoothing == "ml" else "kt")
        if any(p is None for p in theta.values()):
            out.append(None)
        else:
            out.append(ProbabilisticContextTree(k, theta))
    return out


_EMBED_CACHE: dict = {}


def _model_key(model: ProbabilisticContextTree) -> tuple:
    return tuple(sorted((s, tuple(p)) for s, p in model.theta.items()))


def _kl_pair(cfg: ExperimentConfig, res: EstimationResult) -> tuple[float, float]:
    k = len(cfg.alphabet)
    qx, qy = fitted_sources(res, k, cfg.kl_smoothing)
    caches = _EMBED_CACHE.setdefault((_model_key(cfg.model_x), _model_key(cfg.model_y)),
                                     ({}, {}))
    kx = math.inf if qx is None else kl_rate(cfg.model_x, qx, caches[0])
    ky = math.inf if qy is None else kl_rate(cfg.model_y, qy, caches[1])
    return kx, ky


@dataclass
class Replication:
    rep: int
    seed: int
    lam: float
    joint_flags: np.ndarray
    joint_kl: tuple
    joint_partition: JointPartition
    sep_flags: np.ndarray | None = None        # (thresholds, metrics)
    sep_partition_ok: np.ndarray | None = None
    sep_kl: np.ndarray | None = None           # (thresholds, 2)
    sep_partitions: list | None = None


def replicate(cfg: ExperimentConfig, rep: int, lams=None, separate: bool = True) -> list:
    """Run replication ``rep`` for each penalty multiplier in ``lams``."""
    lams = (cfg.lam,) if lams is None else tuple(lams)
    seed = cfg.base_seed + rep
    rng = np.random.default_rng(seed)
    x = sample(cfg.model_x, cfg.n, rng)
    y = sample(cfg.model_y, cfg.m, rng)
    k = len(cfg.alphabet)
    depth = cfg.fit_depth
    tx = build_count_trie(x, depth, k)
    ty = build_count_trie(y, depth, k)
    truth = cfg.true_partition
    out = []
    for lam in lams:
        pen = PenaltyConfig(lam)
        joint = fit_joint(tx, ty, pen, depth)
        r = Replication(rep, seed, lam, _flags(joint.partition, truth), _kl_pair(cfg, joint),
                        joint.partition)
        if separate:
            fx, fy = fit_single(tx, pen, depth), fit_single(ty, pen, depth)
            stats = _shared_statistics(fx, fy, cfg.statistic)
            flags, kls, parts, cache = [], [], [], {}
            for t in cfg.threshold_grid:
                res = _split_by_threshold(fx, fy, stats, t)
                flags.append(_flags(res.partition, truth))
                if res.partition.sigma0 not in cache:
                    cache[res.partition.sigma0] = _kl_pair(cfg, res)
                kls.append(cache[res.partition.sigma0])
                parts.append(res.partition)
            r.sep_flags = np.array(flags)
            r.sep_partition_ok = np.array([p == truth for p in parts])
            r.sep_kl = np.array(kls)
            r.sep_partitions = parts
        out.append(r)
    return out


def _run_chunk(args):
    cfg, reps, lams, separate = args
    return [replicate(cfg, r, lams, separate) for r in reps]


def run_replications(cfg: ExperimentConfig, lams=None, separate: bool = True,
                     jobs: int = 1) -> list[list[Replication]]:
    """All replications in order; ``jobs`` only changes scheduling, never results."""
    reps = list(range(cfg.reps))
    if jobs <= 1:
        return [replicate(cfg, r, lams, separate) for r in reps]
    size = max(1, math.ceil(len(reps) / (4 * jobs)))
    chunks = [(cfg, reps[i:i + size], lams, separate) for i in range(0, len(reps), size)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return [r for chunk in pool.map(_run_chunk, chunks) for r in chunk]


# --------------------------------------------------------------------------
# aggregation

def margin(f: float, reps: int) -> float:
    return 1.96 * math.sqrt(f * (1 - f) / reps)


@dataclass
class MethodSummary:
    freq: dict
    partition: float
    kl_x: float
    kl_y: float
    kl_infinite: tuple = (0, 0)
    margin: dict = field(default_factory=dict)

    def row(self) -> list:
        return [self.freq[m] for m in METRICS] + [self.kl_x, self.kl_y]

    def to_dict(self) -> dict:
        return {"freq": dict(self.freq), "partition": self.partition, "margin": dict(self.margin),
                "kl_x": self.kl_x, "kl_y": self.kl_y, "kl_infinite": list(self.kl_infinite)}


def _summarize(flags: np.ndarray, partition_ok: np.ndarray, kl: np.ndarray) -> MethodSummary:
    reps = flags.shape[0]
    freq = {m: float(flags[:, i].mean()) for i, m in enumerate(METRICS)}
    finite = np.isfinite(kl)
    means = [float(kl[finite[:, j], j].mean()) if finite[:, j].any() else math.inf
             for j in range(2)]
    return MethodSummary(freq, float(partition_ok.mean()), means[0], means[1],
                         (int((~finite[:, 0]).sum()), int((~finite[:, 1]).sum())),
                         {m: margin(f, reps) for m, f in freq.items()})


def _tune(cfg: ExperimentConfig, runs: list[Replication]) -> tuple[int, np.ndarray]:
    ok = np.array([r.sep_partition_ok for r in runs])       # (reps, thresholds)
    curve = ok.mean(axis=0)
    best = max(range(len(cfg.threshold_grid)),
               key=lambda i: (curve[i], -cfg.threshold_grid[i]))
    return best, curve


def tune_threshold(cfg: ExperimentConfig, jobs: int = 1) -> tuple[float, float]:
    """Grid threshold maximizing exact-triple recovery of the baseline (ties: smallest)."""
    runs = [r[0] for r in run_replications(cfg, jobs=jobs)]
    i, curve = _tune(cfg, runs)
    return cfg.threshold_grid[i], float(curve[i])


@dataclass
class ExperimentReport:
    name: str
    n: int
    m: int
    reps: int
    base_seed: int
    lam: float
    depth: int
    kl_smoothing: str
    threshold: float
    threshold_curve: list
    methods: dict
    replications: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "m": self.m, "reps": self.reps,
                "base_seed": self.base_seed, "lambda": self.lam, "depth": self.depth,
                "kl_smoothing": self.kl_smoothing, "threshold": self.threshold,
                "threshold_curve": [[t, f] for t, f in self.threshold_curve],
                "methods": {k: v.to_dict() for k, v in self.methods.items()}}

    def to_json(self) -> str:
        return json.dumps(_round(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        return format_table(self.methods, title=(
            f"{self.name}: n={self.n} m={self.m} reps={self.reps} "
            f"lambda={self.lam:g} threshold={self.threshold:g}"))

    def write_csv(self, path, alphabet: Alphabet) -> None:
        def ctxs(ss):
            return " ".join(sorted(alphabet.format_context(s) or "e" for s in ss))
        ti = self.threshold_curve.index(next(c for c in self.threshold_curve
                                             if c[0] == self.threshold))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "seed", "method", *METRICS, "kl_x", "kl_y",
                        "sigma0", "sigma1", "sigma2"])
            for r in self.replications:
                rows = [("joint", r.joint_flags, r.joint_kl, r.joint_partition)]
                if r.sep_flags is not None:
                    rows.append(("separate", r.sep_flags[ti], tuple(r.sep_kl[ti]),
                                 r.sep_partitions[ti]))
                for method, flags, kl, part in rows:
                    w.writerow([r.rep, r.seed, method, *map(int, flags),
                                f"{kl[0]:.10g}", f"{kl[1]:.10g}", ctxs(part.sigma0),
                                ctxs(part.sigma1), ctxs(part.sigma2)])


def _round(obj):
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(f"{obj:.10g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def format_table(methods: dict, title: str = "") -> str:
    head = ["method", *COLUMNS]
    rows = []
    for name in ("separate", "joint"):
        if name not in methods:
            continue
        s = methods[name]
        cells = [f"{100 * v:.1f}%" for v in s.row()[:6]] + [f"{s.kl_x:.2e}", f"{s.kl_y:.2e}"]
        rows.append([name, *cells])
    widths = [max(len(r[i]) for r in [head, *rows]) for i in range(len(head))]
    lines = [title] if title else []
    lines.append("  ".join(h.rjust(w) for h, w in zip(head, widths)))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, keep_replications: bool = False
                   ) -> ExperimentReport:
    runs = [r[0] for r in run_replications(cfg, jobs=jobs)]
    joint = _summarize(np.array([r.joint_flags for r in runs]),
                       np.array([r.joint_partition == cfg.true_partition for r in runs]),
                       np.array([r.joint_kl for r in runs], dtype=np.float64))
    ti, curve = _tune(cfg, runs)
    sep = _summarize(np.array([r.sep_flags[ti] for r in runs]),
                     np.array([r.sep_partition_ok[ti] for r in runs]),
                     np.array([r.sep_kl[ti] for r in runs], dtype=np.float64))
    return ExperimentReport(
        cfg.name, cfg.n, cfg.m, cfg.reps, cfg.base_seed, cfg.lam, cfg.fit_depth,
        cfg.kl_smoothing, cfg.threshold_grid[ti],
        [(t, float(f)) for t, f in zip(cfg.threshold_grid, curve)],
        {"separate": sep, "joint": joint}, runs if keep_replications else [])


def sweep_lambda(cfg: ExperimentConfig, jobs: int = 1) -> list[tuple[float, float]]:
    """Joint exact-triple recovery frequency for each penalty multiplier."""
    runs = run_replications(cfg, lams=cfg.lambda_grid, separate=False, jobs=jobs)
    ok = np.array([[r.joint_partition == cfg.true_partition for r in rep] for rep in runs])
    return [(lam, float(f)) for lam, f in zip(cfg.lambda_grid, ok.mean(axis=0))]


def recovery_frequency(cfg: ExperimentConfig, jobs: int = 1) -> float:
    """Fraction of replications where the joint estimator returns the true triple."""
    runs = run_replications(cfg, separate=False, jobs=jobs)
    return float(np.mean([r[0].joint_partition == cfg.true_partition for r in runs]))
