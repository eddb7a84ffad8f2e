"""Cost/accuracy sweep over the term count N.

Memory is counted, not sampled: the number of cached planes per forward is
exact by construction. Time is a wall-clock median.
"""

import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .activations import frac_act_backward, frac_act_forward
from .config import build_model
from .errors import DomainError, TrainingAborted
from .glcore import step_for_terms
from .nn import count_cached_planes, train
from .reporting import read_csv_table, write_csv

SWEEP_HEADER = ["N", "h", "best_acc", "epoch_seconds", "cached_planes", "rel_time", "rel_mem", "status"]
TIMING_COLUMNS = ("epoch_seconds", "rel_time")

__all__ = [
    "SweepRow",
    "SweepReport",
    "sweep_terms",
    "time_forward_backward",
    "count_cached_planes",
    "read_sweep_csv",
]


@dataclass
class SweepRow:
    N: int
    h: float
    best_acc: float | None = None
    epoch_seconds: float | None = None
    cached_planes: int | None = None
    rel_time: float | None = None
    rel_mem: float | None = None
    status: str = "ok"
    message: str = ""

    def as_list(self):
        return [self.N, self.h, self.best_acc, self.epoch_seconds, self.cached_planes, self.rel_time, self.rel_mem, self.status]


@dataclass
class SweepReport:
    rows: list = field(default_factory=list)
    time_slope: float | None = None
    time_residual: float | None = None
    mem_slope: float | None = None
    mem_residual: float | None = None

    @property
    def best_terms(self):
        ok = [r for r in self.rows if r.status == "ok"]
        if not ok:
            return None
        # ties go to the smaller (cheaper) N
        return max(ok, key=lambda r: (r.best_acc, -r.N)).N

    def write_csv(self, path):
        write_csv(path, SWEEP_HEADER, [r.as_list() for r in self.rows])


def read_sweep_csv(path):
    header, rows = read_csv_table(path)
    if header != SWEEP_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    out = []
    for r in rows:
        opt = lambda s, conv=float: conv(s) if s != "" else None  # noqa: E731
        out.append(
            SweepRow(int(r[0]), float(r[1]), opt(r[2]), opt(r[3]), opt(r[4], int), opt(r[5]), opt(r[6]), r[7])
        )
    return out


def _linear_fit(xs, ys):
    if len(xs) < 2:
        return None, None
    slope, icept = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)
    resid = np.asarray(ys, float) - (slope * np.asarray(xs, float) + icept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


def _exact_affine_fit(xs, ys):
    """Slope and max residual in exact rational arithmetic (ys are counts)."""
    if len(xs) < 2:
        return None, None
    slope = Fraction(ys[-1] - ys[0], xs[-1] - xs[0])
    resid = max(abs(Fraction(y) - (ys[0] + slope * (x - xs[0]))) for x, y in zip(xs, ys))
    return float(slope), float(resid)


def sweep_terms(base_config, N_list, dataset):
    """Train one seeded model per N (everything else fixed) and tabulate cost.

    ``dataset`` is a ``(train, test)`` pair. A run that aborts on NaN becomes a
    row with ``status="nan_abort"`` and empty measurement fields.
    """
    N_list = [int(n) for n in N_list]
    if not N_list:
        raise DomainError("N_list must be nonempty")
    if N_list != sorted(N_list) or len(set(N_list)) != len(N_list):
        raise DomainError("N_list must be strictly ascending")
    if not base_config.activation_spec().fractional:
        raise DomainError("sweeping N needs a fractional activation")
    train_set, test_set = dataset
    report = SweepReport()
    for N in N_list:
        cfg = base_config.with_terms(N)
        h = cfg.activation_spec().resolved_step
        model = build_model(cfg, train_set.dims, max(train_set.n_classes, test_set.n_classes))
        row = SweepRow(N=N, h=h)
        try:
            metrics = train(model, train_set, test_set, cfg.train)
        except TrainingAborted as exc:
            row.status = "nan_abort"
            row.message = str(exc)
        else:
            row.best_acc = float(metrics.best_test_acc)
            secs = metrics.epoch_seconds[1:]
            row.epoch_seconds = float(np.mean(secs)) if secs else 0.0
            row.cached_planes = count_cached_planes(model)
        report.rows.append(row)
    ok = [r for r in report.rows if r.status == "ok"]
    if ok:
        ref = ok[0]
        for r in ok:
            r.rel_mem = r.cached_planes / ref.cached_planes if ref.cached_planes else None
            r.rel_time = r.epoch_seconds / ref.epoch_seconds if ref.epoch_seconds else None
    report.time_slope, report.time_residual = _linear_fit([r.N for r in ok], [r.epoch_seconds for r in ok])
    report.mem_slope, report.mem_residual = _exact_affine_fit([r.N for r in ok], [r.cached_planes for r in ok])
    return report


def time_forward_backward(spec, input_size, repeats=5, seed=0):
    """Median seconds of one forward+backward on a fixed random batch.

    One warm-up call is made and discarded.
    """
    if repeats < 3:
        raise DomainError("repeats must be >= 3")
    rng = np.random.default_rng(seed)
    x = rng.normal(size=int(input_size))
    up = np.ones_like(x)

    def once():
        out, cache = frac_act_forward(spec, x)
        frac_act_backward(spec, cache, up)

    once()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        once()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def expected_planes(N_list, fractional_layers, other_layers=0):
    """Plane count formula: sum of N over fractional layers plus one per other activation."""
    return [fractional_layers * N + other_layers for N in N_list]


def step_rule_holds(report):
    return all(r.h == step_for_terms(r.N) for r in report.rows)
