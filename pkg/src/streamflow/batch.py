"""Batches of independent streamline jobs under different execution strategies.

Three strategies are available:

``serial``
    everything in the calling thread;
``shared_pool(W)``
    one pool of ``W`` threads over the shared job data;
``partitioned(G, W_g)``
    ``G`` groups, each owning a private deep copy of its share of the data
    (made before any timing starts) and its own pool of ``W_g`` threads.
    Group results are merged only after every group has finished.

Work is assigned statically round-robin by streamline index.  Every item is
processed by the same code on the same data, so results are bitwise identical
across strategies.  The interpolation kernel releases the GIL.
"""

from __future__ import annotations

import copy
import logging
import os
import statistics
import time
import tracemalloc
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StreamflowError
from .hermite import HermiteSpline, batch_coefficients
from .ode import InitialConditions, ODESolution, SolverConfig, chain_solve

log = logging.getLogger(__name__)

JOB_KINDS = ("interpolate", "solve", "both")
MODES = ("serial", "shared_pool", "partitioned")

# Reference speedups from a two-processor, four-core machine; drawn next to
# fresh measurements in figures but never asserted (hardware-bound).
HISTORICAL_SPEEDUPS = {
    "interpolate": {
        "shared_pool(4)": {1: 0.7, 10: 0.9, 50: 1.3, 100: 1.85, 200: 2.7, 300: 3.15},
        "partitioned(2,2)": {1: 0.35, 10: 0.6, 50: 0.95, 100: 1.1, 200: 1.3, 300: 1.5},
    },
    "solve": {
        "shared_pool(4)": {1: 0.55, 10: 0.8, 50: 1.1, 100: 1.4, 200: 1.85, 300: 2.3},
        # no value at M = 300: that run exhausted memory
        "partitioned(2,2)": {1: 0.4, 10: 0.6, 50: 0.75, 100: 0.9, 200: 1.1, 300: None},
    },
}
TABLE_SIZES = (1, 10, 50, 100, 200, 300)


@dataclass(frozen=True)
class WorkItem:
    """One streamline: samples to interpolate and/or a spline to solve along."""

    sample: object = None
    spline: HermiteSpline | None = None
    fluid: object = None
    pressure: object = None
    init: InitialConditions | None = None
    cfg: SolverConfig | None = None
    conv: str = "pseudoinverse"
    component: int = 0


@dataclass(frozen=True)
class BatchJob:
    items: tuple
    kind: str = "interpolate"

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise DomainError("a batch job needs at least one streamline")
        if self.kind not in JOB_KINDS:
            raise DomainError(f"unknown job kind {self.kind!r}")

    @property
    def m(self):
        return len(self.items)


@dataclass(frozen=True)
class ExecutionStrategy:
    mode: str = "serial"
    workers: int = 1
    groups: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown strategy {self.mode!r}")
        if self.workers < 1 or self.groups < 1:
            raise DomainError("worker and group counts must be >= 1")
        if self.mode == "serial" and (self.workers, self.groups) != (1, 1):
            raise DomainError("serial strategy takes no worker counts")
        if self.mode == "shared_pool" and self.groups != 1:
            raise DomainError("shared_pool has a single group")

    @classmethod
    def serial(cls):
        return cls("serial")

    @classmethod
    def shared_pool(cls, workers):
        return cls("shared_pool", int(workers))

    @classmethod
    def partitioned(cls, groups, workers_per_group):
        return cls("partitioned", int(workers_per_group), int(groups))

    @classmethod
    def parse(cls, text):
        """``serial``, ``shared_pool:W`` or ``partitioned:G:W``."""
        parts = text.strip().split(":")
        try:
            if parts[0] == "serial" and len(parts) == 1:
                return cls.serial()
            if parts[0] == "shared_pool" and len(parts) == 2:
                return cls.shared_pool(int(parts[1]))
            if parts[0] == "partitioned" and len(parts) == 3:
                return cls.partitioned(int(parts[1]), int(parts[2]))
        except ValueError:
            pass
        raise DomainError(f"cannot parse strategy {text!r}; use serial, shared_pool:W or partitioned:G:W")

    @property
    def total_workers(self):
        return self.workers * self.groups

    @property
    def label(self):
        if self.mode == "serial":
            return "serial"
        if self.mode == "shared_pool":
            return f"shared_pool({self.workers})"
        return f"partitioned({self.groups},{self.workers})"


@dataclass(frozen=True)
class ItemFailure:
    """Stands in for the result of a streamline whose computation failed."""

    index: int
    error: str
    error_type: str
    s: float | None = None
    segment: int | None = None


def round_robin(indices, parts):
    return [list(indices[p::parts]) for p in range(parts)]


# -- per-slice processing --------------------------------------------------


def _interpolate_slice(items, indices, out):
    groups = {}
    for i in indices:
        smp = items[i].sample
        if smp is None:
            out[i] = ItemFailure(i, "no samples to interpolate", "SampleError")
            continue
        groups.setdefault((smp.n, smp.dim), []).append(i)
    for idx in groups.values():
        points = np.stack([items[i].sample.points for i in idx])
        vels = np.stack([items[i].sample.velocities for i in idx])
        coeffs, _ = batch_coefficients(points, vels)
        for j, i in enumerate(idx):
            out[i] = HermiteSpline(coeffs[j])


def _solve_one(item, spline, i):
    try:
        return chain_solve(
            spline,
            item.fluid,
            item.pressure,
            item.conv,
            item.init,
            item.cfg,
            component=item.component,
        )
    except StreamflowError as exc:
        return ItemFailure(i, str(exc), type(exc).__name__, getattr(exc, "s", None), getattr(exc, "segment", None))


def _process_slice(items, indices, kind, out):
    if kind in ("interpolate", "both"):
        _interpolate_slice(items, indices, out)
    if kind == "interpolate":
        return
    for i in indices:
        if kind == "both":
            spline = out[i]
            if isinstance(spline, ItemFailure):
                continue
            out[i] = (spline, _solve_one(items[i], spline, i))
        else:
            spline = items[i].spline
            if spline is None:
                out[i] = ItemFailure(i, "no spline to solve along", "SampleError")
            else:
                out[i] = _solve_one(items[i], spline, i)


@dataclass
class PreparedBatch:
    """A job split up for one strategy; partition copies are made here."""

    job: BatchJob
    strategy: ExecutionStrategy
    groups: list = field(default_factory=list)  # (indices, private item dict)


def prepare(job, strategy):
    prepared = PreparedBatch(job, strategy)
    if strategy.mode == "partitioned":
        all_idx = list(range(job.m))
        for idx in round_robin(all_idx, strategy.groups):
            private = {i: copy.deepcopy(job.items[i]) for i in idx}
            prepared.groups.append((idx, private))
    return prepared


def run_prepared(prepared):
    job, strat = prepared.job, prepared.strategy
    m = job.m
    if strat.mode == "serial":
        out = [None] * m
        _process_slice(job.items, list(range(m)), job.kind, out)
        return out
    if strat.mode == "shared_pool":
        out = [None] * m
        slices = [s for s in round_robin(list(range(m)), strat.workers) if s]
        with ThreadPoolExecutor(max_workers=strat.workers) as pool:
            futures = [pool.submit(_process_slice, job.items, s, job.kind, out) for s in slices]
            for fut in futures:
                fut.result()
        return out

    buffers = []
    pools = []
    futures = []
    try:
        for idx, private in prepared.groups:
            buf = {}
            buffers.append(buf)
            pool = ThreadPoolExecutor(max_workers=strat.workers)
            pools.append(pool)
            for sl in round_robin(idx, strat.workers):
                if sl:
                    futures.append(pool.submit(_process_slice, private, sl, job.kind, buf))
        for fut in futures:
            fut.result()
    finally:
        for pool in pools:
            pool.shutdown(wait=True)
    out = [None] * m
    for buf in buffers:
        for i, res in buf.items():
            out[i] = res
    return out


def solve_batch(job, strategy=None):
    """Results in input order; failed items are :class:`ItemFailure` entries."""
    return run_prepared(prepare(job, strategy or ExecutionStrategy.serial()))


def failures(results):
    """All item failures, including solve failures inside ``both`` results."""
    found = []
    for res in results:
        if isinstance(res, tuple):
            res = res[1]
        if isinstance(res, ItemFailure):
            found.append(res)
    return found


# -- determinism -----------------------------------------------------------


def _leaves(result):
    if isinstance(result, tuple):
        for part in result:
            yield from _leaves(part)
    elif isinstance(result, HermiteSpline):
        yield result.coeffs
    elif isinstance(result, ODESolution):
        yield from (result.s, result.u, result.udot, result.segment)
    elif isinstance(result, ItemFailure):
        yield repr(result)
    else:
        yield repr(result)


def first_divergence(a, b):
    """``None`` if two result streams are bitwise identical, else a description."""
    if len(a) != len(b):
        return {"index": None, "detail": f"result counts differ: {len(a)} vs {len(b)}"}
    for i, (ra, rb) in enumerate(zip(a, b)):
        la, lb = list(_leaves(ra)), list(_leaves(rb))
        if len(la) != len(lb):
            return {"index": i, "detail": "result structure differs"}
        for xa, xb in zip(la, lb):
            if isinstance(xa, str) or isinstance(xb, str):
                if xa != xb:
                    return {"index": i, "detail": f"{xa} != {xb}"}
                continue
            if xa.shape != xb.shape or xa.dtype != xb.dtype:
                return {"index": i, "detail": f"shape {xa.shape} vs {xb.shape}"}
            if xa.tobytes() != xb.tobytes():
                ba = xa.reshape(-1).view(np.uint8).reshape(xa.size, -1)
                bb = xb.reshape(-1).view(np.uint8).reshape(xb.size, -1)
                k = int(np.flatnonzero(np.any(ba != bb, axis=1))[0])
                return {
                    "index": i,
                    "position": k,
                    "detail": f"{xa.reshape(-1)[k]!r} != {xb.reshape(-1)[k]!r}",
                }
    return None


@dataclass(frozen=True)
class DeterminismReport:
    ok: bool
    reference: str
    strategy: str | None = None
    index: int | None = None
    detail: str | None = None


def verify_determinism(job, strategies):
    """Run ``job`` under every strategy and compare against the first one."""
    strategies = list(strategies)
    if len(strategies) < 2:
        raise DomainError("determinism check needs at least two strategies")
    ref = solve_batch(job, strategies[0])
    for strat in strategies[1:]:
        div = first_divergence(ref, solve_batch(job, strat))
        if div is not None:
            return DeterminismReport(False, strategies[0].label, strat.label, div["index"], div["detail"])
    return DeterminismReport(True, strategies[0].label)


# -- timing ----------------------------------------------------------------


def machine_descriptor():
    try:
        import psutil

        physical = psutil.cpu_count(logical=False)
    except ImportError:  # pragma: no cover
        physical = None
    return {"logical_cores": os.cpu_count(), "physical_cores": physical}


@dataclass(frozen=True)
class StrategyTiming:
    strategy: ExecutionStrategy
    elapsed: float  # median seconds
    samples: tuple
    speedup: float
    reliable: bool
    peak_kib: float | None = None

    @property
    def label(self):
        return self.strategy.label


@dataclass(frozen=True)
class SpeedupReport:
    kind: str
    m: int
    rows: tuple
    machine: dict
    timer_resolution: float

    def row(self, label):
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def _peak_memory(prepared):
    tracemalloc.start()
    try:
        run_prepared(prepared)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return peak / 1024.0


def measure_speedup(job, strategies, repeats=3, warmup=1, memory=True):
    """Median wall-clock time of the whole task per strategy, and ``T_serial / T``.

    A serial strategy must be among ``strategies``.  Partition copies are made
    before timing; thread start-up, distribution and collection are timed.
    """
    strategies = list(strategies)
    if not any(s.mode == "serial" for s in strategies):
        raise DomainError("measure_speedup needs the serial strategy as baseline")
    if repeats < 3:
        raise DomainError("at least three timed repetitions are required")
    resolution = time.get_clock_info("perf_counter").resolution
    timings = {}
    peaks = {}
    for strat in strategies:
        prepared = prepare(job, strat)
        for _ in range(warmup):
            run_prepared(prepared)
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            run_prepared(prepared)
            samples.append(time.perf_counter() - t0)
        timings[strat] = samples
        peaks[strat] = _peak_memory(prepared) if memory else None
    serial = next(s for s in strategies if s.mode == "serial")
    t_serial = statistics.median(timings[serial])
    rows = []
    for strat in strategies:
        med = statistics.median(timings[strat])
        reliable = med >= 100.0 * resolution and t_serial >= 100.0 * resolution
        if not reliable:
            log.warning("%s: elapsed %.3g s is below 100x timer resolution", strat.label, med)
        rows.append(StrategyTiming(strat, med, tuple(timings[strat]), t_serial / med, reliable, peaks[strat]))
    return SpeedupReport(job.kind, job.m, tuple(rows), machine_descriptor(), resolution)


def check_shared_beats_partitioned(report, shared="shared_pool(4)", partitioned="partitioned(2,2)"):
    """Expected ordering on one machine; logs a warning instead of failing."""
    try:
        s_sh, s_pa = report.row(shared).speedup, report.row(partitioned).speedup
    except KeyError:
        return None
    ok = s_sh >= s_pa
    if not ok:
        log.warning("expected %s (S=%.2f) >= %s (S=%.2f) at M=%d", shared, s_sh, partitioned, s_pa, report.m)
    return ok


def render_table(reports, strategies=None):
    """Console table laid out as M rows against strategy columns of speedups."""
    if not reports:
        return ""
    labels = strategies or [r.label for r in reports[0].rows if r.strategy.mode != "serial"]
    labels = labels or ["serial"]
    width = max(14, *(len(lbl) + 2 for lbl in labels))
    lines = [f"{'M':<6}" + "".join(f"{lbl:>{width}}" for lbl in labels)]
    for rep in reports:
        cells = []
        for lbl in labels:
            row = rep.row(lbl)
            mark = "" if row.reliable else "*"
            cells.append(f"{row.speedup:>{width - 1}.2f}{mark or ' '}")
        lines.append(f"{rep.m:<6}" + "".join(cells))
    return "\n".join(lines)
