"""Synthetic batch workloads for the speedup benchmark.

Each streamline is a randomly parametrised suction-zone helix sampled at
``pairs + 1`` uniform points; velocities are the tangents per segment
parameter so the interpolating splines follow the helix closely.
"""

from __future__ import annotations

import math

import numpy as np

from .batch import BatchJob, WorkItem
from .config import RunConfig
from .geometry import PolylineSample, make_helix
from .hermite import batch_interpolate


def helix_samples(m, pairs=100, seed=0, domain=(0.0, 4.0 * math.pi)):
    rng = np.random.default_rng(seed)
    s = np.linspace(domain[0], domain[1], pairs + 1)
    ds = s[1] - s[0]
    out = []
    for _ in range(m):
        a1 = rng.uniform(0.5, 1.5)
        a2 = rng.uniform(0.0, 0.1)
        a3 = rng.uniform(0.0, 0.2)
        a4 = rng.uniform(0.1, 0.5)
        curve = make_helix(a1, a2, a3, a4, domain)
        out.append(PolylineSample(curve.eval(s), ds * curve.deriv(s)))
    return out


def items_for(samples, kind, config=None):
    """Work items for ``samples``; solve jobs get their splines prebuilt."""
    config = config or RunConfig()
    splines = batch_interpolate(samples) if kind == "solve" else [None] * len(samples)
    common = dict(
        fluid=config.fluid(),
        pressure=config.pressure(),
        init=config.initial(),
        cfg=config.solver(),
        conv=config.convention,
        component=config.component,
    )
    return [
        WorkItem(sample=None if kind == "solve" else smp, spline=sp, **common)
        for smp, sp in zip(samples, splines)
    ]


def table_job(m, kind="interpolate", pairs=100, seed=0, config=None, samples=None):
    """``m`` streamlines of ``pairs`` segment pairs; ``samples`` are cycled if given."""
    if samples is None:
        samples = helix_samples(m, pairs, seed)
    else:
        samples = [samples[i % len(samples)] for i in range(m)]
    return BatchJob(items_for(samples, kind, config), kind)
