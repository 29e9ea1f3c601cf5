"""Shared builders for batch and acceptance tests."""

import math

import numpy as np

from streamflow.batch import BatchJob, WorkItem
from streamflow.geometry import PolylineSample, make_helix, make_tooth
from streamflow.ode import FluidProperties, InitialConditions, PressureModel, SolverConfig


def mixed_job(m=100, seed=7, step=5e-3):
    """Interpolate-and-solve job over helices and tooth flanks of varying size.

    Every tenth streamline has a stationary point and fails in the solver.
    """
    rng = np.random.default_rng(seed)
    items = []
    for i in range(m):
        n = int(rng.integers(6, 31))
        if i % 3 == 2:
            curve = make_tooth(rng.uniform(0.5, 1.5))
            lo, hi = curve.domain
            s = np.linspace(lo, hi - 0.05, n)
        else:
            curve = make_helix(rng.uniform(0.5, 1.5), rng.uniform(0, 0.1), rng.uniform(0, 0.2), rng.uniform(0.1, 0.5))
            s = np.linspace(0.0, rng.uniform(1.0, 4.0 * math.pi), n)
        pts = curve.eval(s)
        vel = (s[1] - s[0]) * curve.deriv(s)
        if i % 10 == 9:
            vel[n // 2] = 0.0
        items.append(
            WorkItem(
                sample=PolylineSample(pts, vel),
                fluid=FluidProperties(rng.uniform(0.0, 0.02), rng.uniform(1.0, 2.0)),
                pressure=PressureModel.linear(0.0, rng.uniform(-1.0, 1.0)),
                init=InitialConditions(0.0, 1.0, rng.uniform(-0.2, 0.2)),
                cfg=SolverConfig(("rk4", "adams_moulton_2", "bdf2")[i % 3], step),
            )
        )
    return BatchJob(items, "both")
