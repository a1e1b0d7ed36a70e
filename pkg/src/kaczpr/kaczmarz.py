"""Row-action iterations.

Two variants share one run loop:

* phaseless rows b = |a^* x|: each step keeps the phase of the current
  residual a^* z and projects onto the hyperplane where the chosen
  magnitude equation holds,
      z <- z - (1 - b / |a^* z|) * (a^* z / ||a||^2) * a;
* linear rows y = a^* x: the classical orthogonal projection
      z <- z + ((y - a^* z) / ||a||^2) * a.

Runs never halt early when the iterate leaves the trust ball; the first exit
step is recorded as the trace's stopping time and iteration continues, so a
single trace supports both the stopped and unstopped views of the process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .geometry import _dist_fast, as_cvector
from .rng import GENERATOR_ID, RngStream
from .sampling import Ensemble, Measurements


class Selection(Enum):
    NORM_WEIGHTED = "norm_weighted"
    UNIFORM = "uniform"


class ZeroResidualPolicy(Enum):
    """What to do when a^* z = 0 and the residual phase is undefined.

    PHASE_ONE adopts phase factor 1 and still lands on the solution
    hyperplane; SKIP leaves the iterate untouched.
    """

    PHASE_ONE = "phase_one"
    SKIP = "skip"


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int
    ball_radius_rel: float = 0.01
    track_distance: bool = True
    selection: Selection = Selection.NORM_WEIGHTED
    zero_residual_policy: ZeroResidualPolicy = ZeroResidualPolicy.PHASE_ONE

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not 0.0 <= self.ball_radius_rel <= 1.0:
            raise ValueError("ball_radius_rel must lie in [0, 1]")


@dataclass
class SolverTrace:
    """Per-iteration record of one run.

    ``rows[k]`` and ``abs_az[k]`` describe the step taken from iterate k;
    ``dist[k]`` is the error of iterate k itself (length max_iters + 1, None
    when no ground truth was supplied).  ``stopping_time`` is the first k
    whose iterate left the trust ball, or None when that never happened.
    """

    rows: np.ndarray
    abs_az: np.ndarray
    dist: np.ndarray | None
    stopping_time: int | None
    final: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return self.rows.shape[0]

    def exited(self) -> bool:
        return self.stopping_time is not None

    def to_csv(self, path) -> None:
        """Write `k,i_k,dist,abs_az`, one row per iteration plus the final state."""
        k_max = self.iterations
        lines = ["k,i_k,dist,abs_az"]
        for k in range(k_max):
            d = repr(float(self.dist[k])) if self.dist is not None else ""
            lines.append(f"{k},{self.rows[k]},{d},{repr(float(self.abs_az[k]))}")
        d = repr(float(self.dist[k_max])) if self.dist is not None else ""
        lines.append(f"{k_max},-1,{d},")
        Path(path).write_text("\n".join(lines) + "\n")

    def sidecar(self) -> dict:
        doc = {
            "generator": GENERATOR_ID,
            "stopping_time": self.stopping_time,
        }
        doc.update(self.meta)
        return doc

    def to_sidecar_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.sidecar(), sort_keys=True) + "\n")


def _cumulative_probs(ensemble: Ensemble, selection: Selection) -> np.ndarray:
    if selection is Selection.UNIFORM:
        weights = np.ones(ensemble.m)
    else:
        weights = ensemble.row_norms_sq
    total = weights.sum()
    if total <= 0:
        raise ValueError("ensemble has no rows with positive norm")
    return np.cumsum(weights / total)


def _indices_from_uniforms(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, cum.shape[0] - 1)


def select_row(ensemble: Ensemble, rng: RngStream, selection: Selection = Selection.NORM_WEIGHTED) -> int:
    """One random row index; norm-weighted picks j with P ~ ||a_j||^2."""
    if ensemble.m < 1:
        raise ValueError("ensemble is empty")
    cum = _cumulative_probs(ensemble, selection)
    u = rng.generator().random(1)
    return int(_indices_from_uniforms(cum, u)[0])


def select_rows(
    ensemble: Ensemble,
    rng: RngStream,
    count: int,
    selection: Selection = Selection.NORM_WEIGHTED,
) -> np.ndarray:
    """The length-`count` index sequence the run loop consumes.

    Entry 0 equals select_row(ensemble, rng, selection): both map the same
    uniform stream through the same cumulative-probability inversion.
    """
    if ensemble.m < 1:
        raise ValueError("ensemble is empty")
    cum = _cumulative_probs(ensemble, selection)
    u = rng.generator().random(count)
    return _indices_from_uniforms(cum, u)


def pr_step(
    z,
    a,
    b: float,
    policy: ZeroResidualPolicy = ZeroResidualPolicy.PHASE_ONE,
    row_norm_sq: float | None = None,
) -> np.ndarray:
    """One phaseless row update; afterwards |a^* z| = b up to roundoff."""
    z = as_cvector(z, "z")
    a = as_cvector(a, "a")
    if z.shape != a.shape:
        raise ValueError("dimension mismatch between z and a")
    if not np.isfinite(b) or b < 0:
        raise ValueError("b must be finite and nonnegative")
    if row_norm_sq is None:
        row_norm_sq = float(np.vdot(a, a).real)
    if row_norm_sq <= 0.0:
        raise ValueError("row a must be nonzero")
    s = np.vdot(a, z)
    mag = abs(s)
    if mag == 0.0:
        if policy is ZeroResidualPolicy.SKIP:
            return z.copy()
        return z + (b / row_norm_sq) * a
    return z - ((1.0 - b / mag) * s / row_norm_sq) * a


def linear_step(z, a, y: complex, row_norm_sq: float | None = None) -> np.ndarray:
    """Orthogonal projection onto {z : a^* z = y}."""
    z = as_cvector(z, "z")
    a = as_cvector(a, "a")
    if z.shape != a.shape:
        raise ValueError("dimension mismatch between z and a")
    if row_norm_sq is None:
        row_norm_sq = float(np.vdot(a, a).real)
    if row_norm_sq <= 0.0:
        raise ValueError("row a must be nonzero")
    return z + ((y - np.vdot(a, z)) / row_norm_sq) * a


def _trace_meta(ensemble: Ensemble, rng: RngStream, config: SolverConfig) -> dict:
    return {
        "seed": rng.seed,
        "stream_id": rng.stream_id,
        "m": ensemble.m,
        "n": ensemble.n,
        "model": ensemble.model.value,
        "max_iters": config.max_iters,
        "config": {
            "ball_radius_rel": config.ball_radius_rel,
            "track_distance": config.track_distance,
            "selection": config.selection.value,
            "zero_residual_policy": config.zero_residual_policy.value,
        },
    }


def run_pr(
    ensemble: Ensemble,
    b: Measurements,
    z0,
    config: SolverConfig,
    rng: RngStream,
    truth=None,
) -> SolverTrace:
    """Run the phaseless iteration for max_iters steps.

    With `truth` supplied the trace records dist(z_k, truth) for every
    iterate and the stopping time for the ball of relative radius
    config.ball_radius_rel around the solution circle.
    """
    z = as_cvector(z0, "z0").copy()
    if b.m != ensemble.m:
        raise ValueError("measurement count does not match ensemble")
    if z.shape[0] != ensemble.n:
        raise ValueError("z0 dimension does not match ensemble")
    if config.track_distance and truth is None:
        raise ValueError("track_distance requires a ground-truth vector")
    x = as_cvector(truth, "truth") if truth is not None else None
    if x is not None and x.shape[0] != ensemble.n:
        raise ValueError("truth dimension does not match ensemble")

    k_max = config.max_iters
    idx = select_rows(ensemble, rng, k_max, config.selection)
    rows = ensemble.rows
    norms_sq = ensemble.row_norms_sq
    rows_conj = rows.conj()
    bvals = b.values
    skip = config.zero_residual_policy is ZeroResidualPolicy.SKIP

    track = x is not None and config.track_distance
    dist_arr = np.empty(k_max + 1) if track else None
    abs_az = np.empty(k_max)
    radius = None
    stopping_time: int | None = None
    if x is not None:
        radius = config.ball_radius_rel * float(np.linalg.norm(x))

    for k in range(k_max):
        if track:
            d = _dist_fast(z, x)
            dist_arr[k] = d
            if stopping_time is None and d > radius:
                stopping_time = k
        j = idx[k]
        s = rows_conj[j] @ z
        mag = abs(s)
        abs_az[k] = mag
        if mag == 0.0:
            if not skip:
                z = z + (bvals[j] / norms_sq[j]) * rows[j]
        else:
            z = z - ((1.0 - bvals[j] / mag) * s / norms_sq[j]) * rows[j]
    if track:
        d = _dist_fast(z, x)
        dist_arr[k_max] = d
        if stopping_time is None and d > radius:
            stopping_time = k_max

    return SolverTrace(
        rows=idx.astype(np.int64),
        abs_az=abs_az,
        dist=dist_arr,
        stopping_time=stopping_time,
        final=z,
        meta=_trace_meta(ensemble, rng, config),
    )


def run_linear(
    ensemble: Ensemble,
    y,
    z0,
    config: SolverConfig,
    rng: RngStream,
    truth=None,
) -> SolverTrace:
    """Classical row-projection baseline on a linear system a_j^* z = y_j.

    The trace's dist column holds the plain error ||z_k - truth||.
    """
    z = as_cvector(z0, "z0").copy()
    y = np.asarray(y, dtype=np.complex128)
    if y.ndim != 1 or y.shape[0] != ensemble.m:
        raise ValueError("right-hand side must have one entry per row")
    if z.shape[0] != ensemble.n:
        raise ValueError("z0 dimension does not match ensemble")
    if config.track_distance and truth is None:
        raise ValueError("track_distance requires a ground-truth vector")
    x = as_cvector(truth, "truth") if truth is not None else None

    k_max = config.max_iters
    idx = select_rows(ensemble, rng, k_max, config.selection)
    rows = ensemble.rows
    rows_conj = rows.conj()
    norms_sq = ensemble.row_norms_sq

    track = x is not None and config.track_distance
    dist_arr = np.empty(k_max + 1) if track else None
    abs_az = np.empty(k_max)
    radius = config.ball_radius_rel * float(np.linalg.norm(x)) if x is not None else None
    stopping_time: int | None = None

    for k in range(k_max):
        if track:
            d = float(np.linalg.norm(z - x))
            dist_arr[k] = d
            if stopping_time is None and d > radius:
                stopping_time = k
        j = idx[k]
        s = rows_conj[j] @ z
        abs_az[k] = abs(s)
        z = z + ((y[j] - s) / norms_sq[j]) * rows[j]
    if track:
        d = float(np.linalg.norm(z - x))
        dist_arr[k_max] = d
        if stopping_time is None and d > radius:
            stopping_time = k_max

    return SolverTrace(
        rows=idx.astype(np.int64),
        abs_az=abs_az,
        dist=dist_arr,
        stopping_time=stopping_time,
        final=z,
        meta=_trace_meta(ensemble, rng, config),
    )
