"""Finite-size simulation of the deep ReLU feasibility problem.

For a sampled network the question is whether some unit input ``x`` leaves
fewer than ``threshold`` positive coordinates in the final pre-activation
(``threshold = n`` for weak, ``2n`` for strong injectivity).  The count is
minimised heuristically with a smoothed surrogate, so the answer is one-sided:
a witness proves feasibility, failing to find one proves nothing.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.special import expit

from .objective import InjectivityMode

WORKERS_ENV = "RELUINJ_WORKERS"


@dataclass(frozen=True)
class SampledNetwork:
    n: int
    layer_dims: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    seed: int

    @property
    def layers(self):
        return len(self.layer_dims)

    @property
    def output_scale(self):
        """Typical size of a final pre-activation coordinate for a unit input."""
        dims = (self.n,) + self.layer_dims
        return float(np.sqrt(np.prod([d / 2.0 for d in dims[1:-1]])))


def layer_dims(n, alphas):
    return tuple(max(1, int(round(a * n))) for a in alphas)


def sample_network(n, alphas, seed):
    """Draw iid standard normal weights for dimensions ``round(alpha_i * n)``."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    dims = layer_dims(n, alphas)
    rng = np.random.default_rng(seed)
    prev = n
    weights = []
    for m in dims:
        weights.append(rng.standard_normal((m, prev)))
        prev = m
    return SampledNetwork(n=n, layer_dims=dims, weights=tuple(weights), seed=seed)


def forward(net, x):
    """Final-layer pre-activation ``A_l relu(... relu(A_1 x))`` for a unit ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.n,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.n},)")
    if abs(np.linalg.norm(x) - 1.0) > 1e-10:
        raise ValueError("input must lie on the unit sphere")
    return _forward(net.weights, x)[-1]


def _forward(weights, x):
    pre = [weights[0] @ x]
    for A in weights[1:]:
        pre.append(A @ np.maximum(pre[-1], 0.0))
    return pre


def positive_count(t):
    return int(np.count_nonzero(np.asarray(t) > 0))


@dataclass(frozen=True)
class AnnealSchedule:
    """Sharpness schedule for the sigmoid surrogate of the positive count."""

    eps_start: float = 1.0
    eps_end: float = 1e-3
    stages: int = 20
    steps_per_stage: int = 200
    initial_step: float = 0.5
    min_step: float = 1e-10

    def epsilons(self):
        return np.geomspace(self.eps_start, self.eps_end, self.stages)


@dataclass
class McOutcome:
    min_positive_count: int
    threshold: int
    feasible_witness_found: bool
    restarts_used: int
    trajectory: List[int] = field(default_factory=list)
    witness: np.ndarray = None


def _surrogate(weights, x, scale):
    pre = _forward(weights, x)
    s = expit(pre[-1] / scale)
    value = s.sum()
    grad = weights[-1].T @ (s * (1.0 - s) / scale)
    for k in range(len(weights) - 2, -1, -1):
        grad = grad * (pre[k] > 0)
        grad = weights[k].T @ grad
    return value, grad, positive_count(pre[-1])


def _descend(net, x, schedule):
    """Projected gradient descent on the sphere through the annealing stages."""
    base = net.output_scale
    best_x, best_count = x.copy(), positive_count(_forward(net.weights, x)[-1])
    step = schedule.initial_step
    for eps in schedule.epsilons():
        scale = eps * base
        value, grad, count = _surrogate(net.weights, x, scale)
        for _ in range(schedule.steps_per_stage):
            tang = grad - np.dot(grad, x) * x
            gnorm2 = float(np.dot(tang, tang))
            if gnorm2 == 0.0:
                break
            step = min(2.0 * step, 1.0)
            while step > schedule.min_step:
                cand = x - step * tang / np.sqrt(gnorm2)
                cand /= np.linalg.norm(cand)
                cval, cgrad, ccount = _surrogate(net.weights, cand, scale)
                if cval <= value - 1e-4 * step * np.sqrt(gnorm2):
                    break
                step *= 0.5
            else:
                break
            x, value, grad, count = cand, cval, cgrad, ccount
            if count < best_count:
                best_x, best_count = x.copy(), count
    return best_x, best_count


def rfp_minimize(net, mode=InjectivityMode.WEAK, restarts=4, schedule=None, seed=0, stop_at_witness=True):
    """Heuristically minimise the number of positive final outputs over the sphere."""
    mode = InjectivityMode.parse(mode)
    schedule = schedule or AnnealSchedule()
    rng = np.random.default_rng(seed)
    threshold = mode.threshold_factor * net.n
    best_count, best_x = None, None
    trajectory = []
    used = 0
    for _ in range(max(1, int(restarts))):
        used += 1
        x0 = rng.standard_normal(net.n)
        x0 /= np.linalg.norm(x0)
        x, count = _descend(net, x0, schedule)
        if best_count is None or count < best_count:
            best_count, best_x = count, x
        trajectory.append(best_count)
        if stop_at_witness and best_count < threshold:
            break
    # report the hard count at the returned point itself
    best_count = positive_count(forward(net, best_x))
    return McOutcome(min_positive_count=best_count, threshold=threshold,
                     feasible_witness_found=best_count < threshold, restarts_used=used,
                     trajectory=trajectory, witness=best_x)


@dataclass(frozen=True)
class SweepRow:
    alpha_l: float
    trials: int
    witnesses: int

    @property
    def frequency(self):
        return self.witnesses / self.trials if self.trials else float("nan")

    def to_dict(self):
        return {"alpha_l": self.alpha_l, "trials": self.trials, "witnesses": self.witnesses,
                "frequency": self.frequency}


def _trial_seeds(seed, k, t):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(k), int(t)))
    net_seed, opt_seed = ss.generate_state(2, dtype=np.uint64)
    return int(net_seed), int(opt_seed)


def _run_trial(args):
    n, alphas, mode, seed, k, t, restarts, schedule = args
    net_seed, opt_seed = _trial_seeds(seed, k, t)
    net = sample_network(n, alphas, net_seed)
    return rfp_minimize(net, mode, restarts, schedule, opt_seed).feasible_witness_found


def worker_count(requested=None):
    cap = os.environ.get(WORKERS_ENV)
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, int(n))


def phase_sweep(n, prefix_alphas, alpha_grid, mode=InjectivityMode.WEAK, trials=50, seed=0, restarts=4,
                schedule=None, workers=1):
    """Empirical feasibility-witness frequency for each last-layer expansion.

    Every (grid point, trial) pair draws its own seed from ``seed``, so the
    table does not depend on ``workers`` or execution order.
    """
    mode = InjectivityMode.parse(mode)
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise ValueError("alpha_grid must be nonempty")
    schedule = schedule or AnnealSchedule()
    prefix = tuple(float(a) for a in prefix_alphas)
    jobs = [(n, prefix + (a,), mode, seed, k, t, restarts, schedule)
            for k, a in enumerate(grid) for t in range(trials)]
    workers = worker_count(workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            found = list(pool.map(_run_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        found = [_run_trial(j) for j in jobs]
    rows = []
    for k, a in enumerate(grid):
        hits = sum(found[k * trials:(k + 1) * trials])
        rows.append(SweepRow(alpha_l=a, trials=trials, witnesses=int(hits)))
    return rows
