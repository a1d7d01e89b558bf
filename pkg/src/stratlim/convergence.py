"""Coupled Monte-Carlo ensembles of ``u_eps`` against the white-noise limit.

For every realization one white-noise field drives both the mollified
potential ``rho_eps * dW`` at each ``eps`` and the limit potential
``sigma dW / h^d``.  The squared grid-L2 distance of the two solutions at
``T`` is averaged over realizations and ``log(mse)`` is regressed on
``log(eps)``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .pde_solver import SPLITTING_GUARD, SimConfig, solve_with_potential
from .random_field import (
    block_average,
    mollified_potential,
    refine_white_noise,
    sample_white_noise,
    white_noise_potential,
)

log = logging.getLogger(__name__)

__all__ = [
    "ConvergenceReport",
    "l2_omega_estimate",
    "fit_rate",
    "run_convergence",
    "coupling_correlation",
    "config_digest",
    "write_samples_csv",
]

CONCLUSIVE_REL_SE = 0.2
MIN_REALIZATIONS = 50
SCHEMA = "convergence_report/1"


def l2_omega_estimate(samples: Sequence[float]) -> tuple[float, float]:
    """Sample mean and standard error of the mean."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples")
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def fit_rate(eps_values, mse_values, stderr_values=None):
    """Weighted least squares of ``log mse`` on ``log eps``.

    Weights are ``(mse / stderr)^2``, the inverse delta-method variance of
    ``log mse``; without usable standard errors the fit is unweighted.  The
    95% interval on the slope uses the weighted residual variance with a
    Student-t quantile on ``n - 2`` degrees of freedom.

    Returns ``(slope, intercept, (lo, hi))``.
    """
    eps = np.asarray(eps_values, dtype=float)
    mse = np.asarray(mse_values, dtype=float)
    if eps.size < 3:
        raise ValueError("need at least three eps values")
    if eps.max() / eps.min() < 4:
        raise ValueError("eps values must span a factor of at least 4")
    if np.any(mse <= 0):
        raise ValueError("mse values must be positive")
    if stderr_values is None or np.any(np.asarray(stderr_values) <= 0):
        w = np.ones_like(mse)
    else:
        w = (mse / np.asarray(stderr_values, dtype=float)) ** 2
    X = np.column_stack([np.log(eps), np.ones_like(eps)])
    y = np.log(mse)
    XtW = X.T * w
    A = XtW @ X
    coef = np.linalg.solve(A, XtW @ y)
    resid = y - X @ coef
    dof = eps.size - 2
    s2 = float(np.sum(w * resid**2) / dof) if dof > 0 else 0.0
    se = float(np.sqrt(s2 * np.linalg.inv(A)[0, 0]))
    half = float(stats.t.ppf(0.975, dof)) * se if dof > 0 else float("inf")
    slope, intercept = float(coef[0]), float(coef[1])
    return slope, intercept, (slope - half, slope + half)


def config_digest(config: SimConfig, eps_values, n_realizations, master_seed) -> str:
    payload = {
        "config": config.as_dict(),
        "eps_values": [float(e) for e in eps_values],
        "n_realizations": int(n_realizations),
        "master_seed": int(master_seed),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class ConvergenceReport:
    eps_values: list[float]
    mse: list[float]
    stderr: list[float]
    fitted_slope: float
    intercept: float
    slope_ci: tuple[float, float]
    n_realizations: int
    master_seed: int
    config_digest: str
    config: dict
    mse_mid: list[float] = field(default_factory=list)
    stderr_mid: list[float] = field(default_factory=list)
    independent_mse: float | None = None
    independent_stderr: float | None = None
    bias_sentinel: dict | None = None
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def conclusive(self) -> bool:
        """Relative standard error below 0.2 at every eps, with at least 50 realizations."""
        if self.n_realizations < MIN_REALIZATIONS:
            return False
        return all(s / m < CONCLUSIVE_REL_SE for m, s in zip(self.mse, self.stderr))

    @property
    def coupling_ratio(self) -> float | None:
        if self.independent_mse is None:
            return None
        return self.mse[int(np.argmin(self.eps_values))] / self.independent_mse

    def monotone_violations(self, n_se: float = 2.0) -> list[tuple[float, float]]:
        """Adjacent ``eps`` pairs where mse grows as eps decreases by more than ``n_se`` SE."""
        order = np.argsort(self.eps_values)[::-1]
        bad = []
        for a, b in zip(order[:-1], order[1:]):
            se = np.hypot(self.stderr[a], self.stderr[b])
            if self.mse[b] > self.mse[a] + n_se * se:
                bad.append((self.eps_values[a], self.eps_values[b]))
        return bad

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "eps_values": self.eps_values,
            "mse": self.mse,
            "stderr": self.stderr,
            "mse_mid": self.mse_mid,
            "stderr_mid": self.stderr_mid,
            "fitted_slope": self.fitted_slope,
            "intercept": self.intercept,
            "slope_ci": list(self.slope_ci),
            "conclusive": self.conclusive,
            "n_realizations": self.n_realizations,
            "master_seed": self.master_seed,
            "independent_mse": self.independent_mse,
            "independent_stderr": self.independent_stderr,
            "coupling_ratio": self.coupling_ratio,
            "bias_sentinel": self.bias_sentinel,
            "config_digest": self.config_digest,
            "config": self.config,
        }


def _sq_dist(grid, a, b):
    return grid.l2_norm(a - b) ** 2


def _batch(config: SimConfig, eps_values, indices, master_seed, independent: bool):
    grid, model = config.grid, config.model
    noises = [sample_white_noise(grid, master_seed, r) for r in indices]
    pots = [np.stack([white_noise_potential(W, model).values for W in noises])]
    for eps in eps_values:
        pots.append(np.stack([mollified_potential(W, model, eps).values for W in noises]))
    if independent:
        alt = [sample_white_noise(grid, master_seed, r, stream=1) for r in indices]
        pots.append(np.stack([white_noise_potential(W, model).values for W in alt]))
    cfg = config.with_(n_saves=2)
    traj = solve_with_potential(cfg, np.stack(pots))
    mid, fin = traj.states[1], traj.states[-1]
    k = len(eps_values)
    out = {
        "final": np.stack([_sq_dist(grid, fin[1 + i], fin[0]) for i in range(k)], axis=-1),
        "mid": np.stack([_sq_dist(grid, mid[1 + i], mid[0]) for i in range(k)], axis=-1),
    }
    if independent:
        i_min = int(np.argmin(eps_values))
        out["independent"] = _sq_dist(grid, fin[1 + i_min], fin[-1])
    return out


def _sentinel(config: SimConfig, eps, indices, master_seed):
    """mse at ``eps`` on the grid with ``h`` halved, coupled by refinement."""
    fine = config.grid.refined()
    model = config.model
    noises = [refine_white_noise(sample_white_noise(config.grid, master_seed, r)) for r in indices]
    pots = np.stack([
        np.stack([white_noise_potential(W, model).values for W in noises]),
        np.stack([mollified_potential(W, model, eps).values for W in noises]),
    ])
    dt = config.dt
    vmax = float(np.abs(pots).max())
    if dt * vmax > SPLITTING_GUARD:
        dt = SPLITTING_GUARD / vmax
    cfg = config.with_(grid=fine, dt=dt, n_saves=1)
    fin = solve_with_potential(cfg, pots).final
    return _sq_dist(fine, fin[1], fin[0]), cfg.step


def run_convergence(
    config: SimConfig,
    eps_values: Sequence[float],
    n_realizations: int,
    master_seed: int,
    batch_size: int = 25,
    workers: int = 1,
    independent: bool = True,
    sentinel_realizations: int = 0,
) -> ConvergenceReport:
    """Coupled ensemble over the ``eps`` ladder; see the module docstring.

    ``independent`` adds an uncoupled control at the smallest ``eps`` (the
    limit solution driven by an independent noise).  ``sentinel_realizations
    > 0`` reruns the smallest ``eps`` for that many realizations on the
    grid with ``h`` halved.
    """
    eps_values = [float(e) for e in eps_values]
    grid = config.grid
    if min(eps_values) < 4 * grid.h:
        raise ValueError(
            f"min eps / h = {min(eps_values) / grid.h:.3g} < 4: oscillation scale not resolved"
        )
    if n_realizations < MIN_REALIZATIONS:
        log.warning("only %d realizations; statistics will be weak", n_realizations)
    if n_realizations < 2:
        raise ValueError("need at least two realizations")

    chunks = [list(range(s, min(s + batch_size, n_realizations)))
              for s in range(0, n_realizations, batch_size)]

    def work(idx):
        return _batch(config, eps_values, idx, master_seed, independent)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]

    final = np.concatenate([p["final"] for p in parts])
    mid = np.concatenate([p["mid"] for p in parts])
    stats_fin = [l2_omega_estimate(final[:, i]) for i in range(len(eps_values))]
    stats_mid = [l2_omega_estimate(mid[:, i]) for i in range(len(eps_values))]
    mse = [m for m, _ in stats_fin]
    se = [s for _, s in stats_fin]
    if len(eps_values) >= 3:
        slope, intercept, ci = fit_rate(eps_values, mse, se)
    else:
        slope, intercept, ci = float("nan"), float("nan"), (float("nan"), float("nan"))

    report = ConvergenceReport(
        eps_values=eps_values,
        mse=mse,
        stderr=se,
        fitted_slope=slope,
        intercept=intercept,
        slope_ci=ci,
        n_realizations=int(n_realizations),
        master_seed=int(master_seed),
        config_digest=config_digest(config, eps_values, n_realizations, master_seed),
        config=config.as_dict(),
        mse_mid=[m for m, _ in stats_mid],
        stderr_mid=[s for _, s in stats_mid],
        samples=final,
    )
    if independent:
        ind = np.concatenate([p["independent"] for p in parts])
        report.independent_mse, report.independent_stderr = l2_omega_estimate(ind)
    if sentinel_realizations:
        k = min(sentinel_realizations, n_realizations)
        i_min = int(np.argmin(eps_values))
        fine, dt_fine = _sentinel(config, eps_values[i_min], list(range(k)), master_seed)
        report.bias_sentinel = {
            "eps": eps_values[i_min],
            "n_realizations": k,
            "h": grid.h,
            "h_fine": grid.h / 2,
            "dt_fine": dt_fine,
            "mse_coarse": float(final[:k, i_min].mean()),
            "mse_fine": float(fine.mean()),
        }
    return report


def coupling_correlation(W, model, eps: float, block: int) -> float:
    """Correlation of block-averaged ``q_eps`` with block-averaged ``sigma dW/h^d``."""
    grid = W.grid
    q = block_average(grid, mollified_potential(W, model, eps).values, block).ravel()
    w = block_average(grid, white_noise_potential(W, model).values, block).ravel()
    return float(np.corrcoef(q, w)[0, 1])


def write_samples_csv(path, report: ConvergenceReport):
    """Raw squared errors: ``realization_index, eps, squared_error``."""
    if report.samples is None:
        raise ValueError("report carries no raw samples")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["realization_index", "eps", "squared_error"])
        for r, row in enumerate(report.samples):
            for eps, v in zip(report.eps_values, row):
                w.writerow([r, eps, repr(float(v))])
