"""Synthetic sparse quantile-regression benchmarks and evaluation metrics.

Designs have AR(1) rows with corr(x_p, x_q) = 0.5**|p - q|; the first
covariate is pushed through the normal CDF and scales a heteroscedastic
noise term, so the tau-quantile coefficient of x_1 picks up
``0.7 * Phi^{-1}(tau)``. All other coefficients are tiny N(0, 1e-6) draws
plus unit entries on the active set. Indices are 0-based.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

__all__ = [
    "Scenario",
    "ScenarioConfig",
    "GeneratedTrial",
    "make_rng",
    "standard_normal",
    "normal_cdf",
    "normal_quantile",
    "sample_design",
    "gen_trial",
    "mse",
    "support_accuracy",
    "export_trial",
]

S124_ACTIVE = (5, 11, 14, 19)


class Scenario(str, enum.Enum):
    S1_2_4 = "S1_2_4"
    S3 = "S3"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario = Scenario.S1_2_4
    n: int = 100
    P: int = 300
    tau: float = 0.7
    s: int | None = None
    noise_scale: float = 0.7
    xi_sd: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.n < 1 or self.P < 1:
            raise ValueError("n and P must be at least 1")
        if not 0 < self.tau < 1:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.scenario is Scenario.S1_2_4 and self.P < 20:
            raise ValueError("scenarios 1, 2 and 4 need P >= 20")
        if self.scenario is Scenario.S3:
            if self.s is None or not 1 <= self.s <= self.P - 1:
                raise ValueError("scenario 3 needs 1 <= s <= P - 1")

    def signal_set(self) -> tuple[int, ...]:
        """Indices carrying a unit coefficient (the first covariate excluded)."""
        if self.scenario is Scenario.S1_2_4:
            return S124_ACTIVE
        return tuple(range(1, self.s + 1))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return ScenarioConfig(self.scenario, self.n, self.P, self.tau, self.s,
                              self.noise_scale, self.xi_sd, seed)


@dataclass
class GeneratedTrial:
    X: np.ndarray
    y: np.ndarray
    w_true: np.ndarray
    active_set: tuple[int, ...]
    tau: float


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; one independent stream per seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Box-Muller normals built from the generator's uniform doubles."""
    shape = (size,) if np.isscalar(size) else tuple(size)
    m = int(np.prod(shape))
    half = (m + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    out = np.empty(2 * half)
    out[0::2] = rad * np.cos(ang)
    out[1::2] = rad * np.sin(ang)
    return out[:m].reshape(shape)


def normal_cdf(x):
    out = special.ndtr(np.asarray(x, dtype=float))
    return out if out.ndim else float(out)


def normal_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)) or np.any(~np.isfinite(p)):
        raise ValueError("normal_quantile needs 0 < p < 1")
    out = special.ndtri(p)
    return out if out.ndim else float(out)


def sample_design(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """AR(1) Gaussian rows with the first column mapped through Phi."""
    e = standard_normal(rng, (cfg.n, cfg.P))
    xt = np.empty_like(e)
    xt[:, 0] = e[:, 0]
    root = math.sqrt(0.75)
    for p in range(1, cfg.P):
        xt[:, p] = 0.5 * xt[:, p - 1] + root * e[:, p]
    xt[:, 0] = normal_cdf(xt[:, 0])
    return xt


def gen_trial(cfg: ScenarioConfig, rng: np.random.Generator | None = None) -> GeneratedTrial:
    if rng is None:
        rng = make_rng(cfg.seed)
    X = sample_design(cfg, rng)
    xi = cfg.xi_sd * standard_normal(rng, cfg.P)
    eps = standard_normal(rng, cfg.n)
    signal = list(cfg.signal_set())
    y = X @ xi + X[:, signal].sum(axis=1) + cfg.noise_scale * eps * X[:, 0]
    w_true = xi.copy()
    w_true[signal] += 1.0
    w_true[0] += cfg.noise_scale * normal_quantile(cfg.tau)
    active = tuple(sorted({0, *signal}))
    return GeneratedTrial(X=X, y=y, w_true=w_true, active_set=active, tau=cfg.tau)


def mse(w_hat, w_true) -> float:
    """Squared estimation error ||w_hat - w_true||^2."""
    w_hat = np.asarray(w_hat, dtype=float)
    w_true = np.asarray(w_true, dtype=float)
    if w_hat.shape != w_true.shape:
        raise ValueError(f"length mismatch: {w_hat.shape} vs {w_true.shape}")
    d = w_hat - w_true
    return float(d @ d)


def support_accuracy(w_hat, active_set, threshold: float = 1e-2) -> float:
    """Fraction of coefficients whose active/inactive status is recovered."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    w_hat = np.asarray(w_hat, dtype=float)
    truth = np.zeros(w_hat.size, dtype=bool)
    truth[list(active_set)] = True
    found = np.abs(w_hat) > threshold
    return float(np.mean(found == truth))


def export_trial(trial: GeneratedTrial, csv_path, sidecar_path=None) -> tuple[Path, Path]:
    """Write ``y`` and the features as CSV plus a JSON sidecar with the truth."""
    csv_path = Path(csv_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(".truth.json")
    header = ",".join(["y"] + [f"x{p + 1}" for p in range(trial.X.shape[1])])
    data = np.column_stack([trial.y, trial.X])
    np.savetxt(csv_path, data, delimiter=",", header=header, comments="", fmt="%.17g")
    sidecar_path.write_text(json.dumps({
        "tau": trial.tau,
        "w_true": [float(v) for v in trial.w_true],
        "active_set": list(trial.active_set),
        "index_base": 0,
    }, indent=1))
    return csv_path, sidecar_path
