"""Seeded experiment drivers behind the command-line interface.

Every driver returns a :class:`Report`. Its ``metrics`` section depends only on
the configuration and seed; wall-clock numbers live in ``timings``.
"""
from __future__ import annotations

import csv
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .chow import analytic_chow2, chow_spectral_error, estimate_chow2
from .config import ExperimentConfig, LearnSettings
from .core import (
    NetworkParams,
    NoiseKind,
    NoiseModel,
    draw_samples,
    eval_network,
    get_activation,
    make_oracle,
    random_network,
)
from .learner import LearnConfig, learn, subspace_residual, top_k_subspace
from .rng import RngStream
from .sqhard import (
    VANISHING_TOL,
    angular_moments,
    make_instance,
    moment_check,
    nonvanishing_check,
    pairwise_correlation_report,
    plane_packing,
)
from .verify import run_invariants

__all__ = [
    "CSV_COLUMNS",
    "Report",
    "run_chow",
    "run_hardness",
    "run_learn",
    "run_pack",
    "run_verify",
    "summarize",
    "trial_network",
]

CSV_COLUMNS = [
    "trial", "d", "k", "eps", "sigma", "n_chow", "cover_size", "candidates",
    "rel_error", "residual_max", "secs_chow", "secs_sweep",
]

# stream ids keep the suites' randomness disjoint for a shared seed
_STREAMS = {"learn": 1, "chow": 2, "hardness": 3, "pack": 4, "verify": 5}


@dataclass
class Report:
    command: str
    config: dict
    metrics: dict
    summary: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    passed: bool = True
    trials: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "passed": self.passed,
            "config": self.config,
            "metrics": self.metrics,
            "summary": self.summary,
            "warnings": self.warnings,
            "timings": self.timings,
        }

    def metrics_json(self) -> str:
        """Canonical text of the reproducible sections."""
        return json.dumps({"metrics": self.metrics, "summary": self.summary}, sort_keys=True)

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        if self.trials:
            with open(out / "trials.csv", "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(self.trials[0]))
                writer.writeheader()
                writer.writerows(self.trials)
        return out


def summarize(values) -> dict:
    """Median, quartiles, IQR, min and max of a sequence of numbers."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        return {"n": 0}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {
        "n": int(v.size),
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "iqr": float(q3 - q1),
        "min": float(v.min()),
        "max": float(v.max()),
    }


def _map_trials(fn, n: int, threads: int) -> list:
    if threads <= 1 or n <= 1:
        return [fn(t) for t in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


# --------------------------------------------------------------------------
# learning


def trial_network(s: LearnSettings, gen: np.random.Generator) -> NetworkParams:
    """Random positive network for one trial.

    With ``angle_deg`` set, the two unit weights span a random plane at that angle.
    """
    if s.angle_deg is None:
        return random_network(s.d, s.k, gen, (s.alpha_low, s.alpha_high))
    q, _ = np.linalg.qr(gen.standard_normal((s.d, 2)))
    a = math.radians(s.angle_deg)
    w = np.stack([q[:, 0], math.cos(a) * q[:, 0] + math.sin(a) * q[:, 1]])
    alpha = gen.uniform(s.alpha_low, s.alpha_high, size=2)
    return NetworkParams(alpha, w / np.linalg.norm(w, axis=1, keepdims=True))


def learn_config(s: LearnSettings) -> LearnConfig:
    return LearnConfig(
        k=s.k, eps=s.eps, sigma=s.sigma, activation=s.activation,
        chow_mult=s.chow_mult, mean_mult=s.mean_mult, select_mult=s.select_mult,
        min_bucket_size=s.min_bucket_size, delta=s.delta, c=s.c, cover_eps=s.cover_eps,
        max_candidates=s.max_candidates,
    )


def relative_error(target: NetworkParams, hyp: NetworkParams, act, sigma: float, xs: np.ndarray) -> float:
    """Held-out ``E[(f - h)^2] / (sigma^2 + E[f^2])``."""
    f = eval_network(target, xs, act)
    h = eval_network(hyp, xs, act)
    return float(np.mean((f - h) ** 2) / (sigma**2 + np.mean(f**2)))


def _learn_trial(cfg: ExperimentConfig, t: int) -> tuple[dict, dict]:
    s = cfg.learn
    stream = RngStream(cfg.seed, _STREAMS["learn"]).substream(t)
    target = trial_network(s, stream.substream(0).generator())
    noise = NoiseModel(s.sigma, NoiseKind(s.noise))
    oracle = make_oracle(target, s.activation, noise, stream.substream(1))
    lc = learn_config(s)
    res = learn(lc, oracle)
    xs = stream.substream(2).generator().standard_normal((s.n_test, s.d))
    resid = subspace_residual(res.subspace, target)
    metrics = {
        "trial": t,
        "rel_error": relative_error(target, res.network, s.activation, s.sigma, xs),
        "residuals": [float(r) for r in resid],
        "residual_max": float(resid.max()),
        "n_chow": lc.n_chow(s.d),
        "n_mean": lc.n_mean(get_activation(s.activation)),
        "n_select": res.n_select,
        "buckets": res.buckets,
        "radius": res.radius,
        "cover_size": res.cover_size,
        "candidates": res.n_candidates,
        "best_error": res.best_error,
        "k_selected": res.network.k,
    }
    row = {
        "trial": t, "d": s.d, "k": s.k, "eps": s.eps, "sigma": s.sigma,
        "n_chow": metrics["n_chow"], "cover_size": res.cover_size, "candidates": res.n_candidates,
        "rel_error": metrics["rel_error"], "residual_max": metrics["residual_max"],
        "secs_chow": res.timings.get("chow", 0.0), "secs_sweep": res.timings.get("sweep", 0.0),
    }
    return metrics, row


def run_learn(cfg: ExperimentConfig) -> Report:
    """Learn ``cfg.trials`` random positive networks and score them on held-out data.

    Raises :class:`~pacnet.learner.BudgetError` when the sweep would exceed
    ``learn.max_candidates``.
    """
    t0 = time.perf_counter()
    out = _map_trials(lambda t: _learn_trial(cfg, t), cfg.trials, cfg.threads)
    trials = [m for m, _ in out]
    rows = [r for _, r in out]
    errs = [m["rel_error"] for m in trials]
    return Report(
        command="learn",
        config=cfg.to_dict(),
        metrics={"trials": trials},
        summary={
            "rel_error": summarize(errs),
            "residual_max": summarize(m["residual_max"] for m in trials),
            "pass_rate_0.15": float(np.mean(np.asarray(errs) <= 0.15)),
        },
        timings={
            "total": time.perf_counter() - t0,
            "chow": [r["secs_chow"] for r in rows],
            "sweep": [r["secs_sweep"] for r in rows],
        },
        trials=rows,
        seed=cfg.seed,
    )


def run_chow(cfg: ExperimentConfig) -> Report:
    """Chow-matrix diagnostics only: spectral error and subspace residuals per trial."""
    s = cfg.learn
    lc = learn_config(s)
    n = lc.n_chow(s.d)

    def trial(t):
        stream = RngStream(cfg.seed, _STREAMS["chow"]).substream(t)
        target = trial_network(s, stream.substream(0).generator())
        samples = draw_samples(target, s.activation, NoiseModel(s.sigma, NoiseKind(s.noise)), n, stream.substream(1))
        tc = time.perf_counter()
        chow = estimate_chow2(samples, target_tol=s.eps)
        secs = time.perf_counter() - tc
        sub = top_k_subspace(chow, s.k)
        resid = subspace_residual(sub, target)
        gap = np.linalg.eigvalsh(analytic_chow2(target, s.activation))[::-1]
        return {
            "trial": t,
            "n_chow": n,
            "spectral_error": chow_spectral_error(chow, target, s.activation),
            "residuals": [float(r) for r in resid],
            "residual_max": float(resid.max()),
            "eigengap": float(gap[s.k - 1] - gap[s.k]) if s.k < s.d else float(gap[-1]),
        }, secs

    t0 = time.perf_counter()
    out = _map_trials(trial, cfg.trials, cfg.threads)
    trials = [m for m, _ in out]
    return Report(
        command="chow",
        config=cfg.to_dict(),
        metrics={"trials": trials},
        summary={
            "spectral_error": summarize(m["spectral_error"] for m in trials),
            "residual_max": summarize(m["residual_max"] for m in trials),
        },
        timings={"total": time.perf_counter() - t0, "chow": [sec for _, sec in out]},
        seed=cfg.seed,
    )


# --------------------------------------------------------------------------
# hardness


def _packing_metrics(ps) -> dict:
    return {
        "planes": len(ps),
        "attempts": ps.attempts,
        "pairwise_bound": ps.pairwise_bound,
    }


def run_pack(cfg: ExperimentConfig) -> Report:
    """Plane packing only. Raises :class:`~pacnet.sqhard.PackingError` on failure."""
    h = cfg.hardness
    t0 = time.perf_counter()
    ps = plane_packing(h.d, h.m, h.bound, RngStream(cfg.seed, _STREAMS["pack"]), h.max_attempts)
    m = ps.gaps.shape[0]
    off = ps.gaps[~np.eye(m, dtype=bool)] if m > 1 else np.zeros(0)
    return Report(
        command="pack",
        config=cfg.to_dict(),
        metrics=_packing_metrics(ps),
        summary={"pairwise_gap": summarize(off)},
        timings={"total": time.perf_counter() - t0},
        seed=cfg.seed,
    )


def run_hardness(cfg: ExperimentConfig) -> Report:
    """Moment table, plane packing and the pairwise correlation suite.

    A vanishing planar function skips the correlation suite with a warning.
    ``passed`` is False if any pair exceeds the decay bound by more than
    three standard errors.
    """
    h = cfg.hardness
    base = RngStream(cfg.seed, _STREAMS["hardness"])
    t0 = time.perf_counter()
    timings = {}
    report_warnings = []

    second = nonvanishing_check(h.k, h.phi, h.sigma_out)
    moments = moment_check(h.k, h.phi, h.sigma_out, h.degree_cap)
    ang = angular_moments(h.k, h.phi, h.sigma_out, h.k)
    metrics = {
        "second_moment": second,
        "vanishing": bool(second <= VANISHING_TOL),
        "max_coefficient_by_degree": {str(m): v for m, v in moments.items()},
        "max_coefficient_below_k": max((moments[m] for m in range(min(h.k, h.degree_cap + 1))), default=0.0),
        "frequency_k_moment": abs(ang[(h.k, 0)]),
    }
    timings["moments"] = time.perf_counter() - t0

    t = time.perf_counter()
    ps = plane_packing(h.d, h.m, h.bound, base.substream(0), h.max_attempts)
    metrics["packing"] = _packing_metrics(ps)
    timings["packing"] = time.perf_counter() - t

    summary = {}
    passed = True
    if metrics["vanishing"]:
        msg = (
            f"vanishing instance: E[f^2] = {second:.3g} for k={h.k}, phi={h.phi}; "
            "correlation suite skipped"
        )
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        report_warnings.append(msg)
        metrics["correlation"] = None
    elif h.m == 1:
        metrics["correlation"] = {"estimates": [], "stderr": [], "ratios": [], "violations": 0}
    else:
        t = time.perf_counter()
        instances = [make_instance(h.k, h.phi, h.sigma_out, P) for P in ps.planes]
        rep = pairwise_correlation_report(instances, h.n_mc, base.substream(1))
        m = h.m
        off = ~np.eye(m, dtype=bool)
        ratios = np.where(off, np.abs(rep.estimates) / rep.bound_k, 0.0)
        viol = int(rep.violations().sum() // 2)
        metrics["z_norm"] = instances[0].z_norm
        metrics["correlation"] = {
            "estimates": rep.estimates.tolist(),
            "stderr": rep.stderr.tolist(),
            "bound_k": rep.bound_k.tolist(),
            "bound_k_plus_1": rep.bound_k1.tolist(),
            "ratios": ratios.tolist(),
            "max_abs_offdiag": float(np.abs(rep.estimates[off]).max()),
            "threshold": float(rep.packing_bound**h.k),
            "violations": viol,
            "violations_per_pair": int(rep.violations(per_pair=True).sum() // 2),
            "avg_correlation": rep.avg_correlation,
        }
        summary["abs_offdiag_correlation"] = summarize(np.abs(rep.estimates[off]))
        summary["ratio"] = summarize(ratios[off])
        passed = viol == 0
        timings["correlation"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0
    return Report(
        command="hardness",
        config=cfg.to_dict(),
        metrics=metrics,
        summary=summary,
        timings=timings,
        warnings=report_warnings,
        passed=passed,
        seed=cfg.seed,
    )


# --------------------------------------------------------------------------
# invariants


def run_verify(cfg: ExperimentConfig) -> Report:
    """Run the named invariant suite; ``passed`` is False if any check fails."""
    t0 = time.perf_counter()
    checks = run_invariants(cfg.verify, RngStream(cfg.seed, _STREAMS["verify"]))
    return Report(
        command="verify",
        config=cfg.to_dict(),
        metrics={"checks": [c.to_dict() for c in checks]},
        summary={"total": len(checks), "failed": sum(not c.passed for c in checks)},
        timings={"total": time.perf_counter() - t0},
        passed=all(c.passed for c in checks),
        seed=cfg.seed,
    )
