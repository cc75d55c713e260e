"""Estimators and tests that turn distributional statements into pass/fail numbers."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import kolmogorov

from .core import UsageError


@dataclass
class TestReport:
    """One check. ``kind`` is ``"p_value"`` or ``"margin"`` (passes iff
    ``value > threshold``) or ``"gap"`` (passes iff ``value < threshold``)."""

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    value: float
    n_samples: int
    threshold: float
    kind: str = "p_value"
    passed: bool = field(default=False)
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("p_value", "margin", "gap"):
            raise UsageError(f"unknown report kind {self.kind!r}")
        if self.kind != "gap":
            self.passed = bool(self.value > self.threshold)
        else:
            self.passed = bool(self.value < self.threshold)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("statistic", "value", "threshold"):
            d[key] = _json_float(d[key])
        return d

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        op = "<" if self.kind == "gap" else ">"
        return (f"{status}  {self.name}: {self.kind}={self.value:.4g} (need {op} {self.threshold:.4g}; "
                f"stat={self.statistic:.4g}, n={self.n_samples})")


def _json_float(v):
    v = float(v)
    if np.isfinite(v):
        return v
    return "inf" if v > 0 else ("-inf" if v < 0 else "nan")


def realized_qv(path) -> np.ndarray | float:
    """Sum of squared grid increments along the last axis."""
    d = np.diff(np.asarray(path, dtype=float), axis=-1)
    out = np.sum(d * d, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def realized_cross_qv(p1, p2) -> np.ndarray | float:
    d1 = np.diff(np.asarray(p1, dtype=float), axis=-1)
    d2 = np.diff(np.asarray(p2, dtype=float), axis=-1)
    if d1.shape != d2.shape:
        raise UsageError("paths must share a grid")
    out = np.sum(d1 * d2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sided Kolmogorov-Smirnov statistic and its asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise UsageError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / na
    fb = np.searchsorted(b, pooled, side="right") / nb
    d = float(np.max(np.abs(fa - fb)))
    p = float(kolmogorov(np.sqrt(na * nb / (na + nb)) * d))
    return d, min(max(p, 0.0), 1.0)


def ks_report(name: str, a, b, threshold: float = 1e-3) -> TestReport:
    d, p = ks_two_sample(a, b)
    return TestReport(name, d, p, int(min(np.size(a), np.size(b))), threshold, "p_value")


def _z(diff: float, se: float) -> float:
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else float(np.copysign(np.inf, diff))


def moment_report(samples, target_mean: float, target_var: float, name: str = "moments", bound: float = 3.0) -> TestReport:
    """z-scores of the sample mean and sample variance against targets.

    The mean uses the sample standard error; the variance uses the
    fourth-moment standard error ``sqrt((m4 - s^4) / N)``. Passes iff both
    ``|z| < bound``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 30:
        raise UsageError(f"moment_report needs at least 30 samples, got {n}")
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - mean) ** 4))
    z_mean = _z(mean - target_mean, np.sqrt(var / n))
    z_var = _z(var - target_var, np.sqrt(max(m4 - var * var, 0.0) / n))
    worst = max(abs(z_mean), abs(z_var))
    return TestReport(
        name,
        statistic=worst,
        value=worst,
        n_samples=n,
        threshold=bound,
        kind="gap",
        detail={
            "mean": mean,
            "var": var,
            "target_mean": target_mean,
            "target_var": target_var,
            "z_mean": _json_float(z_mean),
            "z_var": _json_float(z_var),
        },
    )


def mean_band_report(samples, target: float, name: str, bound: float = 3.0) -> TestReport:
    """``|mean - target| / SE < bound``."""
    x = np.asarray(samples, dtype=float).ravel()
    mean = float(np.mean(x))
    z = _z(mean - target, float(np.std(x, ddof=1) / np.sqrt(x.size)))
    return TestReport(name, mean, abs(z), x.size, bound, "gap", detail={"mean": mean, "target": target, "z": _json_float(z)})


def correlation_report(a, b, name: str, bound: float = 3.0) -> TestReport:
    """Sample correlation against zero, in units of its null standard error ``1/sqrt(N)``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    rho = float(np.corrcoef(a, b)[0, 1])
    z = abs(rho) * np.sqrt(a.size)
    return TestReport(name, rho, z, a.size, bound, "gap", detail={"rho": rho})


def relative_gap_report(estimate: float, target: float, name: str, bound: float, n_samples: int) -> TestReport:
    gap = abs(estimate - target) / max(abs(target), np.finfo(float).tiny)
    return TestReport(name, estimate, gap, n_samples, bound, "gap", detail={"estimate": estimate, "target": target})


@dataclass
class RnDiagnostic:
    """Second moments ``E[R_n^2]`` along a ladder of direction indices."""

    ladder: list[int]
    means: np.ndarray
    ses: np.ndarray
    diff_ses: np.ndarray  # SE of consecutive differences
    decreasing: bool  # each rung below the previous by more than 2 SE
    final_ratio: float

    def to_dict(self) -> dict:
        return {
            "ladder": list(self.ladder),
            "means": self.means.tolist(),
            "ses": self.ses.tolist(),
            "diff_ses": self.diff_ses.tolist(),
            "decreasing": self.decreasing,
            "final_ratio": _json_float(self.final_ratio),
        }


def rn_diagnostic(ladder, samples, paired: bool = True, k_se: float = 2.0) -> RnDiagnostic:
    """Summarize ``R_n(t)`` samples per rung.

    ``samples[i]`` holds the values of ``R`` at one probe for rung
    ``ladder[i]``. With ``paired`` (common random numbers across rungs) the
    SE of a consecutive difference is computed from per-sample differences.
    """
    sq = [np.asarray(s, dtype=float).ravel() ** 2 for s in samples]
    if len(sq) != len(ladder) or not sq:
        raise UsageError("one sample array per rung required")
    means = np.array([float(np.mean(s)) for s in sq])
    ses = np.array([float(np.std(s, ddof=1) / np.sqrt(s.size)) for s in sq])
    diff_ses = []
    for a, b, sa, sb in zip(sq[:-1], sq[1:], ses[:-1], ses[1:]):
        if paired and a.size == b.size:
            d = a - b
            diff_ses.append(float(np.std(d, ddof=1) / np.sqrt(d.size)))
        else:
            diff_ses.append(float(np.hypot(sa, sb)))
    diff_ses = np.array(diff_ses)
    drops = means[:-1] - means[1:]
    decreasing = bool(len(ladder) > 1 and np.all(drops > k_se * diff_ses))
    ratio = float(means[-1] / means[0]) if means[0] > 0 else float("nan")
    return RnDiagnostic(list(ladder), means, ses, diff_ses, decreasing, ratio)
