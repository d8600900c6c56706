"""Error tables, rate fits and deterministic CSV output."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

ERROR_CSV_COLUMNS = ("path", "level", "tau_or_h", "err_max_l2sq",
                     "err_sum_h1sq", "stop_index", "exceed")


@dataclass(frozen=True)
class ErrorRow:
    """One (path, refinement level) record of the stopped error functional."""

    path: int
    level: int
    tau_or_h: float
    err_max_l2sq: float
    err_sum_h1sq: float
    stop_index: int
    exceed: bool

    @property
    def total(self) -> float:
        return self.err_max_l2sq + self.err_sum_h1sq


@dataclass
class ErrorTable:
    rows: list

    def totals_by_level(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out.setdefault(r.level, []).append(r.total)
        return {lvl: np.array(v) for lvl, v in sorted(out.items())}

    def exceed_fraction_by_level(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out.setdefault(r.level, []).append(1.0 if r.exceed else 0.0)
        return {lvl: float(np.mean(v)) for lvl, v in sorted(out.items())}


@dataclass(frozen=True)
class RateFit:
    """Weighted least-squares fit of log(median) against log(step or mesh size)."""

    slope: float
    intercept: float
    slope_se: float
    ci_lo: float
    ci_hi: float
    levels: tuple
    medians: tuple

    def drop_coarsest(self) -> "RateFit":
        if len(self.levels) < 3:
            raise ValueError("need at least 3 levels to drop one")
        return fit_loglog(np.array(self.levels[1:]), np.array(self.medians[1:]))


def median_log_weight(values: np.ndarray) -> float:
    """1/Var weight for log(median) from the nonparametric order-statistic CI."""
    n = values.size
    if n < 8:
        return 1.0
    s = np.sort(values)
    half = 0.98 * np.sqrt(n)  # ~1.96 * sqrt(n)/2
    lo = s[max(0, int(np.floor(n / 2 - half)))]
    hi = s[min(n - 1, int(np.ceil(n / 2 + half)))]
    if lo <= 0 or hi <= 0 or hi == lo:
        return 1.0
    se = (np.log(hi) - np.log(lo)) / (2 * 1.96)
    return float(1.0 / max(se, 1e-6) ** 2)


def fit_loglog(x: np.ndarray, y: np.ndarray,
               weights: np.ndarray | None = None) -> RateFit:
    """WLS regression of log y on log x with a normal-theory slope CI."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValueError("need at least two levels for a rate fit")
    if np.any(y <= 0):
        raise ValueError("rate fit requires positive medians")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64)
    lx, ly = np.log(x), np.log(y)
    X = np.vstack([lx, np.ones_like(lx)]).T
    XtW = X.T * w
    cov_inv = XtW @ X
    beta = np.linalg.solve(cov_inv, XtW @ ly)
    resid = ly - X @ beta
    dof = max(x.size - 2, 1)
    s2 = float((w * resid**2).sum() / dof)
    cov = s2 * np.linalg.inv(cov_inv)
    se = float(np.sqrt(max(cov[0, 0], 0.0)))
    return RateFit(slope=float(beta[0]), intercept=float(beta[1]), slope_se=se,
                   ci_lo=float(beta[0] - 1.96 * se),
                   ci_hi=float(beta[0] + 1.96 * se),
                   levels=tuple(x), medians=tuple(y))


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = successes / n
    denom = 1.0 + z**2 / n
    centre = (p + z**2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


def _format(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows) -> None:
    """Deterministic CSV: header row, repr-formatted floats, '.' decimals."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format(v) for v in row) + "\n")


def error_table_rows(table: ErrorTable):
    for r in table.rows:
        yield (r.path, r.level, r.tau_or_h, r.err_max_l2sq, r.err_sum_h1sq,
               r.stop_index, r.exceed)


RATES_CSV_COLUMNS = ("record", "level", "tau_or_h", "median", "slope",
                     "slope_ci_lo", "slope_ci_hi")


def rates_rows(fit: RateFit, exceed: dict | None = None):
    for i, (x, med) in enumerate(zip(fit.levels, fit.medians)):
        yield ("level", i, x, med, "", "", "")
    yield ("fit", "", "", "", fit.slope, fit.ci_lo, fit.ci_hi)
    if exceed:
        for i, (lvl, frac) in enumerate(sorted(exceed.items())):
            yield ("exceed", lvl, "", frac, "", "", "")


def ensure_outdir(outdir) -> str:
    os.makedirs(outdir, exist_ok=True)
    if not os.path.isdir(outdir) or not os.access(outdir, os.W_OK):
        raise OSError(f"output directory {outdir} is not writable")
    return str(outdir)


def maybe_plot_rates(fit: RateFit, path, xlabel: str) -> None:
    """Static log-log plot of medians with the fitted slope (best effort)."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except Exception:
        return
    x = np.asarray(fit.levels)
    y = np.asarray(fit.medians)
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.loglog(x, y, "o-", label="median error")
    ax.loglog(x, np.exp(fit.intercept) * x**fit.slope, "--",
              label=f"slope {fit.slope:.2f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("median error functional")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
