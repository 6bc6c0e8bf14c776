"""Neyman-Scott variance oracle.

In Y_it = alpha_i + gamma_t + eps_it with eps_it ~ N(0, beta), the fixed effects
estimator of beta is SSR / NT where SSR is the two-way demeaned sum of squares, and
NT * beta_hat / beta ~ chi-square with (N - 1)(T - 1) degrees of freedom. Bias,
spread and interval coverage of the plain, analytically corrected and unbiased
estimators follow in closed form; the jackknife rows come from simulation.

Every value is reported relative to beta = 1.
"""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammainc

from twofe.config import settings
from twofe.data.subpanel import split_halves
from twofe.errors import InvalidSpec
from twofe.estimation.correction import normal_quantile

logger = logging.getLogger(__name__)

# (N, T) cells reported by default
TABLE_CELLS: tuple[tuple[int, int], ...] = ((10, 10), (25, 10), (25, 25), (50, 10), (50, 25), (50, 50))

# panel cells drawn per simulation chunk
CHUNK_CELLS = 2_000_000


@dataclass
class OracleRow:
    estimator: str
    N: int
    T: int
    bias: float
    sd: float
    coverage: float
    source: str
    reps: int = 0
    mc_se: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "OracleRow":
        return cls(**data)


def degrees_of_freedom(N: int, T: int) -> int:
    return (N - 1) * (T - 1)


def analytical_factor(N: int, T: int) -> float:
    return 1.0 + 1.0 / N + 1.0 / T


def _half_width(N: int, T: int, level: float) -> float:
    return normal_quantile(level) * math.sqrt(2.0 / (N * T))


def chi_square_coverage(N: int, T: int, factor: float, level: float) -> float:
    """Coverage of factor * beta_hat +/- z * sqrt(2 / NT) * factor * beta_hat.

    The interval covers beta exactly when NT * beta_hat / beta falls in
    [NT / (factor (1 + c)), NT / (factor (1 - c))] with c = z sqrt(2 / NT).
    """
    df = degrees_of_freedom(N, T)
    c = _half_width(N, T, level)
    lower = N * T / (factor * (1.0 + c))
    upper_cdf = 1.0 if c >= 1.0 else float(gammainc(df / 2.0, N * T / (factor * (1.0 - c)) / 2.0))
    return upper_cdf - float(gammainc(df / 2.0, lower / 2.0))


def analytic_rows(N: int, T: int, level: float | None = None) -> list[OracleRow]:
    level = settings.confidence_level if level is None else level
    _check_cell(N, T)
    df = degrees_of_freedom(N, T)
    nt = N * T
    kappa = analytical_factor(N, T)
    sd_fe = math.sqrt(2.0 * df) / nt
    return [
        OracleRow("FE", N, T, df / nt - 1.0, sd_fe, chi_square_coverage(N, T, 1.0, level), "analytic"),
        OracleRow(
            "A", N, T, kappa * df / nt - 1.0, kappa * sd_fe,
            chi_square_coverage(N, T, kappa, level), "analytic",
        ),
        OracleRow("J", N, T, -1.0 / nt, float("nan"), float("nan"), "analytic"),
        OracleRow(
            "unbiased", N, T, 0.0, math.sqrt(2.0 / df),
            chi_square_coverage(N, T, nt / df, level), "analytic",
        ),
    ]


def two_way_ssr(y: np.ndarray) -> np.ndarray:
    """Sum of squared two-way demeaned values over the last two axes."""
    residual = (
        y
        - y.mean(axis=-1, keepdims=True)
        - y.mean(axis=-2, keepdims=True)
        + y.mean(axis=(-2, -1), keepdims=True)
    )
    return np.square(residual).sum(axis=(-2, -1))


def _variance(y: np.ndarray) -> np.ndarray:
    n, t = y.shape[-2:]
    return two_way_ssr(y) / (n * t)


def neyman_scott_estimates(y: np.ndarray) -> dict[str, np.ndarray]:
    """FE, analytical, split-panel jackknife and second-order jackknife estimates.

    `y` has shape (..., N, T); every estimate has the leading shape. The second-order
    jackknife is 4 b(N, T) - 2 b(N, T/2) - 2 b(N/2, T) + b(N/2, T/2), each term averaged
    over its halves or quarters.
    """
    N, T = y.shape[-2:]
    units = [np.asarray(h) for h in split_halves(range(N))]
    periods = [np.asarray(h) for h in split_halves(range(T))]

    full = _variance(y)
    time_mean = np.mean([_variance(y[..., :, p]) for p in periods], axis=0)
    unit_mean = np.mean([_variance(y[..., u, :]) for u in units], axis=0)
    quarter_mean = np.mean(
        [_variance(y[..., u[:, None], p[None, :]]) for u in units for p in periods], axis=0
    )
    return {
        "FE": full,
        "A": analytical_factor(N, T) * full,
        "J": 3.0 * full - time_mean - unit_mean,
        "J2": 4.0 * full - 2.0 * time_mean - 2.0 * unit_mean + quarter_mean,
    }


def simulated_rows(
    N: int, T: int, reps: int = 50_000, seed: int | None = None, level: float | None = None
) -> list[OracleRow]:
    """Monte Carlo rows for the FE, A, J and J2 estimators with beta = 1."""
    level = settings.confidence_level if level is None else level
    seed = settings.default_seed if seed is None else seed
    _check_cell(N, T)
    if reps < 2:
        raise InvalidSpec(f"simulated oracle needs at least 2 replications, got {reps}")

    rng = np.random.default_rng(seed)
    chunk = max(1, CHUNK_CELLS // (N * T))
    draws: dict[str, list[np.ndarray]] = {}
    done = 0
    while done < reps:
        size = min(chunk, reps - done)
        estimates = neyman_scott_estimates(rng.standard_normal((size, N, T)))
        for name, values in estimates.items():
            draws.setdefault(name, []).append(values)
        done += size

    c = _half_width(N, T, level)
    rows = []
    for name, chunks in draws.items():
        values = np.concatenate(chunks)
        sd = float(values.std(ddof=1))
        covered = np.abs(values - 1.0) <= c * values
        rows.append(OracleRow(
            estimator=name,
            N=N,
            T=T,
            bias=float(values.mean() - 1.0),
            sd=sd,
            coverage=float(covered.mean()),
            source="simulated",
            reps=reps,
            mc_se=sd / math.sqrt(reps),
        ))
    logger.info(f"Neyman-Scott simulation N={N}, T={T}: {reps} replications")
    return rows


def neyman_scott_oracle(
    N: int,
    T: int,
    level: float | None = None,
    simulate: bool = False,
    reps: int = 50_000,
    seed: int | None = None,
) -> list[OracleRow]:
    """Analytic rows for (N, T), followed by simulated rows when `simulate` is set."""
    rows = analytic_rows(N, T, level)
    if simulate:
        rows += simulated_rows(N, T, reps, seed, level)
    return rows


def _check_cell(N: int, T: int) -> None:
    if N < 2 or T < 2:
        raise InvalidSpec(f"Neyman-Scott oracle needs N >= 2 and T >= 2, got N={N}, T={T}")
