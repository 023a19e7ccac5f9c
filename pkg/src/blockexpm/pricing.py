"""European call pricing under the Jacobi model via Hermite series.

The log price density at the horizon is expanded against a Gaussian
auxiliary density N(muw, sigmaw^2): the option price becomes

    price = sum_n  l_n * f_n,

where l_n is a Hermite moment of the model, computed from the matrix
exponential of the scaled generator on degree-n polynomials, and f_n is a
Fourier coefficient of the discounted payoff against the weighted Hermite
functions.  The moments for n = 0, 1, 2, ... need exp(tau G_n) for the
growing family of generator matrices, which is exactly the workload the
incremental engine is built for: each degree adds one block column.

The series is truncated once a term's magnitude falls below a relative
tolerance; the truncation heuristic follows the partial sum itself.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .blocks import BlockTriangularMatrix
from .generators import (
    JacobiParams,
    basis_size,
    basis_values,
    generator_block_columns,
    jacobi_norm_bound,
    jacobi_spec,
)
from .incremental import run_adaptive, run_fixed
from .pade import THETA_13, scaling_power

# Tiny floor that keeps the relative termination test meaningful when the
# accumulated price is still zero.
_PRICE_FLOOR = 1e-300


def hermite_y_coefficients(n: int, muw: float, sigmaw: float) -> np.ndarray:
    """Coefficients in y of (1/sqrt(n!)) h_n((y - muw) / sigmaw).

    h_n is the probabilists' Hermite polynomial, built with the recurrence
    h_{j+1}(x) = x h_j(x) - j h_{j-1}(x).  Entry p of the result multiplies
    y^p.
    """
    if n < 0:
        raise ValueError(f"degree must be nonnegative, got {n}")
    if sigmaw <= 0:
        raise ValueError(f"sigmaw must be positive, got {sigmaw}")
    # x = (y - muw) / sigmaw; multiply-by-x maps coefficient vectors via a
    # shift (for the y factor) and a scalar combination.
    prev = np.array([1.0])  # h_0
    if n == 0:
        return prev
    cur = np.array([-muw / sigmaw, 1.0 / sigmaw])  # h_1(x(y))
    for j in range(1, n):
        nxt = np.zeros(j + 2)
        nxt[1:] += cur / sigmaw
        nxt[: j + 1] += -(muw / sigmaw) * cur
        nxt[: j] += -j * prev
        prev, cur = cur, nxt
    return cur / math.sqrt(math.factorial(n))


def hermite_vector(n: int, muw: float, sigmaw: float) -> np.ndarray:
    """Coordinates of the normalized Hermite polynomial in the graded
    basis of two-variable polynomials of degree <= n.

    The polynomial only involves the log price, so the nonzero entries sit
    at the pure-y monomials y^p, p = 0..n.
    """
    coeffs = hermite_y_coefficients(n, muw, sigmaw)
    vec = np.zeros(basis_size(2, n))
    for p, c in enumerate(coeffs):
        vec[p * (p + 1) // 2] = c  # graded index of y^p
    return vec


def _normalized_hermite_values(x: np.ndarray, n: int) -> np.ndarray:
    """h_n(x) / sqrt(n!) evaluated pointwise by the stable recurrence.

    Expanding the polynomial in powers of y and summing monomials loses
    tens of digits to cancellation once n is large; the normalized
    three-term recurrence keeps the evaluation accurate.
    """
    prev = np.ones_like(x)
    if n == 0:
        return prev
    cur = x.copy()
    for j in range(1, n):
        prev, cur = cur, (x * cur - math.sqrt(j) * prev) / math.sqrt(j + 1)
    return cur


def _call_integrand(y: np.ndarray, n: int, logstrike: float, muw: float,
                    sigmaw: float) -> np.ndarray:
    payoff = np.exp(y) - math.exp(logstrike)
    herm = _normalized_hermite_values((y - muw) / sigmaw, n)
    density = np.exp(-((y - muw) ** 2) / (2 * sigmaw**2)) / (sigmaw * math.sqrt(2 * math.pi))
    return payoff * herm * density


def fourier_coefficient(
    n: int,
    logstrike: float,
    muw: float,
    sigmaw: float,
    r: float = 0.0,
    tau: float = 0.0,
) -> float:
    """Payoff Fourier coefficient against the weighted Hermite functions.

    Computes e^(-r tau) * integral over (logstrike, inf) of
    (e^y - e^logstrike) h~_n(y) phi(y) dy with phi the N(muw, sigmaw^2)
    density and h~_n the normalized Hermite polynomial of
    :func:`hermite_y_coefficients`.

    The integrand has a kink at the strike, so the quadrature is
    Gauss-Legendre on [logstrike, b] where b covers the oscillatory range
    of the Hermite factor plus a wide Gaussian tail margin.  Node counts
    are doubled from 64 to 512 until two successive values agree to
    1e-12 relative (with an absolute floor of 1).
    """
    if sigmaw <= 0:
        raise ValueError(f"sigmaw must be positive, got {sigmaw}")
    upper = muw + sigmaw * (2.0 * math.sqrt(max(n, 1)) + 12.0)
    if upper <= logstrike:
        return 0.0
    discount = math.exp(-r * tau)
    half = 0.5 * (upper - logstrike)
    mid = 0.5 * (upper + logstrike)
    prev = None
    increment = math.inf
    for nodes in (64, 128, 256, 512):
        x, w = np.polynomial.legendre.leggauss(nodes)
        val = half * float(w @ _call_integrand(mid + half * x, n, logstrike, muw, sigmaw))
        if prev is not None:
            increment = abs(val - prev)
            if increment <= 1e-12 * max(1.0, abs(val)):
                return discount * val
        prev = val
    raise RuntimeError(
        f"payoff quadrature did not converge at 512 nodes for degree {n}; "
        f"last increment {increment:.3e}"
    )


def conditional_moment(exp_tau_g, x0, pvec: np.ndarray) -> float:
    """Conditional expectation of a polynomial at horizon tau.

    ``exp_tau_g`` is exp(tau G_n) on the graded basis (array or block
    matrix), ``x0`` the state at time zero, and ``pvec`` the coordinate
    vector of the polynomial.  The result is the basis evaluation row at
    x0 applied to exp(tau G_n) pvec.
    """
    mat = exp_tau_g.data if isinstance(exp_tau_g, BlockTriangularMatrix) else exp_tau_g
    size = mat.shape[0]
    pvec = np.asarray(pvec, dtype=np.float64)
    if mat.shape != (size, size) or pvec.shape != (size,):
        raise ValueError(f"shape mismatch: matrix {mat.shape}, vector {pvec.shape}")
    d = len(tuple(x0))
    n = 0
    while basis_size(d, n) < size:
        n += 1
    if basis_size(d, n) != size:
        raise ValueError(f"matrix size {size} is not a full graded basis in {d} variables")
    return float(basis_values(d, n, x0) @ (mat @ pvec))


@dataclass(frozen=True)
class PriceLedgerRow:
    """One term of the Hermite series with its running aggregates."""

    n: int
    l_n: float
    f_n: float
    term: float
    partial_price: float
    cum_seconds: float


@dataclass(frozen=True)
class PriceResult:
    price: float
    terminal_degree: int
    converged: bool
    rows: tuple[PriceLedgerRow, ...]
    seconds: float


@dataclass(frozen=True)
class PricingConfig:
    """Inputs of a call price computation under the Jacobi model.

    ``scaling`` is None for norm-driven adaptive scaling or a fixed
    nonnegative power.  ``eps`` is the relative truncation tolerance of
    the Hermite series; eps = 0 disables the test and runs to ``n_max``.
    """

    params: JacobiParams
    y0: float
    v0: float
    tau: float
    logstrike: float
    muw: float
    sigmaw: float
    eps: float = 1e-3
    n_max: int = 100
    scaling: int | None = None
    theta: float = THETA_13

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.sigmaw <= 0:
            raise ValueError(f"sigmaw must be positive, got {self.sigmaw}")
        if self.eps < 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        if self.n_max < 0:
            raise ValueError(f"n_max must be nonnegative, got {self.n_max}")
        if not (self.params.vmin <= self.v0 <= self.params.vmax):
            raise ValueError(
                f"v0 must lie in [vmin, vmax] = [{self.params.vmin}, {self.params.vmax}]"
            )


def scaling_from_bound(params: JacobiParams, tau: float, n: int,
                       theta: float = THETA_13) -> int:
    """Scaling power that covers tau * G_n a priori, via the norm bound."""
    return scaling_power(tau * jacobi_norm_bound(params, n), theta)


def hermite_moment(exp_tau_g, cfg: PricingConfig, n: int) -> float:
    """Expected normalized Hermite polynomial of the log price.

    Reads the moment off ``exp_tau_g`` (the exponential of tau G_n on
    the graded degree-n basis): the conditional moment of the polynomial
    whose coordinate vector is :func:`hermite_vector`.
    """
    return conditional_moment(
        exp_tau_g, (cfg.y0, cfg.v0), hermite_vector(n, cfg.muw, cfg.sigmaw)
    )


def price_call(cfg: PricingConfig) -> PriceResult:
    """Price a European call by the truncated Hermite series.

    Degree n contributes l_n * f_n, with l_n read off exp(tau G_n) from
    the incremental engine and f_n from quadrature.  The series stops
    once two consecutive terms satisfy |l_n f_n| <= eps * |price so far|;
    with eps = 0 it runs to n_max.  Requiring two terms guards against
    the parity structure of the series: when the weight is nearly
    centered on the log-price law, odd-degree terms are much smaller
    than their even neighbours long before the tail has decayed, so a
    single small term says nothing about truncation error.  The ledger
    rows record every term, its partial sum, and cumulative wall time.
    """
    spec = jacobi_spec(cfg.params)
    columns = generator_block_columns(spec, max_degree=cfg.n_max, scale=cfg.tau)
    if cfg.scaling is None:
        runner = run_adaptive(columns, theta=cfg.theta)
    else:
        runner = run_fixed(columns, s=cfg.scaling)

    t0 = time.perf_counter()
    price = 0.0
    rows: list[PriceLedgerRow] = []
    converged = False
    terminal = 0
    prev_small = False
    for f, report in runner:
        n = report.step
        l_n = hermite_moment(f, cfg, n)
        f_n = fourier_coefficient(
            n, cfg.logstrike, cfg.muw, cfg.sigmaw, cfg.params.r, cfg.tau
        )
        term = l_n * f_n
        price += term
        terminal = n
        rows.append(
            PriceLedgerRow(
                n=n,
                l_n=l_n,
                f_n=f_n,
                term=term,
                partial_price=price,
                cum_seconds=time.perf_counter() - t0,
            )
        )
        small = cfg.eps > 0 and abs(term) <= cfg.eps * max(abs(price), _PRICE_FLOOR)
        if small and (n == 0 or prev_small):
            # n == 0 compares the sole term against itself, so only
            # eps >= 1 stops immediately; afterwards two consecutive
            # sub-threshold terms are required (see docstring).
            converged = True
            break
        prev_small = small
    return PriceResult(
        price=price,
        terminal_degree=terminal,
        converged=converged,
        rows=tuple(rows),
        seconds=time.perf_counter() - t0,
    )
