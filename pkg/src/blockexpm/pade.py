"""Diagonal Pade approximants of the exponential, with scaling and squaring.

The baseline routine here evaluates exp(a) as r(2^-s a)^(2^s) where r = p/q
is the degree (m, m) diagonal Pade approximant.  The numerator polynomial is
evaluated from explicitly formed matrix powers, in ascending monomial order.
That evaluation order is deliberate: the incremental engine extends the same
polynomials column by column, and its diagonal blocks must reproduce the
baseline arithmetic exactly, operation for operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import LuFactors, as_matrix, lu_factor, lu_solve, one_norm

# 1-norm threshold for the degree-13 diagonal approximant: scaling halves the
# norm until it drops below this value.
THETA_13 = 5.371920351148152

# Degrees with a well-established backward error analysis at THETA-style
# thresholds.  pade_coefficients itself is generic in the degree.
SUPPORTED_DEGREES = (3, 5, 7, 9, 13)


@dataclass(frozen=True)
class PadeCoefficients:
    """Coefficients of the degree (m, m) diagonal Pade approximant.

    ``alpha[l]`` multiplies z^l in the numerator p; the denominator q has
    coefficients ``beta[l] = (-1)^l alpha[l]``, so q(z) = p(-z).
    """

    degree: int
    alpha: np.ndarray
    beta: np.ndarray


def pade_coefficients(m: int) -> PadeCoefficients:
    """Numerator and denominator coefficients of the (m, m) approximant.

    Uses the recurrence alpha_0 = 1,
    alpha_{l+1} = alpha_l * (m - l) / ((2m - l) * (l + 1)).

    Raises
    ------
    ValueError
        For a degree that is not a positive integer.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValueError(f"unsupported Pade degree {m!r}: need a positive integer")
    alpha = np.empty(m + 1)
    alpha[0] = 1.0
    for l in range(m):
        alpha[l + 1] = alpha[l] * (m - l) / ((2 * m - l) * (l + 1))
    beta = alpha * (-1.0) ** np.arange(m + 1)
    alpha.setflags(write=False)
    beta.setflags(write=False)
    return PadeCoefficients(degree=m, alpha=alpha, beta=beta)


@dataclass(frozen=True)
class ScalingChoice:
    """Scaling power selected for a matrix: 2^-s * norm <= theta."""

    s: int
    norm: float
    theta: float


def scaling_power(norm: float, theta: float = THETA_13) -> int:
    """Smallest integer s >= 0 with 2^-s * norm <= theta.

    Halving is exact in binary floating point, so the boundary cases behave
    predictably: norm == theta gives s = 0.
    """
    if not np.isfinite(norm) or norm < 0:
        raise ValueError(f"matrix norm must be finite and nonnegative, got {norm}")
    if theta <= 0 or not np.isfinite(theta):
        raise ValueError(f"scaling threshold must be positive, got {theta}")
    s = 0
    x = norm
    while x > theta:
        x *= 0.5
        s += 1
    return s


def select_scaling(a: np.ndarray, theta: float = THETA_13) -> ScalingChoice:
    """Choose the scaling power for a matrix from its 1-norm."""
    norm = one_norm(a)
    return ScalingChoice(s=scaling_power(norm, theta), norm=norm, theta=theta)


def evaluate_poly(powers: list[np.ndarray], coeffs: np.ndarray) -> np.ndarray:
    """Sum coeffs[l] * powers[l] in ascending order of l.

    ``powers[0]`` must be the identity.  Every caller that needs bitwise
    agreement with the baseline goes through this helper.
    """
    acc = coeffs[0] * powers[0]
    for l in range(1, len(coeffs)):
        acc += coeffs[l] * powers[l]
    return acc


@dataclass
class ExpmIntermediates:
    """Everything the scaling-and-squaring pass computes along the way.

    The incremental engine seeds its caches from these fields, which makes
    its single-block state bitwise identical to a baseline call.

    Attributes
    ----------
    s : scaling power actually used.
    scaled : the scaled input 2^-s * a.
    p, q : numerator and denominator polynomials evaluated at ``scaled``.
    lu : LU factors of q.
    squares : list of length s + 1 holding r(scaled)^(2^l) for l = 0..s;
        the last entry is the final exponential.
    """

    s: int
    scaled: np.ndarray
    p: np.ndarray
    q: np.ndarray
    lu: LuFactors
    squares: list[np.ndarray]

    @property
    def result(self) -> np.ndarray:
        return self.squares[-1]


def _expm_core(a: np.ndarray, pade: PadeCoefficients, s: int) -> ExpmIntermediates:
    # a is trusted (validated by callers); s fixed by the caller.
    m = pade.degree
    scaled = a * 2.0 ** (-s)
    d = scaled.shape[0]
    powers = [np.eye(d)]
    for _ in range(m):
        powers.append(powers[-1] @ scaled)
    p = evaluate_poly(powers, pade.alpha)
    q = evaluate_poly(powers, pade.beta)
    lu = lu_factor(q)
    squares = [lu_solve(lu, p)]
    for _ in range(s):
        squares.append(squares[-1] @ squares[-1])
    return ExpmIntermediates(s=s, scaled=scaled, p=p, q=q, lu=lu, squares=squares)


def expm_baseline(
    a,
    degree: int = 13,
    theta: float = THETA_13,
    s: int | None = None,
) -> np.ndarray:
    """Matrix exponential by Pade scaling and squaring.

    Parameters
    ----------
    a : array_like
        Square matrix with finite entries.
    degree : int
        Diagonal Pade degree, one of 3, 5, 7, 9, 13.  The default threshold
        ``theta`` is tuned for degree 13; pass a matching threshold when
        using a lower degree.
    theta : float
        Norm threshold used to pick the scaling power when ``s`` is None.
    s : int, optional
        Force this scaling power instead of selecting one from the norm.

    Returns
    -------
    numpy.ndarray
        Approximation of exp(a).
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expm needs a square matrix, got {a.shape}")
    if degree not in SUPPORTED_DEGREES:
        raise ValueError(f"unsupported Pade degree {degree}, expected one of {SUPPORTED_DEGREES}")
    if s is None:
        s = scaling_power(one_norm(a), theta)
    elif not isinstance(s, (int, np.integer)) or s < 0:
        raise ValueError(f"scaling power must be a nonnegative integer, got {s!r}")
    return _expm_core(a, pade_coefficients(degree), int(s)).result
