"""Generator matrices of polynomial diffusions on graded monomial bases.

A polynomial diffusion in d variables has drift entries of degree at most 1
and squared-diffusion entries of degree at most 2, so its infinitesimal
generator

    G f = 1/2 tr(A grad^2 f) + b . grad f

maps polynomials of total degree n to polynomials of total degree at most
n.  On the graded monomial basis this makes the matrix representation block
upper triangular, with one block per total degree: exactly the nested
structure the incremental exponential engine consumes.

Basis order: monomials are grouped by total degree, ascending; within one
degree the exponent tuples are in descending lexicographic order.  For two
variables (y, v) this reads 1, y, v, y^2, yv, v^2, ...

Model builders for the Jacobi and Heston stochastic volatility models are
included, along with closed-form upper bounds on the 1-norm of their
generator matrices, which let callers pick a scaling power a priori.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .blocks import BlockColumn, Partition

MultiIndex = tuple[int, ...]


class Polynomial:
    """Sparse multivariate polynomial: exponent tuple -> coefficient.

    Zero coefficients are dropped, so equal polynomials have equal term
    maps.  Instances are immutable.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: Mapping[MultiIndex, float] | None = None):
        if dim < 1:
            raise ValueError(f"polynomial dimension must be >= 1, got {dim}")
        clean: dict[MultiIndex, float] = {}
        for k, c in (terms or {}).items():
            k = tuple(int(e) for e in k)
            if len(k) != dim or any(e < 0 for e in k):
                raise ValueError(f"bad exponent tuple {k} for dimension {dim}")
            c = float(c)
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient for {k}")
            if c != 0.0:
                clean[k] = clean.get(k, 0.0) + c
                if clean[k] == 0.0:
                    del clean[k]
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, c: float) -> "Polynomial":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def monomial(cls, k: MultiIndex, c: float = 1.0) -> "Polynomial":
        return cls(len(k), {tuple(k): c})

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return max((sum(k) for k in self.terms), default=-1)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) + c
        return Polynomial(self.dim, out)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if self.dim != other.dim:
                raise ValueError("dimension mismatch")
            out: dict[MultiIndex, float] = {}
            for k1, c1 in self.terms.items():
                for k2, c2 in other.terms.items():
                    k = tuple(a + b for a, b in zip(k1, k2))
                    out[k] = out.get(k, 0.0) + c1 * c2
            return Polynomial(self.dim, out)
        return Polynomial(self.dim, {k: c * float(other) for k, c in self.terms.items()})

    __rmul__ = __mul__

    def diff(self, i: int) -> "Polynomial":
        """Partial derivative with respect to variable i."""
        if not 0 <= i < self.dim:
            raise ValueError(f"variable index {i} out of range for dim {self.dim}")
        out = {}
        for k, c in self.terms.items():
            if k[i] > 0:
                kk = k[:i] + (k[i] - 1,) + k[i + 1 :]
                out[kk] = out.get(kk, 0.0) + c * k[i]
        return Polynomial(self.dim, out)

    def __call__(self, point) -> float:
        val = 0.0
        for k, c in self.terms.items():
            val += c * math.prod(x**e for x, e in zip(point, k))
        return val

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.dim == other.dim
            and self.terms == other.terms
        )

    def __repr__(self) -> str:
        return f"Polynomial(dim={self.dim}, terms={self.terms})"


# -- graded basis ----------------------------------------------------------


@lru_cache(maxsize=None)
def degree_monomials(d: int, j: int) -> tuple[MultiIndex, ...]:
    """All exponent tuples of total degree j in descending lex order."""
    if d < 1 or j < 0:
        raise ValueError(f"bad arguments d={d}, j={j}")
    if d == 1:
        return ((j,),)
    out = []
    for e in range(j, -1, -1):
        out.extend((e,) + rest for rest in degree_monomials(d - 1, j - e))
    return tuple(out)


@lru_cache(maxsize=None)
def _degree_positions(d: int, j: int) -> dict[MultiIndex, int]:
    return {k: i for i, k in enumerate(degree_monomials(d, j))}


def basis_size(d: int, n: int) -> int:
    """Dimension of the space of d-variate polynomials of degree <= n."""
    if n < 0:
        return 0
    return math.comb(n + d, d)


def degree_block_sizes(d: int, n: int) -> tuple[int, ...]:
    """Number of monomials of each total degree 0..n."""
    return tuple(math.comb(j + d - 1, d - 1) for j in range(n + 1))


def basis_partition(d: int, n: int) -> Partition:
    return Partition(degree_block_sizes(d, n))


def basis_index(k: MultiIndex) -> int:
    """Position of a monomial in the graded basis of its own dimension."""
    d = len(k)
    j = sum(k)
    return basis_size(d, j - 1) + _degree_positions(d, j)[tuple(k)]


def basis_multi_index(d: int, i: int) -> MultiIndex:
    """Inverse of :func:`basis_index`."""
    if i < 0:
        raise IndexError(f"basis index must be nonnegative, got {i}")
    j = 0
    while basis_size(d, j) <= i:
        j += 1
    return degree_monomials(d, j)[i - basis_size(d, j - 1)]


def basis_values(d: int, n: int, point) -> np.ndarray:
    """Evaluate every basis monomial of degree <= n at a point."""
    point = tuple(float(x) for x in point)
    if len(point) != d:
        raise ValueError(f"point has {len(point)} coordinates, expected {d}")
    vals = np.empty(basis_size(d, n))
    i = 0
    for j in range(n + 1):
        for k in degree_monomials(d, j):
            vals[i] = math.prod(x**e for x, e in zip(point, k))
            i += 1
    return vals


# -- polynomial diffusion operators ----------------------------------------


@dataclass(frozen=True)
class PolynomialOperatorSpec:
    """Second-order operator G f = 1/2 tr(a grad^2 f) + b . grad f.

    ``a`` is the d x d symmetric squared-diffusion matrix with polynomial
    entries of degree <= 2; ``b`` is the drift vector with entries of
    degree <= 1.  These degree bounds are exactly what keeps the operator
    degree-preserving on polynomials.
    """

    dim: int
    a: tuple[tuple[Polynomial, ...], ...]
    b: tuple[Polynomial, ...]

    def __post_init__(self):
        d = self.dim
        a = tuple(tuple(row) for row in self.a)
        b = tuple(self.b)
        if len(a) != d or any(len(row) != d for row in a):
            raise ValueError(f"a must be {d}x{d}")
        if len(b) != d:
            raise ValueError(f"b must have {d} entries")
        for i in range(d):
            if b[i].dim != d or b[i].degree > 1:
                raise ValueError(f"drift entry {i} must have degree <= 1")
            for j in range(d):
                if a[i][j].dim != d or a[i][j].degree > 2:
                    raise ValueError(f"diffusion entry ({i},{j}) must have degree <= 2")
                if a[i][j] != a[j][i]:
                    raise ValueError(f"diffusion matrix not symmetric at ({i},{j})")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


def apply_generator(spec: PolynomialOperatorSpec, f: Polynomial) -> Polynomial:
    """Apply the operator to a polynomial."""
    if f.dim != spec.dim:
        raise ValueError("dimension mismatch between operator and polynomial")
    out = Polynomial.zero(spec.dim)
    for i in range(spec.dim):
        di = f.diff(i)
        out = out + spec.b[i] * di
        for j in range(spec.dim):
            out = out + 0.5 * (spec.a[i][j] * di.diff(j))
    return out


def _column_entries(spec: PolynomialOperatorSpec, k: MultiIndex):
    """(row index, coefficient) pairs of the generator's action on x^k."""
    g = apply_generator(spec, Polynomial.monomial(k))
    deg = sum(k)
    for mi, c in g.terms.items():
        if sum(mi) > deg:
            raise ValueError(
                f"operator raised the degree of monomial {k}: produced {mi}; "
                "the coefficient degree bounds are violated"
            )
        yield basis_index(mi), c


def build_generator_matrix(
    spec: PolynomialOperatorSpec, n: int
) -> tuple[np.ndarray, Partition]:
    """Matrix of the operator on the graded basis of degree-n polynomials.

    Returns the dense matrix together with its degree partition.  The
    matrix is block upper triangular by construction.
    """
    if n < 0:
        raise ValueError(f"degree must be nonnegative, got {n}")
    d = spec.dim
    size = basis_size(d, n)
    g = np.zeros((size, size))
    i = 0
    for j in range(n + 1):
        for k in degree_monomials(d, j):
            for row, c in _column_entries(spec, k):
                g[row, i] = c
            i += 1
    return g, basis_partition(d, n)


def generator_block_columns(
    spec: PolynomialOperatorSpec, max_degree: int | None = None, scale: float = 1.0
):
    """Yield the generator matrix one degree block at a time.

    Block column j covers the monomials of total degree j; entries are
    multiplied by ``scale`` (e.g. a time horizon).  With ``max_degree``
    None the stream is unbounded.
    """
    d = spec.dim
    j = 0
    while max_degree is None or j <= max_degree:
        monos = degree_monomials(d, j)
        b = len(monos)
        prev = basis_size(d, j - 1)
        top = np.zeros((prev, b))
        diag = np.zeros((b, b))
        for local, k in enumerate(monos):
            for row, c in _column_entries(spec, k):
                if row < prev:
                    top[row, local] = c * scale
                else:
                    diag[row - prev, local] = c * scale
        yield BlockColumn(top, diag, check_finite=False)
        j += 1


# -- stochastic volatility models ------------------------------------------


@dataclass(frozen=True)
class JacobiParams:
    """Jacobi stochastic volatility model parameters.

    The variance process lives in [vmin, vmax]; kappa and theta are the
    mean-reversion speed and level, sigma the vol-of-vol, r the interest
    rate, rho the spot-vol correlation.
    """

    kappa: float
    theta: float
    sigma: float
    r: float
    rho: float
    vmin: float
    vmax: float

    def __post_init__(self):
        if not 0 <= self.vmin < self.vmax:
            raise ValueError(f"need 0 <= vmin < vmax, got [{self.vmin}, {self.vmax}]")
        if self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        if not self.vmin <= self.theta <= self.vmax:
            raise ValueError(
                f"theta must lie in [vmin, vmax] = [{self.vmin}, {self.vmax}], "
                f"got {self.theta}"
            )
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.r < 0:
            raise ValueError(f"r must be nonnegative, got {self.r}")
        if not -1 <= self.rho <= 1:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class HestonParams:
    """Heston model parameters; the variance process lives on [0, inf)."""

    kappa: float
    theta: float
    sigma: float
    r: float
    rho: float

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        if self.theta < 0:
            raise ValueError(f"theta must be nonnegative, got {self.theta}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.r < 0:
            raise ValueError(f"r must be nonnegative, got {self.r}")
        if not -1 <= self.rho <= 1:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")


def _drift(r: float, kappa: float, theta: float) -> tuple[Polynomial, Polynomial]:
    # state is (y, v) with y the log price and v the variance:
    # dy has drift r - v/2, dv has drift kappa (theta - v)
    by = Polynomial(2, {(0, 0): r, (0, 1): -0.5})
    bv = Polynomial(2, {(0, 0): kappa * theta, (0, 1): -kappa})
    return by, bv


def jacobi_spec(params: JacobiParams) -> PolynomialOperatorSpec:
    """Generator of the Jacobi model as a polynomial operator.

    The squared diffusion uses Q(v) = (v - vmin)(vmax - v) / S with
    S = (sqrt(vmax) - sqrt(vmin))^2.
    """
    p = params
    s_den = (math.sqrt(p.vmax) - math.sqrt(p.vmin)) ** 2
    qv = Polynomial(
        2,
        {
            (0, 2): -1.0 / s_den,
            (0, 1): (p.vmax + p.vmin) / s_den,
            (0, 0): -p.vmax * p.vmin / s_den,
        },
    )
    a11 = Polynomial(2, {(0, 1): 1.0})
    a12 = p.rho * p.sigma * qv
    a22 = p.sigma**2 * qv
    return PolynomialOperatorSpec(
        dim=2, a=((a11, a12), (a12, a22)), b=_drift(p.r, p.kappa, p.theta)
    )


def heston_spec(params: HestonParams) -> PolynomialOperatorSpec:
    """Generator of the Heston model as a polynomial operator."""
    p = params
    a11 = Polynomial(2, {(0, 1): 1.0})
    a12 = Polynomial(2, {(0, 1): p.rho * p.sigma})
    a22 = Polynomial(2, {(0, 1): p.sigma**2})
    return PolynomialOperatorSpec(
        dim=2, a=((a11, a12), (a12, a22)), b=_drift(p.r, p.kappa, p.theta)
    )


def jacobi_norm_bound(params: JacobiParams, n: int) -> float:
    """Upper bound on the 1-norm of the degree-n Jacobi generator matrix.

    The bound grows quadratically in n and is what callers use to fix a
    scaling power before any matrix is formed.
    """
    p = params
    s_den = (math.sqrt(p.vmax) - math.sqrt(p.vmin)) ** 2
    alpha = p.sigma * (1 + p.vmin * p.vmax + p.vmax + p.vmin) / (2 * s_den)
    return n * (p.r + p.kappa + p.kappa * p.theta - p.sigma * alpha) + 0.5 * n**2 * (
        1 + abs(p.rho) * alpha + 2 * p.sigma * alpha
    )


def heston_norm_bound(params: HestonParams, n: int) -> float:
    """Upper bound on the 1-norm of the degree-n Heston generator matrix."""
    p = params
    return n * (p.r + p.kappa + p.kappa * p.theta - p.sigma**2 / 2) + 0.5 * n**2 * (
        1 + abs(p.rho) * p.sigma / 2 + p.sigma**2
    )
