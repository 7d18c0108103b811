"""Clamped B-spline bases and tensor-product surface evaluation.

Grids of points (data or control nets) are plain arrays of shape
``(rows, cols, dim)`` stored row-major, with the first axis following the
``u`` direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp

from splinefit.errors import OutOfDomainError

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Clamped, nondecreasing knot sequence of a given degree."""

    degree: int
    knots: FloatArray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=np.float64)
        if knots.ndim != 1:
            raise ValueError("knots must be one-dimensional")
        object.__setattr__(self, "knots", knots)
        p = self.degree
        if int(p) != p or p < 0:
            raise ValueError(f"degree must be a nonnegative integer, got {p!r}")
        if knots.size < 2 * (p + 1):
            raise ValueError(f"need at least {2 * (p + 1)} knots for degree {p}, got {knots.size}")
        if not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-(p + 1) :] != knots[-1]):
            raise ValueError("knot vector must be clamped")
        if not knots[0] < knots[-1]:
            raise ValueError("knot vector has an empty domain")

    @property
    def num_basis(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def interior(self) -> FloatArray:
        p = self.degree
        return self.knots[p + 1 : self.knots.size - p - 1]

    def __eq__(self, other):
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.knots, other.knots)

    def __repr__(self):
        return f"KnotVector(degree={self.degree}, knots={self.knots.tolist()})"


@dataclass(frozen=True, eq=False)
class ParamGrid:
    """Parameter values of a rectangular data grid, one sequence per direction."""

    u: FloatArray
    v: FloatArray

    def __post_init__(self):
        for name in ("u", "v"):
            vals = np.asarray(getattr(self, name), dtype=np.float64)
            if vals.ndim != 1 or vals.size == 0:
                raise ValueError(f"{name} parameters must be a nonempty 1-D sequence")
            if np.any(np.diff(vals) <= 0):
                raise ValueError(f"{name} parameters must be strictly increasing")
            if vals[0] < 0.0 or vals[-1] > 1.0:
                raise ValueError(f"{name} parameters must lie in [0, 1]")
            object.__setattr__(self, name, vals)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.size, self.v.size

    @classmethod
    def uniform(cls, rows: int, cols: int) -> ParamGrid:
        return cls(uniform_params(rows), uniform_params(cols))


@dataclass(frozen=True)
class BasisRow:
    """Nonzero basis values at one parameter: ``values[a]`` belongs to basis ``first_index + a``."""

    first_index: int
    values: FloatArray


def uniform_params(count: int) -> FloatArray:
    """Equally spaced parameters ``0, 1/(count-1), ..., 1``."""
    if int(count) != count or count < 2:
        raise ValueError(f"count must be an integer >= 2, got {count!r}")
    out = np.arange(count, dtype=np.float64) / (count - 1)
    out[-1] = 1.0
    return out


def stride_indices(num_params: int, num_ctrl: int) -> npt.NDArray[np.intp]:
    """Indices ``floor(k (num_params-1) / (num_ctrl-1))`` for ``k = 0..num_ctrl-1``."""
    if num_ctrl == 1:
        return np.zeros(1, dtype=np.intp)
    k = np.arange(num_ctrl)
    return (k * (num_params - 1)) // (num_ctrl - 1)


def averaging_knots(params, degree: int, num_ctrl: int) -> KnotVector:
    """Clamped knot vector whose interior knots average the parameters.

    ``num_ctrl`` parameters are first picked with a uniform stride; interior
    knot ``j`` is then the mean of selected parameters ``j .. j+degree-1``.
    With as many controls as parameters this is the classical averaging rule
    used for interpolation. Degree 0 falls back to midpoints.
    """
    params = np.asarray(params, dtype=np.float64)
    if int(degree) != degree or degree < 0:
        raise ValueError(f"degree must be a nonnegative integer, got {degree!r}")
    if num_ctrl <= degree:
        raise ValueError(f"num_ctrl ({num_ctrl}) must exceed degree ({degree})")
    if num_ctrl > params.size:
        raise ValueError(
            f"num_ctrl ({num_ctrl}) exceeds the number of parameters ({params.size}); "
            "the fit would be underdetermined"
        )
    if params.size > 1 and np.any(np.diff(params) <= 0):
        raise ValueError("params must be strictly increasing")
    if params[0] < 0.0 or params[-1] > 1.0:
        raise ValueError("params must lie in [0, 1]")

    selected = params[stride_indices(params.size, num_ctrl)]
    n_interior = num_ctrl - degree - 1
    if n_interior == 0:
        interior = np.empty(0)
    elif degree == 0:
        interior = 0.5 * (selected[:-1] + selected[1:])
    else:
        windows = np.lib.stride_tricks.sliding_window_view(selected[1:-1], degree)
        interior = windows[:n_interior].mean(axis=1)
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    return KnotVector(degree, knots)


def _check_domain(kv: KnotVector, t: FloatArray) -> None:
    lo, hi = kv.domain
    bad = ~((t >= lo) & (t <= hi))
    if np.any(bad):
        raise OutOfDomainError(f"parameter {t[bad][0]!r} outside knot domain [{lo}, {hi}]")


def _find_spans(kv: KnotVector, t: FloatArray) -> npt.NDArray[np.intp]:
    # The right end of the domain goes into the last nonempty span.
    spans = np.searchsorted(kv.knots, t, side="right") - 1
    return np.clip(spans, kv.degree, kv.num_basis - 1)


def find_span(kv: KnotVector, t: float) -> int:
    """Index ``s`` with ``knots[s] <= t < knots[s+1]``; ``t`` at the right end maps to the last span."""
    arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    _check_domain(kv, arr)
    return int(_find_spans(kv, arr)[0])


def basis_rows(kv: KnotVector, t) -> tuple[npt.NDArray[np.intp], FloatArray]:
    """Vectorized Cox-de Boor evaluation of all nonzero basis functions.

    Returns ``(first, values)`` where ``values[k, a]`` is basis function
    ``first[k] + a`` evaluated at ``t[k]``; ``values`` has ``degree + 1`` columns.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    _check_domain(kv, t)
    p = kv.degree
    U = kv.knots
    span = _find_spans(kv, t)

    N = np.zeros((t.size, p + 1))
    N[:, 0] = 1.0
    left = np.empty((t.size, p + 1))
    right = np.empty((t.size, p + 1))
    for j in range(1, p + 1):
        left[:, j] = t - U[span + 1 - j]
        right[:, j] = U[span + j] - t
        saved = np.zeros(t.size)
        for r in range(j):
            temp = N[:, r] / (right[:, r + 1] + left[:, j - r])
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    # clamped ends interpolate; pin them exactly instead of trusting x * (1/x)
    lo, hi = kv.domain
    N[t == lo] = np.eye(p + 1)[0]
    N[t == hi] = np.eye(p + 1)[p]
    return span - p, N


def basis_row(kv: KnotVector, t: float) -> BasisRow:
    first, values = basis_rows(kv, t)
    return BasisRow(int(first[0]), values[0])


def collocation_matrix(kv: KnotVector, params) -> sp.csr_matrix:
    """Sparse matrix with entry ``(k, i) = B_i(params[k])``."""
    params = np.atleast_1d(np.asarray(params, dtype=np.float64))
    first, values = basis_rows(kv, params)
    width = kv.degree + 1
    rows = np.repeat(np.arange(params.size), width)
    cols = (first[:, None] + np.arange(width)).ravel()
    return sp.csr_matrix((values.ravel(), (rows, cols)), shape=(params.size, kv.num_basis))


def _as_net(net, kv_u: KnotVector, kv_v: KnotVector) -> FloatArray:
    net = np.asarray(net, dtype=np.float64)
    if net.ndim != 3:
        raise ValueError(f"control net must have shape (m, n, dim), got {net.shape}")
    expected = (kv_u.num_basis, kv_v.num_basis)
    if net.shape[:2] != expected:
        raise ValueError(f"control net is {net.shape[:2]} but knot vectors need {expected}")
    return net


def eval_surface(net, kv_u: KnotVector, kv_v: KnotVector, u: float, v: float) -> FloatArray:
    """Point on the tensor-product surface, summing the (p+1)(q+1) nonzero terms."""
    net = _as_net(net, kv_u, kv_v)
    ru = basis_row(kv_u, u)
    rv = basis_row(kv_v, v)
    block = net[
        ru.first_index : ru.first_index + kv_u.degree + 1,
        rv.first_index : rv.first_index + kv_v.degree + 1,
    ]
    return np.einsum("a,b,abd->d", ru.values, rv.values, block)


class TensorBasis:
    """Collocation of a tensor-product basis on a parameter grid.

    Stores the two sparse one-directional factors so that the full
    collocation matrix is their Kronecker product and is never formed.
    Both :meth:`evaluate` and :meth:`adjoint` cost
    ``O(rows * cols * (degree + 1))`` per coordinate.
    """

    def __init__(self, kv_u: KnotVector, kv_v: KnotVector, grid: ParamGrid):
        self.kv_u = kv_u
        self.kv_v = kv_v
        self.grid = grid
        self.Bu = collocation_matrix(kv_u, grid.u)
        self.Bv = collocation_matrix(kv_v, grid.v)
        self.BuT = self.Bu.T.tocsr()
        self.BvT = self.Bv.T.tocsr()

    @property
    def data_shape(self) -> tuple[int, int]:
        return self.grid.shape

    @property
    def net_shape(self) -> tuple[int, int]:
        return self.kv_u.num_basis, self.kv_v.num_basis

    def evaluate(self, net) -> FloatArray:
        """Surface points at every grid parameter, shape ``(rows, cols, dim)``."""
        net = _as_net(net, self.kv_u, self.kv_v)
        m, n, d = net.shape
        rows, cols = self.data_shape
        # v first, so only the control-sized intermediate is ever transposed
        tmp = (self.Bv @ net.transpose(1, 0, 2).reshape(n, m * d)).reshape(cols, m, d)
        tmp = tmp.transpose(1, 0, 2).reshape(m, cols * d)
        return (self.Bu @ tmp).reshape(rows, cols, d)

    def adjoint(self, field) -> FloatArray:
        """Transpose action: ``out[i, j] = sum_{r,c} Bu[r, i] Bv[c, j] field[r, c]``."""
        field = np.asarray(field, dtype=np.float64)
        if field.ndim != 3 or field.shape[:2] != self.data_shape:
            raise ValueError(f"field shape {field.shape} does not match grid {self.data_shape}")
        rows, cols, d = field.shape
        m, n = self.net_shape
        tmp = (self.BuT @ field.reshape(rows, cols * d)).reshape(m, cols, d)
        tmp = tmp.transpose(1, 0, 2).reshape(cols, m * d)
        out = (self.BvT @ tmp).reshape(n, m, d)
        return np.ascontiguousarray(out.transpose(1, 0, 2))


def sample_surface(net, kv_u: KnotVector, kv_v: KnotVector, grid: ParamGrid) -> FloatArray:
    return TensorBasis(kv_u, kv_v, grid).evaluate(net)
