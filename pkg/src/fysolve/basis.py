"""Radial grids, Hermite spline bases and tensor-product coefficient blocks.

Every radial coordinate q lives on [0, q_max], cut into n intervals by nodes
q_0 = 0 < q_1 < ... < q_n = q_max.  Each node carries two cubic Hermite
splines, a value-type one and a derivative-type one, supported on the (at
most) two intervals touching the node.  Writing S_0, S_1, ..., S_{2n+1} for
the family, the defining properties are

    S_{2i}(q_j)   = delta_ij,    S_{2i}'(q_j)   = 0,
    S_{2i+1}(q_j) = 0,           S_{2i+1}'(q_j) = delta_ij,

so a spline sum interpolates values and first derivatives directly, the
family is C1, and it reproduces any cubic polynomial exactly.  Boundary
functionals (value or derivative at a node) are one- or two-entry rows in
coefficient space, which the collocation operators rely on.

Basis functions are extended by zero outside [0, q_max]; whether a caller
treats an out-of-range point as an error or as zero is a policy choice made
per evaluation.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid1D",
    "SplineBasis",
    "QuadratureRule",
    "TensorCoefficients",
    "make_grid",
    "collocation_points",
    "spline_value",
    "gauss_legendre",
    "tensor_eval",
]


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Strictly increasing nodes on [0, q_max] with q_0 = 0."""

    nodes: np.ndarray

    @property
    def n_intervals(self):
        return len(self.nodes) - 1

    @property
    def q_max(self):
        return float(self.nodes[-1])

    @property
    def widths(self):
        return np.diff(self.nodes)


def make_grid(n, q_max, mapping="uniform", ratio=2.0, scale=1.0):
    """Build a radial grid with n intervals on [0, q_max].

    Parameters
    ----------
    n : int
        Number of intervals, at least 2.
    q_max : float
        Outer edge, strictly positive.
    mapping : {"uniform", "geometric", "tangent"}
        Node placement.  "geometric" makes interval widths grow by `ratio`
        from the origin outward; "tangent" places nodes on a scaled tangent
        curve, dense near the origin.
    ratio : float
        Width ratio between consecutive intervals (geometric mapping only).
    scale : float
        Scale of the tangent mapping (tangent mapping only).

    Returns
    -------
    Grid1D
    """
    n = int(n)
    if n < 2:
        raise ValueError("need at least 2 intervals, got n=%d" % n)
    q_max = float(q_max)
    if not q_max > 0.0:
        raise ValueError("q_max must be positive, got %g" % q_max)
    if mapping == "uniform":
        nodes = np.linspace(0.0, q_max, n + 1)
    elif mapping == "geometric":
        ratio = float(ratio)
        if not ratio > 0.0:
            raise ValueError("geometric ratio must be positive, got %g" % ratio)
        if abs(ratio - 1.0) < 1e-12:
            nodes = np.linspace(0.0, q_max, n + 1)
        else:
            w0 = q_max * (ratio - 1.0) / (ratio**n - 1.0)
            widths = w0 * ratio ** np.arange(n)
            nodes = np.concatenate(([0.0], np.cumsum(widths)))
            nodes[-1] = q_max
    elif mapping == "tangent":
        scale = float(scale)
        if not scale > 0.0:
            raise ValueError("tangent scale must be positive, got %g" % scale)
        theta = np.linspace(0.0, np.arctan(q_max / scale), n + 1)
        nodes = scale * np.tan(theta)
        nodes[-1] = q_max
    else:
        raise ValueError("unknown grid mapping %r" % (mapping,))
    if np.any(np.diff(nodes) <= 0.0):
        raise ValueError("grid nodes are not strictly increasing")
    return Grid1D(nodes=nodes)


# Local Hermite polynomials on t in [0, 1] and their t-derivatives, in the
# order (value-left, slope-left, value-right, slope-right).

def _hermite_weights(t, h, d):
    """4-entry weight rows for points with local coordinate t, width h.

    The row multiplies the coefficient block (c_2k, c_2k+1, c_2k+2, c_2k+3)
    of the interval's four splines and yields the d-th q-derivative.
    """
    t = np.asarray(t, dtype=float)
    one = np.ones_like(t)
    if d == 0:
        p = (1.0 + 2.0 * t) * (1.0 - t) ** 2, t * (1.0 - t) ** 2, \
            t * t * (3.0 - 2.0 * t), t * t * (t - 1.0)
    elif d == 1:
        p = 6.0 * t * (t - 1.0), (1.0 - t) * (1.0 - 3.0 * t), \
            6.0 * t * (1.0 - t), t * (3.0 * t - 2.0)
    elif d == 2:
        p = 12.0 * t - 6.0, 6.0 * t - 4.0, 6.0 - 12.0 * t, 6.0 * t - 2.0
        p = tuple(q * one for q in p)
    else:
        raise ValueError("derivative order must be 0, 1 or 2, got %d" % d)
    w = np.stack(p, axis=-1)
    hh = np.asarray(h, dtype=float)
    scale = hh ** (-d) if d else np.ones_like(hh)
    w *= scale[..., None]
    w[..., 1] *= hh
    w[..., 3] *= hh
    return w


class SplineBasis:
    """The 2n+2 cubic Hermite splines attached to a grid."""

    def __init__(self, grid):
        self.grid = grid
        self.nodes = grid.nodes
        self.size = 2 * grid.n_intervals + 2

    def locate(self, q, outside="error"):
        """Interval index and inside-mask for points q.

        outside="error" raises on points beyond [0, q_max] (up to roundoff
        slack); outside="zero" marks them in the returned mask instead.
        """
        q = np.asarray(q, dtype=float)
        tol = 1e-12 * max(1.0, self.grid.q_max)
        inside = (q >= -tol) & (q <= self.grid.q_max + tol)
        if outside == "error":
            if not np.all(inside):
                bad = np.asarray(q)[~inside]
                raise ValueError(
                    "point %g outside grid [0, %g]" % (float(bad.flat[0]), self.grid.q_max)
                )
        elif outside != "zero":
            raise ValueError("outside policy must be 'error' or 'zero'")
        idx = np.clip(np.searchsorted(self.nodes, q, side="right") - 1, 0,
                      self.grid.n_intervals - 1)
        return idx, inside

    def stencils(self, q, d=0, outside="error"):
        """Sparse evaluation data for arbitrary points.

        Returns (start, w): for each point, the d-th derivative of a spline
        sum is  sum_a w[., a] * c[start[.] + a]  over the four splines alive
        on the point's interval.  With outside="zero" the weight rows of
        out-of-range points are zeroed.
        """
        q = np.asarray(q, dtype=float)
        idx, inside = self.locate(q, outside=outside)
        h = self.nodes[idx + 1] - self.nodes[idx]
        t = np.clip((q - self.nodes[idx]) / h, 0.0, 1.0)
        w = _hermite_weights(t, h, d)
        if not np.all(inside):
            w = np.where(inside[..., None], w, 0.0)
        return 2 * idx, w

    def eval_matrix(self, q, d=0):
        """Dense matrix of S_j^(d)(q_i), shape (len(q), size)."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        start, w = self.stencils(q, d=d)
        out = np.zeros((len(q), self.size))
        cols = start[:, None] + np.arange(4)[None, :]
        np.put_along_axis(out, cols, w, axis=1)
        return out

    def evaluate(self, coeffs, q, d=0, outside="error"):
        """Spline sum with coefficient vector coeffs at points q."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.size:
            raise ValueError("coefficient length %d does not match basis size %d"
                             % (coeffs.shape[-1], self.size))
        q = np.asarray(q, dtype=float)
        start, w = self.stencils(q, d=d, outside=outside)
        cols = start[..., None] + np.arange(4)
        return np.sum(np.take(coeffs, cols, axis=-1) * w, axis=-1)


def spline_value(basis, i, q, d=0):
    """Value (or derivative) of one basis spline, computed piecewise.

    Direct per-function evaluation from the local cubic on each of the
    spline's support intervals.  Deliberately independent of the vectorised
    stencil path so the two can check each other.

    Parameters
    ----------
    basis : SplineBasis
    i : int
        Basis index in [0, 2n+1]; even indices are value-type splines at
        node i//2, odd ones derivative-type.
    q : float or array
    d : int
        Derivative order, 0 to 2.

    Returns
    -------
    float or ndarray
        Zero outside the spline's support (and beyond the grid).
    """
    if not 0 <= i < basis.size:
        raise ValueError("basis index %d out of range" % i)
    if d not in (0, 1, 2):
        raise ValueError("derivative order must be 0, 1 or 2, got %d" % d)
    node, kind = divmod(i, 2)
    nodes = basis.nodes
    n = basis.grid.n_intervals
    q = np.asarray(q, dtype=float)
    out = np.zeros_like(q, dtype=float)

    def accumulate(k, local_slot, mask):
        # local_slot: 0..3 position of spline i within interval k's block
        h = nodes[k + 1] - nodes[k]
        t = (q[mask] - nodes[k]) / h
        if local_slot == 0:
            poly = ((1.0 + 2.0 * t) * (1.0 - t) ** 2,
                    6.0 * t * (t - 1.0),
                    12.0 * t - 6.0)[d]
            fac = h ** (-d)
        elif local_slot == 1:
            poly = (t * (1.0 - t) ** 2,
                    (1.0 - t) * (1.0 - 3.0 * t),
                    6.0 * t - 4.0)[d]
            fac = h ** (1 - d)
        elif local_slot == 2:
            poly = (t * t * (3.0 - 2.0 * t),
                    6.0 * t * (1.0 - t),
                    6.0 - 12.0 * t)[d]
            fac = h ** (-d)
        else:
            poly = (t * t * (t - 1.0),
                    t * (3.0 * t - 2.0),
                    6.0 * t - 2.0)[d]
            fac = h ** (1 - d)
        out[mask] = np.asarray(poly) * fac

    # Right support interval [q_node, q_node+1]: spline sits in slot 0 or 1.
    if node <= n - 1:
        k = node
        mask = (q >= nodes[k]) & (q <= nodes[k + 1])
        accumulate(k, kind, mask)
    # Left support interval [q_node-1, q_node]: slot 2 or 3.  For points on
    # the shared node the right interval's convention wins where both exist.
    if node >= 1:
        k = node - 1
        mask = (q >= nodes[k]) & (q < nodes[k + 1] if node <= n - 1 else q <= nodes[k + 1])
        accumulate(k, 2 + kind, mask)
    return out if out.ndim else float(out)


def collocation_points(grid, per_interval=2):
    """Gauss-Legendre points of each interval, ascending, 2 per interval.

    These are the interior collocation abscissae: per_interval * n points,
    all strictly inside the intervals, which pairs with the basis reduced by
    regularity (origin value spline dropped) plus one boundary row.
    """
    t, _ = np.polynomial.legendre.leggauss(per_interval)
    a = grid.nodes[:-1]
    h = grid.widths
    pts = a[:, None] + (0.5 * (t[None, :] + 1.0)) * h[:, None]
    return pts.reshape(-1)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self):
        return len(self.nodes)


def gauss_legendre(order):
    """Gauss-Legendre rule of the given order on [-1, 1]."""
    order = int(order)
    if order < 1:
        raise ValueError("quadrature order must be >= 1, got %d" % order)
    x, w = np.polynomial.legendre.leggauss(order)
    return QuadratureRule(nodes=x, weights=w)


@dataclass(frozen=True, eq=False)
class TensorCoefficients:
    """Amplitude-indexed tensor-product spline coefficients.

    data has shape (n_amplitudes, size_1, ..., size_k) matching the per-axis
    basis sizes in `bases`.
    """

    bases: tuple
    data: np.ndarray

    def __post_init__(self):
        sizes = tuple(b.size for b in self.bases)
        if self.data.ndim != len(sizes) + 1 or self.data.shape[1:] != sizes:
            raise ValueError(
                "coefficient shape %r does not match axis sizes %r"
                % (self.data.shape, sizes)
            )

    @property
    def n_amplitudes(self):
        return self.data.shape[0]


def tensor_eval(coeffs, point, d=None):
    """Evaluate all amplitudes of a tensor-product spline at one point.

    Parameters
    ----------
    coeffs : TensorCoefficients
    point : sequence of floats
        One coordinate per axis, inside every grid.
    d : sequence of ints, optional
        Per-axis derivative orders (default all zero).

    Returns
    -------
    ndarray, shape (n_amplitudes,)
    """
    bases = coeffs.bases
    if len(point) != len(bases):
        raise ValueError("point has %d coordinates for %d axes"
                         % (len(point), len(bases)))
    if d is None:
        d = (0,) * len(bases)
    if len(d) != len(bases):
        raise ValueError("derivative orders have %d entries for %d axes"
                         % (len(d), len(bases)))
    val = coeffs.data
    for basis, qi, di in zip(bases, point, d):
        start, w = basis.stencils(np.asarray([float(qi)]), d=di)
        block = val.take(range(start[0], start[0] + 4), axis=1)
        val = np.tensordot(block, w[0], axes=([1], [0]))
    return val
