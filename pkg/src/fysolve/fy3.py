"""Three-body S-wave dynamics: exchange kernel, operators, and solvers.

In the S-wave model the three-body problem reduces to coupled amplitudes
phi_a(x, y) on the quarter plane, x the interacting pair separation and y
the spectator distance in orthogonal mass-scaled Jacobi lengths.  Each
amplitude obeys

    [E + d2/dx2 + d2/dy2 - v_a(x)] phi_a(x, y)
        = v_a(x) sum_b c_ab (1/2) int_{-1}^{1} du
              (x y / x' y') phi_b(x', y'),

where (x', y') is the image of (x, y) in the partner partition's Jacobi
set, u the cosine between the Jacobi vectors, and the rotation preserves
x^2 + y^2.  The half in front of the u integral is the angular average of
the projector onto relative s states; the exchange multiplicity lives in
the coupling matrix c (2 for three bosons, because two partitions are
reached from any one; -1 in the spin-quartet fermion channel; a symmetric
2x2 mix of 1/2 and 3/2 in the spin-doublet channel).

Discretization is the tensor product of the reduced Hermite spline bases
(origin value splines dropped), collocated at two Gauss points per
interval and closed by one outer boundary row per axis, which is exactly
the layout the Kronecker preconditioner in krylov inverts.  The left side
factorizes per axis and is applied as two small matrix products; the
exchange side couples everything to everything but is applied matrix-free
through precomputed mapped-point stencils, so no dense matrix is ever
assembled outside the oracles in the test suite.

Bound states are eigenvalues of the pencil A(E) = L(E) - R, found by
inverse iteration with preconditioned BiCGSTAB inner solves.  Elastic
scattering below breakup fixes E = eps2 + p^2, splits off the incoming
channel product u(x) sin(p y), and solves a driven linear system for the
scattered remainder whose outer-y rows enforce a pure cos(p y) tail; the
phase shift is then read off the matching edge.
"""

import warnings
import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis import (
    Grid1D,
    QuadratureRule,
    SplineBasis,
    TensorCoefficients,
    collocation_points,
)
from .krylov import (
    KroneckerPreconditioner,
    KrylovError,
    LinearOperator,
    axis_factor_matrices,
    bicgstab,
    inverse_iteration,
)
from .twobody import (
    NoBoundStateError,
    PairSolution,
    PotentialSpec,
    _norm_quadrature,
    potential_eval,
)

__all__ = [
    "SWaveSystem3",
    "Problem3",
    "SolveResult3",
    "system3",
    "map3",
    "apply_L3",
    "apply_R3",
    "solve_bound3",
    "solve_elastic3",
    "residual3",
]

_SQ3H = np.sqrt(3.0) / 2.0

# canonical couplings per symmetry channel: amplitude count and the
# exchange matrix of the angular-averaged kernel
_CHANNELS = {
    "boson_L0": ((2.0,),),
    "fermion_J3/2": ((-1.0,),),
    "fermion_J1/2": ((0.5, 1.5), (1.5, 0.5)),
}


def map3(x, y, u):
    """Partner-partition image of (x, y) at relative-angle cosine u.

    Orthogonal convention: x'^2 = x^2/4 + 3y^2/4 - (sqrt3/2) x y u and
    y'^2 = 3x^2/4 + y^2/4 + (sqrt3/2) x y u, so x'^2 + y'^2 = x^2 + y^2
    identically.  Arrays broadcast; roundoff negatives under the square
    roots are clipped to zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1.0 + 1e-12):
        raise ValueError("angle cosine outside [-1, 1]")
    if np.any(x < 0.0) or np.any(y < 0.0):
        raise ValueError("lengths must be nonnegative")
    cross = _SQ3H * x * y * u
    xp2 = 0.25 * x * x + 0.75 * y * y - cross
    yp2 = 0.75 * x * x + 0.25 * y * y + cross
    return np.sqrt(np.maximum(xp2, 0.0)), np.sqrt(np.maximum(yp2, 0.0))


@dataclass(frozen=True)
class SWaveSystem3:
    """Symmetry channel of the three-body problem.

    kind names the channel, c is the n_a x n_a exchange coupling matrix,
    and potentials holds one single-amplitude PotentialSpec per amplitude.
    Direct construction accepts any symmetric c of the right shape (the
    diagnostics in the test suite zero it out); the system3 factory fills
    in the canonical couplings for the named channels.
    """

    kind: str
    n_a: int
    c: tuple
    potentials: tuple

    def __post_init__(self):
        if self.n_a < 1:
            raise ValueError("need at least one amplitude")
        c = tuple(tuple(float(e) for e in row) for row in self.c)
        if len(c) != self.n_a or any(len(row) != self.n_a for row in c):
            raise ValueError("coupling matrix must be %d x %d" % (self.n_a,
                                                                  self.n_a))
        for i in range(self.n_a):
            for j in range(i):
                if c[i][j] != c[j][i]:
                    raise ValueError("coupling matrix must be symmetric")
        object.__setattr__(self, "c", c)
        pots = tuple(self.potentials)
        if len(pots) != self.n_a:
            raise ValueError("need one potential per amplitude")
        for p in pots:
            if not isinstance(p, PotentialSpec):
                raise TypeError("potentials must be PotentialSpec instances")
            if p.n_amplitudes != 1:
                raise ValueError("per-amplitude potentials must be scalar")
        object.__setattr__(self, "potentials", pots)


def system3(kind, potentials):
    """Canonical three-body system for a named symmetry channel.

    potentials is a single-amplitude PotentialSpec (replicated across
    amplitudes) or a sequence of one per amplitude.
    """
    if kind not in _CHANNELS:
        raise ValueError("unknown channel %r; expected one of %s"
                         % (kind, sorted(_CHANNELS)))
    c = _CHANNELS[kind]
    n_a = len(c)
    if isinstance(potentials, PotentialSpec):
        pots = (potentials,) * n_a
    else:
        pots = tuple(potentials)
    return SWaveSystem3(kind=kind, n_a=n_a, c=c, potentials=pots)


@dataclass(frozen=True, eq=False)
class Problem3:
    """One discretized three-body task: system, grids, quadrature, energy.

    quad is the angular rule on [-1, 1] used by the exchange integral.
    mode is "bound" (Dirichlet outer rows, energy is the working point of
    the left side) or "elastic" (fixed energy eps2 < E < 0, Robin outer-y
    rows at channel momentum p = sqrt(E - eps2), pair solution required on
    the same x grid so the channel product satisfies the collocation rows
    identically).
    """

    system: SWaveSystem3
    grid_x: Grid1D
    grid_y: Grid1D
    quad: QuadratureRule
    energy: float
    mode: str = "bound"
    pair: PairSolution = None

    def __post_init__(self):
        if not isinstance(self.system, SWaveSystem3):
            raise TypeError("system must be an SWaveSystem3")
        if not isinstance(self.grid_x, Grid1D) or not isinstance(self.grid_y,
                                                                 Grid1D):
            raise TypeError("grid_x and grid_y must be Grid1D instances")
        if not isinstance(self.quad, QuadratureRule):
            raise TypeError("quad must be a QuadratureRule")
        nodes = np.asarray(self.quad.nodes)
        if np.any(nodes < -1.0 - 1e-12) or np.any(nodes > 1.0 + 1e-12):
            raise ValueError("angular quadrature must live on [-1, 1]")
        if self.mode not in ("bound", "elastic"):
            raise ValueError("mode must be 'bound' or 'elastic'")
        object.__setattr__(self, "energy", float(self.energy))
        if self.mode == "elastic":
            if self.system.n_a != 1:
                raise ValueError("elastic mode supports a single amplitude")
            if not isinstance(self.pair, PairSolution):
                raise ValueError("elastic mode needs the pair solution")
            if not np.array_equal(self.pair.grid.nodes, self.grid_x.nodes):
                raise ValueError("pair solution must live on grid_x")
            eps2 = self.pair.energy
            if not eps2 < self.energy < 0.0:
                raise ValueError(
                    "elastic energy %g must lie between the pair energy %g "
                    "and breakup" % (self.energy, eps2))
            p = np.sqrt(self.energy - eps2)
            if abs(np.cos(p * self.grid_y.q_max)) <= 0.1:
                raise ValueError("matching radius near node, adjust y_max")

    @property
    def channel_momentum(self):
        if self.mode != "elastic":
            raise ValueError("channel momentum is an elastic-mode quantity")
        return float(np.sqrt(self.energy - self.pair.energy))


@dataclass(frozen=True, eq=False)
class SolveResult3:
    """Converged three-body result.

    energy is the eigenvalue (bound) or the fixed working energy
    (elastic); tan_delta is None for bound states.  coeffs carries the
    full-basis tensor coefficients of phi (bound) or of the scattered
    remainder phi_sc (elastic).
    """

    mode: str
    energy: float
    tan_delta: float
    coeffs: TensorCoefficients
    stats: object


_OFFS = np.arange(4)


def _gather_eval(data, start_x, wx, start_y, wy):
    # data (n_a, fx, fy); stencil arrays share a leading shape S; returns
    # (n_a,) + S
    cx = start_x[..., None, None] + _OFFS[:, None]
    cy = start_y[..., None, None] + _OFFS[None, :]
    block = data[:, cx, cy]
    return np.einsum('...ab,...a,...b->...', block, wx, wy)


def _eval2(data, basis_x, basis_y, xs, ys, dx=0, dy=0, outside="error"):
    """All amplitudes of a tensor spline at flat point lists."""
    sx, wx = basis_x.stencils(np.asarray(xs, dtype=float), d=dx,
                              outside=outside)
    sy, wy = basis_y.stencils(np.asarray(ys, dtype=float), d=dy,
                              outside=outside)
    return _gather_eval(data, sx, wx, sy, wy)


class _KernelGeometry:
    """Mapped-point stencils of the exchange kernel at a flat point list.

    For each source point and angular node: the partner image (xp, yp),
    spline stencils there (switched to the origin derivative stencil when
    the image grazes an axis, where phi/coordinate tends to the slope),
    and the combined prefactor 0.5 * w_k * x y / (x' y') with the guarded
    inverse factors replaced by one.
    """

    def __init__(self, quad, basis_x, basis_y, xs, ys):
        u = np.asarray(quad.nodes, dtype=float)
        w = np.asarray(quad.weights, dtype=float)
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        xp, yp = map3(xs[:, None], ys[:, None], u[None, :])
        gx = xp < basis_x.nodes[1] * 1e-6
        gy = yp < basis_y.nodes[1] * 1e-6
        xe = np.where(gx, 0.0, xp)
        ye = np.where(gy, 0.0, yp)
        sx0, wx0 = basis_x.stencils(xe, d=0, outside="zero")
        sx1, wx1 = basis_x.stencils(xe, d=1, outside="zero")
        sy0, wy0 = basis_y.stencils(ye, d=0, outside="zero")
        sy1, wy1 = basis_y.stencils(ye, d=1, outside="zero")
        self.sx = np.where(gx, sx1, sx0)
        self.wx = np.where(gx[..., None], wx1, wx0)
        self.sy = np.where(gy, sy1, sy0)
        self.wy = np.where(gy[..., None], wy1, wy0)
        invx = np.where(gx, 1.0, 1.0 / np.where(gx, 1.0, xp))
        invy = np.where(gy, 1.0, 1.0 / np.where(gy, 1.0, yp))
        self.pref = 0.5 * w[None, :] * (xs * ys)[:, None] * invx * invy
        self.xp = xp
        self.yp = yp
        self.gx = gx
        self.gy = gy

    def fold(self, vals):
        # angular quadrature of prefactor times sampled values
        return np.sum(self.pref * vals, axis=-1)


class _OperatorPack3:
    """Precomputed application data for one problem's operators.

    Everything energy-independent is built once: per-axis row matrices
    over the full spline columns (the reduced square factors are their
    [:, 1:] slices), potential samples, frozen boundary-row scales, and
    the exchange kernel geometry at the collocation mesh.  The energy
    enters only the interior left rows, so one pack serves every shift of
    an inverse-iteration solve.
    """

    def __init__(self, problem, sigma_energy=None):
        self.problem = problem
        sys3 = problem.system
        self.basis_x = SplineBasis(problem.grid_x)
        self.basis_y = SplineBasis(problem.grid_y)
        self.colloc_x = collocation_points(problem.grid_x)
        self.colloc_y = collocation_points(problem.grid_y)
        self.mx = len(self.colloc_x) + 1
        self.my = len(self.colloc_y) + 1
        self.X0 = self.basis_x.eval_matrix(self.colloc_x, d=0)
        self.X2 = self.basis_x.eval_matrix(self.colloc_x, d=2)
        self.Y0 = self.basis_y.eval_matrix(self.colloc_y, d=0)
        self.Y2 = self.basis_y.eval_matrix(self.colloc_y, d=2)
        self.brow_x = self.basis_x.eval_matrix([problem.grid_x.q_max],
                                               d=0)[0]
        ym = problem.grid_y.q_max
        if problem.mode == "elastic":
            p = problem.channel_momentum
            self.brow_y = (np.cos(p * ym)
                           * self.basis_y.eval_matrix([ym], d=1)[0]
                           + p * np.sin(p * ym)
                           * self.basis_y.eval_matrix([ym], d=0)[0])
        else:
            self.brow_y = self.basis_y.eval_matrix([ym], d=0)[0]
        self.v = tuple(potential_eval(sys3.potentials[a], 0, self.colloc_x)
                       for a in range(sys3.n_a))
        e0 = problem.energy if sigma_energy is None else float(sigma_energy)
        s2x = np.max(np.sum(np.abs(self.X2[:, 1:]), axis=1))
        s2y = np.max(np.sum(np.abs(self.Y2[:, 1:]), axis=1))
        self.sigma_x = tuple(-(1.0 + abs(e0) + np.max(np.abs(va)) + s2x)
                             for va in self.v)
        self.sigma_y = -(1.0 + abs(e0) + s2y)
        self.Nx = np.vstack([self.X0, self.brow_x[None, :]])
        self.Ny = np.vstack([self.Y0, self.brow_y[None, :]])
        self.Ly = np.vstack([self.Y2, self.sigma_y * self.brow_y[None, :]])
        # mass rows: d(left)/dE lives in the interior x rows only
        self.Mx = np.vstack([self.X0, np.zeros((1, self.basis_x.size))])
        XX, YY = np.meshgrid(self.colloc_x, self.colloc_y, indexing="ij")
        self.kernel = _KernelGeometry(problem.quad, self.basis_x,
                                      self.basis_y, XX.ravel(), YY.ravel())

    def left_x_rows(self, alpha, energy):
        interior = self.X2 + (energy - self.v[alpha])[:, None] * self.X0
        return np.vstack([interior,
                          self.sigma_x[alpha] * self.brow_x[None, :]])

    def apply_L(self, data, energy):
        n_a = self.problem.system.n_a
        out = np.empty((n_a, self.mx, self.my))
        for a in range(n_a):
            Lx = self.left_x_rows(a, energy)
            out[a] = Lx @ data[a] @ self.Ny.T + self.Nx @ data[a] @ self.Ly.T
        return out

    def apply_mass(self, data):
        n_a = self.problem.system.n_a
        out = np.empty((n_a, self.mx, self.my))
        for a in range(n_a):
            out[a] = -(self.Mx @ data[a] @ self.Ny.T)
        return out

    def apply_R(self, data):
        n_a = self.problem.system.n_a
        geo = self.kernel
        vals = _gather_eval(data, geo.sx, geo.wx, geo.sy, geo.wy)
        integ = geo.fold(vals).reshape(n_a, self.mx - 1, self.my - 1)
        c = np.asarray(self.problem.system.c, dtype=float)
        mix = np.tensordot(c, integ, axes=([1], [0]))
        out = np.zeros((n_a, self.mx, self.my))
        for a in range(n_a):
            out[a, :-1, :-1] = self.v[a][:, None] * mix[a]
        return out

    def reduced_shape(self):
        n_a = self.problem.system.n_a
        return n_a, self.mx, self.my

    def pad_full(self, flat):
        n_a, mx, my = self.reduced_shape()
        data = np.zeros((n_a, self.basis_x.size, self.basis_y.size))
        data[:, 1:, 1:] = np.asarray(flat, dtype=float).reshape(n_a, mx, my)
        return data


_PACKS = weakref.WeakKeyDictionary()


def _cached_pack(problem):
    pack = _PACKS.get(problem)
    if pack is None:
        pack = _OperatorPack3(problem)
        _PACKS[problem] = pack
    return pack


def _check_coeffs(problem, coeffs):
    if not isinstance(coeffs, TensorCoefficients):
        raise TypeError("coeffs must be TensorCoefficients")
    if coeffs.n_amplitudes != problem.system.n_a:
        raise ValueError("coefficient amplitude count %d does not match "
                         "the system's %d" % (coeffs.n_amplitudes,
                                              problem.system.n_a))
    if len(coeffs.bases) != 2:
        raise ValueError("need exactly two axes")
    for basis, grid in zip(coeffs.bases, (problem.grid_x, problem.grid_y)):
        if not np.array_equal(basis.nodes, grid.nodes):
            raise ValueError("coefficient bases do not match problem grids")


def apply_L3(problem, coeffs):
    """Left-side rows at the collocation mesh: E phi + lap phi - v phi.

    Returns an (n_a, 2 n_x + 1, 2 n_y + 1) array: per amplitude, the
    interior rows hold the differential expression at the Gauss points and
    the last row and column hold the outer boundary functionals (value at
    the box edge in bound mode, the cos-tail Robin combination on the y
    edge in elastic mode), entered with the same fixed negative scale the
    Kronecker preconditioner uses.
    """
    _check_coeffs(problem, coeffs)
    return _cached_pack(problem).apply_L(coeffs.data, problem.energy)


def apply_R3(problem, coeffs):
    """Exchange rows at the collocation mesh.

    Per amplitude a and interior point (x, y):
    v_a(x) sum_b c_ab (1/2) sum_k w_k (x y / x' y') phi_b(x', y') with
    (x', y') = map3(x, y, u_k); boundary rows are zero so the boundary
    functionals of the full system come from the left side alone.  Images
    beyond a grid edge contribute zero (the amplitude vanishes there in
    bound mode and the x tail is exponentially dead in elastic mode);
    images grazing an axis use the origin derivative stencil, since
    regular amplitudes vanish linearly.
    """
    _check_coeffs(problem, coeffs)
    return _cached_pack(problem).apply_R(coeffs.data)


def _pair_threshold(problem):
    """Lowest 2+1 breakup energy over the amplitudes, densely computed."""
    basis = SplineBasis(problem.grid_x)
    pts = collocation_points(problem.grid_x)
    eps = 0.0
    for a in range(problem.system.n_a):
        v = potential_eval(problem.system.potentials[a], 0, pts)
        L0, N, _ = axis_factor_matrices(basis, pts, potential=v, energy=0.0)
        mass = -N
        mass[-1] = 0.0
        evals = scipy.linalg.eig(L0, mass, right=False)
        evals = evals[np.isfinite(evals)]
        real = evals.real[np.abs(evals.imag)
                          <= 1e-6 * (1.0 + np.abs(evals.real))]
        if len(real):
            eps = min(eps, float(real.min()))
    return eps


def _check_box(problem, energy):
    # the box should leave room for the classically allowed region
    xt = 0.0
    xs = np.linspace(0.0, problem.grid_x.q_max, 2049)[1:]
    for a in range(problem.system.n_a):
        v = potential_eval(problem.system.potentials[a], 0, xs)
        inside = v <= energy
        if np.any(inside):
            xt = max(xt, float(xs[inside].max()))
    for label, qmax in (("x_max", problem.grid_x.q_max),
                        ("y_max", problem.grid_y.q_max)):
        if qmax < 4.0 * xt:
            warnings.warn(
                "%s = %g is below 4 times the classical turning distance "
                "%g at energy %g" % (label, qmax, xt, energy),
                RuntimeWarning)


def _block_precond(pack, energy):
    """Kronecker preconditioner per amplitude, stitched block-diagonally."""
    X0r = pack.X0[:, 1:]
    bxr = pack.brow_x[None, 1:]
    Nx = np.vstack([X0r, bxr])
    Ny = pack.Ny[:, 1:]
    Ly = pack.Ly[:, 1:]
    solvers = []
    for a in range(pack.problem.system.n_a):
        Lx = pack.left_x_rows(a, energy)[:, 1:]
        solvers.append(KroneckerPreconditioner([Lx, Ly], [Nx, Ny]))
    if len(solvers) == 1:
        return solvers[0]
    block = pack.mx * pack.my

    def solve(b):
        return np.concatenate([m(b[i * block:(i + 1) * block])
                               for i, m in enumerate(solvers)])

    return solve


def _normalize3(pack, data):
    # unit L2 norm over the box, largest collocation value positive
    px, wx = _norm_quadrature(pack.problem.grid_x)
    py, wy = _norm_quadrature(pack.problem.grid_y)
    Ax = pack.basis_x.eval_matrix(px, d=0)
    Ay = pack.basis_y.eval_matrix(py, d=0)
    norm2 = 0.0
    for a in range(data.shape[0]):
        vals = Ax @ data[a] @ Ay.T
        norm2 += float(wx @ (vals * vals) @ wy)
    data = data / np.sqrt(norm2)
    probe = np.stack([pack.X0 @ data[a] @ pack.Y0.T
                      for a in range(data.shape[0])])
    flat = probe.ravel()
    if flat[np.argmax(np.abs(flat))] < 0.0:
        data = -data
    return data


def solve_bound3(problem, lam0, tol_E=1e-9, max_outer=40, inner_tol=1e-10,
                 inner_max_iter=400):
    """Three-body bound state nearest the guess, by inverse iteration.

    Each outer step solves A(shift) y = M x with preconditioned BiCGSTAB,
    where A(E) = L(E) - R is the energy pencil and M its (negated) energy
    derivative; the shift tracking, freezing, and convergence rules live
    in krylov.inverse_iteration.  The boundary-row scale is frozen at the
    guess so the pencil stays exactly linear in E across shifts.

    Raises NoBoundStateError when the converged eigenvalue does not lie
    below the 2+1 threshold: whatever the iteration found then belongs to
    the discretized continuum, not to a three-body bound state.
    """
    if problem.mode != "bound":
        raise ValueError("solve_bound3 needs a bound-mode problem")
    lam0 = float(lam0)
    eps2 = _pair_threshold(problem)
    if not lam0 < eps2:
        raise ValueError("guess %g must lie below the 2+1 threshold %g"
                         % (lam0, eps2))
    _check_box(problem, lam0)
    pack = _OperatorPack3(problem, sigma_energy=lam0)
    n_a, mx, my = pack.reduced_shape()
    dim = n_a * mx * my

    def mass_flat(t):
        return pack.apply_mass(pack.pad_full(t)).ravel()

    def solve_at(shift):
        precond = _block_precond(pack, shift)

        def apply_A(t):
            data = pack.pad_full(t)
            return (pack.apply_L(data, shift) - pack.apply_R(data)).ravel()

        A = LinearOperator(dim, apply_A)

        def inner(b):
            # near-converged shifts leave the system mildly ill conditioned;
            # a stalled solve whose residual is still tiny relative to the
            # shift-to-eigenvalue distance cannot disturb the eigenvalue
            # update, so accept it rather than fail
            try:
                x, _ = bicgstab(A, precond, b, tol=inner_tol,
                                max_iter=inner_max_iter)
            except KrylovError as err:
                if err.x is None or err.stats.residual > 1e-6:
                    raise
                x = err.x
            return x

        return inner

    try:
        lam, xr, stats = inverse_iteration(solve_at, lam0, tol_E=tol_E,
                                           max_outer=max_outer,
                                           mass_apply=mass_flat, dimension=dim)
    except KrylovError as err:
        # an estimate stranded above the 2+1 threshold at exhaustion is the
        # signature of an empty discrete spectrum near the guess: the
        # iteration bounces inside the breakup continuum instead of locking
        # onto an isolated eigenvalue
        last = getattr(err, "lam", None)
        if last is not None and last >= eps2 - 1e-10 * (1.0 + abs(eps2)):
            raise NoBoundStateError(
                "no 3-body bound state near guess (estimate wandered to %g, "
                "threshold %g)" % (last, eps2)) from err
        raise
    if lam >= eps2 - 1e-10 * (1.0 + abs(eps2)):
        raise NoBoundStateError(
            "no 3-body bound state near guess (converged to %g, threshold "
            "%g)" % (lam, eps2))
    data = _normalize3(pack, pack.pad_full(xr))
    coeffs = TensorCoefficients(bases=(pack.basis_x, pack.basis_y),
                                data=data)
    return SolveResult3(mode="bound", energy=float(lam), tan_delta=None,
                        coeffs=coeffs, stats=stats)


def _channel_values(problem, geo):
    """Samples of u(x') sin(p y') / (x' y') matching geo's prefactors.

    The spline factor u is evaluated with zero outside its grid; the sine
    factor is analytic, so partner images beyond y_max keep their exact
    channel value.  Guarded entries carry the axis limits u'(0) and p.
    """
    pair = problem.pair
    p = problem.channel_momentum
    uv = pair.evaluate(np.where(geo.gx, 0.0, geo.xp), outside="zero")
    slope0 = float(pair.evaluate(np.zeros(1), d=1)[0])
    U = np.where(geo.gx, slope0, uv)
    S = np.where(geo.gy, p, np.sin(p * geo.yp))
    return U * S


def _elastic_driving(pack):
    problem = pack.problem
    geo = pack.kernel
    integ = geo.fold(_channel_values(problem, geo))
    integ = integ.reshape(pack.mx - 1, pack.my - 1)
    c = float(problem.system.c[0][0])
    out = np.zeros((1, pack.mx, pack.my))
    out[0, :-1, :-1] = pack.v[0][:, None] * (c * integ)
    return out


def solve_elastic3(problem, inner_tol=1e-10, inner_max_iter=600):
    """Elastic 1+2 phase shift at the problem's fixed energy.

    The full amplitude is phi = phi_sc + u(x) sin(p y).  Because the pair
    solution lives on the same x grid and collocation rule, the channel
    product satisfies the interior rows identically at p^2 = E - eps2, so
    phi_sc solves (L - R) phi_sc = R[u sin] with the outer-y Robin rows
    selecting a pure cos(p y) tail.  tan(delta) is the least-squares
    amplitude of phi_sc(x, y_max) against u(x) cos(p y_max) over the x
    collocation points.
    """
    if problem.mode != "elastic":
        raise ValueError("solve_elastic3 needs an elastic-mode problem")
    pack = _OperatorPack3(problem)
    n_a, mx, my = pack.reduced_shape()
    dim = n_a * mx * my
    E = problem.energy
    rhs = _elastic_driving(pack).ravel()

    def apply_A(t):
        data = pack.pad_full(t)
        return (pack.apply_L(data, E) - pack.apply_R(data)).ravel()

    A = LinearOperator(dim, apply_A)
    precond = _block_precond(pack, E)
    x, stats = bicgstab(A, precond, rhs, tol=inner_tol,
                        max_iter=inner_max_iter)
    data = pack.pad_full(x)
    p = problem.channel_momentum
    uvals = problem.pair.evaluate(pack.colloc_x)
    edge_row = pack.basis_y.eval_matrix([problem.grid_y.q_max], d=0)[0]
    phi_edge = pack.X0 @ data[0] @ edge_row
    den = float(np.cos(p * problem.grid_y.q_max)) * float(uvals @ uvals)
    tan_delta = float(uvals @ phi_edge) / den
    coeffs = TensorCoefficients(bases=(pack.basis_x, pack.basis_y),
                                data=data)
    return SolveResult3(mode="elastic", energy=E, tan_delta=tan_delta,
                        coeffs=coeffs, stats=stats)


def _exchange_at_points(problem, data, basis_x, basis_y, xs, ys):
    geo = _KernelGeometry(problem.quad, basis_x, basis_y, xs, ys)
    vals = _gather_eval(data, geo.sx, geo.wx, geo.sy, geo.wy)
    integ = geo.fold(vals)
    c = np.asarray(problem.system.c, dtype=float)
    mix = np.tensordot(c, integ, axes=([1], [0]))
    v = np.stack([potential_eval(problem.system.potentials[a], 0, xs)
                  for a in range(problem.system.n_a)])
    return v * mix, geo


def residual3(problem, result, test_points):
    """Pointwise equation residual of a converged result.

    test_points is an (m, 2) array of (x, y) samples, normally chosen off
    the collocation mesh; returns (max_abs, rms) of the residual of the
    solved equation there: the full amplitude equation for bound results,
    the driven phi_sc equation for elastic ones.
    """
    pts = np.atleast_2d(np.asarray(test_points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("test_points must be an (m, 2) array")
    xs = pts[:, 0]
    ys = pts[:, 1]
    coeffs = result.coeffs
    _check_coeffs(problem, coeffs)
    basis_x, basis_y = coeffs.bases
    data = coeffs.data
    val = _eval2(data, basis_x, basis_y, xs, ys)
    dxx = _eval2(data, basis_x, basis_y, xs, ys, dx=2)
    dyy = _eval2(data, basis_x, basis_y, xs, ys, dy=2)
    v = np.stack([potential_eval(problem.system.potentials[a], 0, xs)
                  for a in range(problem.system.n_a)])
    left = result.energy * val + dxx + dyy - v * val
    exch, geo = _exchange_at_points(problem, data, basis_x, basis_y, xs, ys)
    resid = left - exch
    if result.mode == "elastic":
        drive = problem.system.c[0][0] * geo.fold(
            _channel_values(problem, geo))
        resid = resid - v * drive[None, :]
    flat = resid.ravel()
    return float(np.max(np.abs(flat))), float(np.sqrt(np.mean(flat ** 2)))
