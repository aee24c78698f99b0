"""Four-body S-wave dynamics: partition-chain maps, coupled operators,
and the bound-state solver.

With identical bosons the chain decomposition leaves two amplitudes on
the coordinate octant: phi_1(x, y, z) along the deep chains (pair,
attached third particle, attached fourth) and phi_2(x, y, z) along the
two-pair chains (pair, opposite pair, pair-pair separation).  In the
orthogonal mass-scaled Jacobi lengths both obey

    [E + lap - v(x)] phi_1 = v(x) [ int du (x y / x' y1') phi_1(x', y1', z)
        + 1/2 int du dv sum_i (x y z / x' yi'' zi'') phi_i(x', yi'', zi'') ]

    [E + lap - v(x)] phi_2 = v(x) [ phi_2(y, x, z)
        + int dv (x z / yh zh) phi_1(y, yh, zh) ]

where the primed lengths are the maps4 images, u and v the two relevant
angle cosines, and every rotation preserves the summed squares it mixes.
The first phi_1 term rotates within the pair plane at frozen z; the
double term reaches the chains that regroup the third and fourth
particles, two image branches i = 1, 2 with a shared first-stage
rotation; the bare swap phi_2(y, x, z) is the opposite ordering of the
same two-pair partition (its coordinate change is exact, no angle), and
the last term couples back into the deep chains.  Angular averages and
image multiplicities combine into the printed coefficients, exactly as
the coupling constants do for three bodies.

Discretization mirrors fy3 on three axes: reduced Hermite spline bases,
two Gauss collocation rows per interval plus one boundary row per axis,
left side applied as per-axis factor products, chain couplings applied
matrix-free.  The double integral is contracted in two stages, first the
x stencils at fixed (u), then the (y, z) stencils over the image grid,
which keeps the work linear in the angular rule sizes.  Only bound
states are supported; the breakup-free window that makes three-body
elastic scattering clean does not exist here.
"""

import warnings
import weakref
from dataclasses import dataclass

import numpy as np

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
    bicgstab,
    inverse_iteration,
)
from .twobody import (
    NoBoundStateError,
    PotentialSpec,
    _norm_quadrature,
    potential_eval,
)

__all__ = [
    "Maps4Result",
    "Problem4",
    "SolveResult4",
    "maps4",
    "apply_operator4",
    "solve_bound4",
]

_SQ3H = np.sqrt(3.0) / 2.0
_SQ2 = np.sqrt(2.0)

# second-stage rotation coefficients (y-image and z-image) per branch:
# each row is (weight of y1'^2, weight of z^2, cross coefficient)
_DEEP_BRANCHES = (
    (((1.0 / 9.0), (8.0 / 9.0), 4.0 * _SQ2 / 9.0),
     ((8.0 / 9.0), (1.0 / 9.0), -4.0 * _SQ2 / 9.0)),
    (((1.0 / 3.0), (2.0 / 3.0), -2.0 * _SQ2 / 3.0),
     ((2.0 / 3.0), (1.0 / 3.0), 2.0 * _SQ2 / 3.0)),
)


@dataclass(frozen=True)
class Maps4Result:
    """Image lengths of one configuration under the chain rotations.

    xp and yp1 are the rotated pair and attached-third lengths at angle
    cosine u (z untouched); (ypp1, zpp1) and (ypp2, zpp2) are the two
    second-stage branches regrouping the last two particles at cosine v;
    (yh1, zh1) is the two-pair-chain image of (x, z) at cosine v.  The
    rotations preserve xp^2 + yp1^2 = x^2 + y^2, yppi^2 + zppi^2 =
    yp1^2 + z^2, and yh1^2 + zh1^2 = x^2 + z^2.
    """

    xp: np.ndarray
    yp1: np.ndarray
    ypp1: np.ndarray
    zpp1: np.ndarray
    ypp2: np.ndarray
    zpp2: np.ndarray
    yh1: np.ndarray
    zh1: np.ndarray


def _sqrt_clip(q2):
    return np.sqrt(np.maximum(q2, 0.0))


def maps4(x, y, z, u, v):
    """All chain images of (x, y, z) at angle cosines u and v.

    Arrays broadcast; lengths must be nonnegative and cosines lie in
    [-1, 1].  Roundoff negatives under the square roots are clipped (the
    cross terms make every image square a perfect square at the extreme
    cosines, so images can graze zero but never go negative).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(u) > 1.0 + 1e-12) or np.any(np.abs(v) > 1.0 + 1e-12):
        raise ValueError("angle cosine outside [-1, 1]")
    if np.any(x < 0.0) or np.any(y < 0.0) or np.any(z < 0.0):
        raise ValueError("lengths must be nonnegative")
    cross = _SQ3H * x * y * u
    xp = _sqrt_clip(0.25 * x * x + 0.75 * y * y - cross)
    yp1 = _sqrt_clip(0.75 * x * x + 0.25 * y * y + cross)
    (cy1, cz1, cc1), (cy1z, cz1z, cc1z) = (
        _DEEP_BRANCHES[0][0], _DEEP_BRANCHES[0][1])
    (cy2, cz2, cc2), (cy2z, cz2z, cc2z) = (
        _DEEP_BRANCHES[1][0], _DEEP_BRANCHES[1][1])
    yzv = yp1 * z * v
    ypp1 = _sqrt_clip(cy1 * yp1 * yp1 + cz1 * z * z + cc1 * yzv)
    zpp1 = _sqrt_clip(cy1z * yp1 * yp1 + cz1z * z * z + cc1z * yzv)
    ypp2 = _sqrt_clip(cy2 * yp1 * yp1 + cz2 * z * z + cc2 * yzv)
    zpp2 = _sqrt_clip(cy2z * yp1 * yp1 + cz2z * z * z + cc2z * yzv)
    xzv = x * z * v
    yh1 = _sqrt_clip(x * x / 3.0 + 2.0 * z * z / 3.0 - 2.0 * _SQ2 / 3.0 * xzv)
    zh1 = _sqrt_clip(2.0 * x * x / 3.0 + z * z / 3.0 + 2.0 * _SQ2 / 3.0 * xzv)
    return Maps4Result(xp=xp, yp1=yp1, ypp1=ypp1, zpp1=zpp1,
                       ypp2=ypp2, zpp2=zpp2, yh1=yh1, zh1=zh1)


@dataclass(frozen=True, eq=False)
class Problem4:
    """One discretized four-body bound-state task.

    potential is the single pair interaction shared by every pair and
    both amplitudes; quad_u and quad_v are the angular rules of the first
    and second rotation stages (the two-pair coupling term reuses
    quad_v); energy_guess seeds the eigenvalue search and fixes the
    frozen boundary-row scale of the left side.
    """

    potential: PotentialSpec
    grid_x: Grid1D
    grid_y: Grid1D
    grid_z: Grid1D
    quad_u: QuadratureRule
    quad_v: QuadratureRule
    energy_guess: float

    def __post_init__(self):
        if not isinstance(self.potential, PotentialSpec):
            raise TypeError("potential must be a PotentialSpec")
        if self.potential.n_amplitudes != 1:
            raise ValueError("potential must be a single-amplitude spec")
        for g in (self.grid_x, self.grid_y, self.grid_z):
            if not isinstance(g, Grid1D):
                raise TypeError("grids must be Grid1D instances")
        for q in (self.quad_u, self.quad_v):
            if not isinstance(q, QuadratureRule):
                raise TypeError("quadratures must be QuadratureRule "
                                "instances")
            nodes = np.asarray(q.nodes)
            if np.any(nodes < -1.0 - 1e-12) or np.any(nodes > 1.0 + 1e-12):
                raise ValueError("angular quadrature must live on [-1, 1]")
        object.__setattr__(self, "energy_guess", float(self.energy_guess))
        if not self.energy_guess < 0.0:
            raise ValueError("energy guess must be negative")


@dataclass(frozen=True, eq=False)
class SolveResult4:
    """Converged four-body bound state: eigenvalue, full-basis tensor
    coefficients of both amplitudes, and solver statistics."""

    energy: float
    coeffs: TensorCoefficients
    stats: object


_OFFS = np.arange(4)


def _value_matrix(basis, pts):
    # like eval_matrix but zero beyond the grid, for cross-axis sampling
    pts = np.asarray(pts, dtype=float)
    start, w = basis.stencils(pts, d=0, outside="zero")
    out = np.zeros((len(pts), basis.size))
    np.put_along_axis(out, start[:, None] + _OFFS[None, :], w, axis=1)
    return out


def _guarded_stencils(basis, q):
    """Stencils plus inverse lengths under the grazing-axis guard.

    Images grazing the axis evaluate the origin slope instead of the
    value (regular amplitudes vanish linearly there) and drop their
    inverse-length prefactor; images beyond the grid contribute zero.
    Grazing points are rare, so their derivative rows are patched in
    instead of being computed everywhere.
    """
    graze = q < basis.nodes[1] * 1e-6
    s, w = basis.stencils(np.where(graze, 0.0, q), d=0, outside="zero")
    inv = np.where(graze, 1.0, 1.0 / np.where(graze, 1.0, q))
    hits = np.nonzero(graze)
    if len(hits[0]):
        s1, w1 = basis.stencils(np.zeros(len(hits[0])), d=1)
        s[hits] = s1
        w[hits] = w1
    return s, w, inv


def _apply_axis(mat, arr, axis):
    return np.moveaxis(np.tensordot(mat, arr, axes=(1, axis)), 0, axis)


def _rows3(ax, ay, az, data):
    return _apply_axis(az, _apply_axis(ay, _apply_axis(ax, data, 0), 1), 2)


class _OperatorPack4:
    """Precomputed application data for one problem's operators.

    Energy-independent pieces are built once: per-axis row matrices,
    potential samples, frozen boundary scales, the first-stage image
    stencils on the (x, y) collocation mesh, the two-pair coupling
    stencils on the (x, z) mesh, and the cross-axis value matrices of the
    bare swap.  Second-stage image stencils depend on all of (x, y, u, z,
    v), so they are rebuilt per application in blocks instead of cached;
    the energy enters the interior x rows only.
    """

    def __init__(self, problem, sigma_energy=None):
        self.problem = problem
        self.basis_x = SplineBasis(problem.grid_x)
        self.basis_y = SplineBasis(problem.grid_y)
        self.basis_z = SplineBasis(problem.grid_z)
        self.colloc_x = collocation_points(problem.grid_x)
        self.colloc_y = collocation_points(problem.grid_y)
        self.colloc_z = collocation_points(problem.grid_z)
        self.mx = len(self.colloc_x) + 1
        self.my = len(self.colloc_y) + 1
        self.mz = len(self.colloc_z) + 1
        self.X0 = self.basis_x.eval_matrix(self.colloc_x, d=0)
        self.X2 = self.basis_x.eval_matrix(self.colloc_x, d=2)
        self.Y0 = self.basis_y.eval_matrix(self.colloc_y, d=0)
        self.Y2 = self.basis_y.eval_matrix(self.colloc_y, d=2)
        self.Z0 = self.basis_z.eval_matrix(self.colloc_z, d=0)
        self.Z2 = self.basis_z.eval_matrix(self.colloc_z, d=2)
        self.brow_x = self.basis_x.eval_matrix([problem.grid_x.q_max],
                                               d=0)[0]
        self.brow_y = self.basis_y.eval_matrix([problem.grid_y.q_max],
                                               d=0)[0]
        self.brow_z = self.basis_z.eval_matrix([problem.grid_z.q_max],
                                               d=0)[0]
        self.v = potential_eval(problem.potential, 0, self.colloc_x)
        e0 = (problem.energy_guess if sigma_energy is None
              else float(sigma_energy))
        s2x = np.max(np.sum(np.abs(self.X2[:, 1:]), axis=1))
        s2y = np.max(np.sum(np.abs(self.Y2[:, 1:]), axis=1))
        s2z = np.max(np.sum(np.abs(self.Z2[:, 1:]), axis=1))
        self.sigma_x = -(1.0 + abs(e0) + np.max(np.abs(self.v)) + s2x)
        self.sigma_y = -(1.0 + abs(e0) + s2y)
        self.sigma_z = -(1.0 + abs(e0) + s2z)
        self.Nx = np.vstack([self.X0, self.brow_x[None, :]])
        self.Ny = np.vstack([self.Y0, self.brow_y[None, :]])
        self.Nz = np.vstack([self.Z0, self.brow_z[None, :]])
        self.Ly = np.vstack([self.Y2, self.sigma_y * self.brow_y[None, :]])
        self.Lz = np.vstack([self.Z2, self.sigma_z * self.brow_z[None, :]])
        self.Mx = np.vstack([self.X0, np.zeros((1, self.basis_x.size))])

        self.wu = np.asarray(problem.quad_u.weights, dtype=float)
        un = np.asarray(problem.quad_u.nodes, dtype=float)
        self.wv = np.asarray(problem.quad_v.weights, dtype=float)
        self.vn = np.asarray(problem.quad_v.nodes, dtype=float)
        XX, YY = np.meshgrid(self.colloc_x, self.colloc_y, indexing="ij")
        xs2 = XX.ravel()
        ys2 = YY.ravel()
        self.xy2 = xs2 * ys2
        cross = _SQ3H * xs2[:, None] * ys2[:, None] * un[None, :]
        xp = _sqrt_clip(0.25 * xs2[:, None] ** 2 + 0.75 * ys2[:, None] ** 2
                        - cross)
        self.yp1 = _sqrt_clip(0.75 * xs2[:, None] ** 2
                              + 0.25 * ys2[:, None] ** 2 + cross)
        # the guarded x stencils serve every first-slot evaluation, so
        # they become one dense row-set with 1/x' folded in, and the
        # rotated-source samples of both amplitudes reduce to a matrix
        # product against it
        sxp, wxp, invxp = _guarded_stencils(self.basis_x, xp)
        pu = xp.size
        self.Sxp = np.zeros((pu, self.basis_x.size))
        np.put_along_axis(self.Sxp, sxp.reshape(pu, 1) + _OFFS[None, :],
                          (wxp * invxp[..., None]).reshape(pu, 4), axis=1)
        syp, wyp, invyp = _guarded_stencils(self.basis_y, self.yp1)
        self.syp = syp
        self.wyp = wyp * invyp[..., None]
        # plain angular sums: the averaging halves and image counts are
        # already folded into the printed coefficients
        self.pref_pair = self.wu[None, :] * self.xy2[:, None]
        self._deep = None

        XZ, ZZ = np.meshgrid(self.colloc_x, self.colloc_z, indexing="ij")
        xsz = XZ.ravel()
        zsz = ZZ.ravel()
        xzv = xsz[:, None] * zsz[:, None] * self.vn[None, :]
        yh = _sqrt_clip(xsz[:, None] ** 2 / 3.0 + 2.0 * zsz[:, None] ** 2
                        / 3.0 - 2.0 * _SQ2 / 3.0 * xzv)
        zh = _sqrt_clip(2.0 * xsz[:, None] ** 2 / 3.0 + zsz[:, None] ** 2
                        / 3.0 + 2.0 * _SQ2 / 3.0 * xzv)
        syh, wyh, invyh = _guarded_stencils(self.basis_y, yh)
        szh, wzh, invzh = _guarded_stencils(self.basis_z, zh)
        self.syh = syh
        self.szh = szh
        self.wyh = wyh * invyh[..., None]
        self.wzh = wzh * invzh[..., None]
        self.pref_hook = self.wv[None, :] * (xsz * zsz)[:, None]

        self.SwX = _value_matrix(self.basis_x, self.colloc_y)
        self.SwY = _value_matrix(self.basis_y, self.colloc_x)

    def _deep_geometry(self):
        """Flat gather offsets and folded weights of both second-stage
        branches over (pair point, u, z point, v), built once per pack.

        All prefactors are folded in: the weights of the y stencil carry
        1/y'', the branch half-weight, both angular weights and the row's
        x y z product; the z stencil carries 1/z''.  Sampling one source
        then costs sixteen shifted gathers from its staged rows.
        """
        if self._deep is not None:
            return self._deep
        fy = self.basis_y.size
        fz = self.basis_z.size
        za = self.colloc_z
        pref = (0.5 * self.xy2[:, None, None, None]
                * self.wu[None, :, None, None]
                * za[None, None, :, None]
                * self.wv[None, None, None, :])
        yb = self.yp1[:, :, None, None]
        zb = za[None, None, :, None]
        vv = self.vn[None, None, None, :]
        pu_base = np.arange(self.yp1.size).reshape(self.yp1.shape) * (fy * fz)
        itype = np.int64 if self.yp1.size * fy * fz > 2 ** 31 - 4 else np.int32
        cached = []
        for branch_y, branch_z in _DEEP_BRANCHES:
            cy, cz, cc = branch_y
            yi = _sqrt_clip(cy * yb * yb + cz * zb * zb + cc * yb * zb * vv)
            cy, cz, cc = branch_z
            zi = _sqrt_clip(cy * yb * yb + cz * zb * zb + cc * yb * zb * vv)
            sy, wy, invy = _guarded_stencils(self.basis_y, yi)
            sz, wz, invz = _guarded_stencils(self.basis_z, zi)
            base = (pu_base[:, :, None, None] + sy * fz + sz).astype(itype)
            cached.append((base,
                           wy * (invy * pref)[..., None],
                           wz * invz[..., None]))
        self._deep = tuple(cached)
        return self._deep

    def left_x_rows(self, energy):
        interior = self.X2 + (energy - self.v)[:, None] * self.X0
        return np.vstack([interior, self.sigma_x * self.brow_x[None, :]])

    def apply_L(self, data, energy):
        Lx = self.left_x_rows(energy)
        out = np.empty((2, self.mx, self.my, self.mz))
        for a in range(2):
            out[a] = (_rows3(Lx, self.Ny, self.Nz, data[a])
                      + _rows3(self.Nx, self.Ly, self.Nz, data[a])
                      + _rows3(self.Nx, self.Ny, self.Lz, data[a]))
        return out

    def apply_mass(self, data):
        out = np.empty((2, self.mx, self.my, self.mz))
        for a in range(2):
            out[a] = -_rows3(self.Mx, self.Ny, self.Nz, data[a])
        return out

    def apply_R(self, data):
        mxi = self.mx - 1
        myi = self.my - 1
        mzi = self.mz - 1
        p2 = mxi * myi
        u_n = len(self.wu)
        fy = self.basis_y.size
        fz = self.basis_z.size
        deep = self._deep_geometry()
        staged = [self.Sxp @ data[a].reshape(self.basis_x.size, fy * fz)
                  for a in range(2)]
        # pair-plane rotation of phi_1: y stencils at yp1, value rows in z
        pu = np.arange(p2 * u_n)
        patch = staged[0].reshape(-1, fy, fz)[
            pu[:, None], self.syp.reshape(-1, 1) + _OFFS[None, :]]
        folded = np.einsum("paz,pa,p->pz", patch, self.wyp.reshape(-1, 4),
                           self.pref_pair.ravel())
        rows1 = (folded.reshape(p2, u_n, fz).sum(axis=1)) @ self.Z0.T
        # regrouping branches: branch 1 sources phi_1, branch 2 phi_2;
        # chunked so the gather temporaries stay cache-resident
        chunk = 1 << 16
        for (base, wy, wz), src in zip(deep, staged):
            flat = src.ravel()
            bf = base.reshape(-1)
            wyf = wy.reshape(-1, 4)
            wzf = wz.reshape(-1, 4)
            folded = np.empty(base.size)
            for lo in range(0, base.size, chunk):
                hi = min(lo + chunk, base.size)
                acc = 0.0
                for a in range(4):
                    inner = 0.0
                    for b in range(4):
                        inner = inner + (flat[bf[lo:hi] + (a * fz + b)]
                                         * wzf[lo:hi, b])
                    acc = acc + inner * wyf[lo:hi, a]
                folded[lo:hi] = acc
            rows1 += folded.reshape(base.shape).sum(axis=(1, 3))
        rows1 = rows1.reshape(mxi, myi, mzi)

        c1 = data[0]
        swap = np.einsum("yi,xj,zk,ijk->xyz", self.SwX, self.SwY, self.Z0,
                         data[1], optimize=True)
        hookc = self.syh[..., None, None] + _OFFS[:, None]
        hookz = self.szh[..., None, None] + _OFFS[None, :]
        hooked = np.einsum("jpvab,pva,pvb->jpv", c1[:, hookc, hookz],
                           self.wyh, self.wzh)
        hrows = np.einsum("jpv,pv->pj", hooked, self.pref_hook)
        hook = np.einsum("yj,pj->py", self.SwX, hrows)
        hook = hook.reshape(mxi, mzi, myi).transpose(0, 2, 1)

        out = np.zeros((2, self.mx, self.my, self.mz))
        out[0, :-1, :-1, :-1] = self.v[:, None, None] * rows1
        out[1, :-1, :-1, :-1] = self.v[:, None, None] * (swap + hook)
        return out

    def reduced_shape(self):
        return 2, self.mx, self.my, self.mz

    def pad_full(self, flat):
        _, mx, my, mz = self.reduced_shape()
        data = np.zeros((2, self.basis_x.size, self.basis_y.size,
                         self.basis_z.size))
        data[:, 1:, 1:, 1:] = np.asarray(flat, dtype=float).reshape(
            2, mx, my, mz)
        return data


_PACKS4 = weakref.WeakKeyDictionary()


def _cached_pack4(problem):
    pack = _PACKS4.get(problem)
    if pack is None:
        pack = _OperatorPack4(problem)
        _PACKS4[problem] = pack
    return pack


def _check_coeffs4(problem, coeffs):
    if not isinstance(coeffs, TensorCoefficients):
        raise TypeError("coeffs must be TensorCoefficients")
    if coeffs.n_amplitudes != 2:
        raise ValueError("four-body coefficients carry two amplitudes, "
                         "got %d" % coeffs.n_amplitudes)
    if len(coeffs.bases) != 3:
        raise ValueError("need exactly three axes")
    grids = (problem.grid_x, problem.grid_y, problem.grid_z)
    for basis, grid in zip(coeffs.bases, grids):
        if not np.array_equal(basis.nodes, grid.nodes):
            raise ValueError("coefficient bases do not match problem grids")


def apply_operator4(problem, coeffs):
    """Left and chain-coupling rows at the collocation mesh.

    Returns (L c, R c), each (2, 2 n_x + 1, 2 n_y + 1, 2 n_z + 1).  The
    left side is evaluated at the problem's energy guess; its last row
    per axis holds the boundary functionals at the frozen negative scale,
    while the coupling rows are zero there.  Deep-chain rows combine the
    pair-plane rotation of phi_1 with both regrouping branches; two-pair
    rows combine the bare ordering swap of phi_2 with the deep-chain
    coupling of phi_1.  Images beyond a grid edge contribute zero, images
    grazing an axis use the origin derivative stencil.
    """
    _check_coeffs4(problem, coeffs)
    pack = _cached_pack4(problem)
    left = pack.apply_L(coeffs.data, problem.energy_guess)
    right = pack.apply_R(coeffs.data)
    return left, right


def _check_box4(problem, energy):
    # the box should leave room for the classically allowed region
    xs = np.linspace(0.0, problem.grid_x.q_max, 2049)[1:]
    v = potential_eval(problem.potential, 0, xs)
    inside = v <= energy
    xt = float(xs[inside].max()) if np.any(inside) else 0.0
    for label, qmax in (("x_max", problem.grid_x.q_max),
                        ("y_max", problem.grid_y.q_max),
                        ("z_max", problem.grid_z.q_max)):
        if qmax < 4.0 * xt:
            warnings.warn(
                "%s = %g is below 4 times the classical turning distance "
                "%g at energy %g" % (label, qmax, xt, energy),
                RuntimeWarning)


def _block_precond4(pack, energy):
    """One Kronecker factorization serves both identical amplitudes."""
    Lx = pack.left_x_rows(energy)[:, 1:]
    Nx = np.vstack([pack.X0[:, 1:], pack.brow_x[None, 1:]])
    solver = KroneckerPreconditioner(
        [Lx, pack.Ly[:, 1:], pack.Lz[:, 1:]],
        [Nx, pack.Ny[:, 1:], pack.Nz[:, 1:]])
    block = pack.mx * pack.my * pack.mz

    def solve(b):
        return np.concatenate([solver(b[:block]), solver(b[block:])])

    return solve


def _normalize4(pack, data):
    # unit L2 norm over the box, largest collocation value positive
    px, wx = _norm_quadrature(pack.problem.grid_x)
    py, wy = _norm_quadrature(pack.problem.grid_y)
    pz, wz = _norm_quadrature(pack.problem.grid_z)
    ax = pack.basis_x.eval_matrix(px, d=0)
    ay = pack.basis_y.eval_matrix(py, d=0)
    az = pack.basis_z.eval_matrix(pz, d=0)
    norm2 = 0.0
    for a in range(2):
        vals = _rows3(ax, ay, az, data[a])
        norm2 += float(np.einsum("i,j,k,ijk->", wx, wy, wz, vals * vals))
    data = data / np.sqrt(norm2)
    probe = np.stack([_rows3(pack.X0, pack.Y0, pack.Z0, data[a])
                      for a in range(2)])
    flat = probe.ravel()
    if flat[np.argmax(np.abs(flat))] < 0.0:
        data = -data
    return data


def solve_bound4(problem, threshold=0.0, tol_E=1e-9, max_outer=40,
                 inner_tol=1e-10, inner_max_iter=400):
    """Four-body bound state nearest the guess, by inverse iteration.

    The pencil A(E) = L(E) - R and its mass follow fy3 exactly, with the
    boundary scale frozen at the guess; inner solves are preconditioned
    BiCGSTAB behind the three-axis Kronecker factorization.  threshold is
    the lowest breakup energy the caller knows (the three-body ground
    energy for an attractive pair force; zero when nothing tighter is at
    hand); the guess must lie below it, and a result that fails to do so
    raises NoBoundStateError, since it then belongs to the discretized
    continuum rather than to a four-body bound state.
    """
    threshold = float(threshold)
    lam0 = problem.energy_guess
    if not lam0 < threshold:
        raise ValueError("guess %g must lie below the breakup threshold %g"
                         % (lam0, threshold))
    _check_box4(problem, lam0)
    pack = _OperatorPack4(problem, sigma_energy=lam0)
    n_a, mx, my, mz = pack.reduced_shape()
    dim = n_a * mx * my * mz

    def mass_flat(t):
        return pack.apply_mass(pack.pad_full(t)).ravel()

    def solve_at(shift):
        precond = _block_precond4(pack, shift)

        def apply_A(t):
            data = pack.pad_full(t)
            return (pack.apply_L(data, shift) - pack.apply_R(data)).ravel()

        A = LinearOperator(dim, apply_A)

        def inner(b):
            # accept stalled near-converged inner solves, as in fy3
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
                                           mass_apply=mass_flat,
                                           dimension=dim)
    except KrylovError as err:
        last = getattr(err, "lam", None)
        if last is not None and last >= threshold - 1e-10 * (1.0
                                                             + abs(threshold)):
            raise NoBoundStateError(
                "no 4-body bound state near guess (estimate wandered to %g, "
                "threshold %g)" % (last, threshold)) from err
        raise
    if lam >= threshold - 1e-10 * (1.0 + abs(threshold)):
        raise NoBoundStateError(
            "no 4-body bound state near guess (converged to %g, threshold "
            "%g)" % (lam, threshold))
    data = _normalize4(pack, pack.pad_full(xr))
    coeffs = TensorCoefficients(bases=(pack.basis_x, pack.basis_y,
                                       pack.basis_z), data=data)
    return SolveResult4(energy=float(lam), coeffs=coeffs, stats=stats)
