"""Matrix-free linear algebra for the collocation solvers.

Everything here works with operators given as callables on flat vectors.
The centerpiece is the separable preconditioner: the left-hand-side
operator of the amplitude equations is a Kronecker sum

    L = L_1 x N_2 x ... x N_k + N_1 x L_2 x ... x N_k + ...

of small per-axis collocation matrices (L_q differential rows, N_q
interpolation rows), and such a sum is inverted in closed form by
diagonalizing each W_q = N_q^{-1} L_q in the complex plane:

    L^{-1} = (U_1 x ... x U_k) diag(sum_q D_q)^{-1} (U_1^{-1} N_1^{-1} x ...)

Boundary functionals are folded into the per-axis factors as replacement
rows (row r in N_q, sigma*r in L_q with one large negative sigma), which
keeps the Kronecker structure exact: the enforced solution is annihilated
by the functional regardless of sigma, and the spurious per-axis eigenvalue
sigma is pushed far from the physical spectrum so the denominators above
stay away from zero.

The outer drivers are a right-preconditioned BiCGSTAB (convergence judged
on true residuals) and inverse iteration for energy eigenvalues of
operator pencils.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "KrylovError",
    "LinearOperator",
    "SolverStats",
    "KroneckerPreconditioner",
    "axis_factor_matrices",
    "build_precond",
    "bicgstab",
    "inverse_iteration",
    "dense_reference_solve",
    "kron_sum_dense",
]


class KrylovError(RuntimeError):
    """Linear or eigenvalue solver failure; carries the last iterate."""

    def __init__(self, message, x=None, stats=None):
        super().__init__(message)
        self.x = x
        self.stats = stats


@dataclass
class SolverStats:
    iterations: int = 0
    residual: float = np.inf
    wall_time: float = 0.0
    converged: bool = False
    restarts: int = 0


class LinearOperator:
    """A square operator given by its action on vectors.

    Linearity is spot-checked at construction on three random triples
    (a*x + b*y against a*A(x) + b*A(y), relative 1e-10), so a buggy
    matrix-free apply fails loudly instead of poisoning a Krylov run.
    Pass probe=False only when rebuilding an operator whose apply was
    already probed in the same configuration.
    """

    def __init__(self, dimension, apply, probe=True):
        self.dimension = int(dimension)
        self.apply = apply
        if probe:
            self._probe_linearity()

    def __call__(self, x):
        return self.apply(x)

    def _probe_linearity(self):
        rng = np.random.default_rng(0x51AB)
        xs = [rng.standard_normal(self.dimension) for _ in range(3)]
        ys = [self.apply(x) for x in xs]
        pairs = [(0, 1), (1, 2), (2, 0)]
        for i, j in pairs:
            a, b = rng.standard_normal(2)
            lhs = self.apply(a * xs[i] + b * xs[j])
            rhs = a * ys[i] + b * ys[j]
            scale = max(1.0, np.max(np.abs(rhs)))
            err = np.max(np.abs(lhs - rhs))
            if not err <= 1e-10 * scale:
                raise KrylovError(
                    "operator failed linearity probe: |A(ax+by) - aAx - bAy| = %g "
                    "(scale %g)" % (err, scale)
                )

    @classmethod
    def from_matrix(cls, A, probe=True):
        A = np.asarray(A, dtype=float)
        return cls(A.shape[0], lambda x: A @ x, probe=probe)


def bicgstab(A, M, b, tol=1e-10, max_iter=200):
    """Right-preconditioned BiCGSTAB for A x = b.

    Parameters
    ----------
    A : LinearOperator or callable
    M : callable or None
        Approximate-inverse action; applied on the right, so the recursion
        residuals (and the reported one) are residuals of the original
        system.
    b : ndarray
    tol : float
        Relative residual target ||Ax - b|| <= tol * ||b||.
    max_iter : int

    Returns
    -------
    (x, SolverStats)

    Convergence by the recursion residual is confirmed against the true
    residual b - A x before success is reported.  A rho or omega breakdown
    restarts once from the current iterate; a second breakdown, or running
    out of iterations, raises KrylovError.
    """
    apply_A = A.apply if isinstance(A, LinearOperator) else A
    apply_M = (lambda v: v) if M is None else M
    b = np.asarray(b, dtype=float)
    t0 = time.perf_counter()
    bnorm = np.linalg.norm(b)
    stats = SolverStats()
    if bnorm == 0.0:
        stats.residual = 0.0
        stats.converged = True
        stats.wall_time = time.perf_counter() - t0
        return np.zeros_like(b), stats

    x = np.zeros_like(b)
    r = b.copy()
    r_shadow = r.copy()
    rho_prev = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    tiny = 1e-290

    def finish(x, relres, n_iter):
        stats.iterations = n_iter
        stats.residual = relres
        stats.converged = True
        stats.wall_time = time.perf_counter() - t0
        return x, stats

    def true_relres(x):
        return np.linalg.norm(b - apply_A(x)) / bnorm

    n_iter = 0
    while n_iter < max_iter:
        n_iter += 1
        rho = float(r_shadow @ r)
        breakdown = abs(rho) < tiny or abs(omega) < tiny or not np.isfinite(rho)
        if breakdown:
            if stats.restarts >= 1:
                stats.iterations = n_iter
                stats.wall_time = time.perf_counter() - t0
                raise KrylovError(
                    "BiCGSTAB breakdown persisted after restart (rho=%g, omega=%g)"
                    % (rho, omega), x=x, stats=stats)
            stats.restarts += 1
            r = b - apply_A(x)
            r_shadow = r.copy()
            rho_prev = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            rho = float(r_shadow @ r)
            if abs(rho) < tiny:
                # restarting from the exact solution
                relres = np.linalg.norm(r) / bnorm
                if relres <= tol:
                    return finish(x, relres, n_iter)
                stats.iterations = n_iter
                stats.wall_time = time.perf_counter() - t0
                raise KrylovError("BiCGSTAB stagnated at restart", x=x, stats=stats)
        beta = (rho / rho_prev) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = apply_M(p)
        v = apply_A(p_hat)
        denom = float(r_shadow @ v)
        if abs(denom) < tiny or not np.isfinite(denom):
            rho_prev = rho
            omega = 0.0  # force breakdown handling next round
            continue
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) <= tol * bnorm:
            x = x + alpha * p_hat
            relres = true_relres(x)
            if relres <= tol:
                return finish(x, relres, n_iter)
            r = b - apply_A(x)
            r_shadow = r.copy()
            rho_prev = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            continue
        s_hat = apply_M(s)
        t = apply_A(s_hat)
        tt = float(t @ t)
        omega = float(t @ s) / tt if tt > 0.0 else 0.0
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        rho_prev = rho
        if np.linalg.norm(r) <= tol * bnorm:
            relres = true_relres(x)
            if relres <= tol:
                return finish(x, relres, n_iter)
            r = b - apply_A(x)

    stats.iterations = max_iter
    stats.residual = np.linalg.norm(b - apply_A(x)) / bnorm
    stats.wall_time = time.perf_counter() - t0
    raise KrylovError(
        "BiCGSTAB did not reach %g in %d iterations (residual %g)"
        % (tol, max_iter, stats.residual), x=x, stats=stats)


def axis_factor_matrices(basis, points, potential=None, energy=0.0,
                         boundary="dirichlet", sigma=None):
    """One-dimensional collocation factor pair (L_q, N_q) for one axis.

    The origin value spline is dropped (regular solutions vanish at 0), so
    the factors are square of size 2n+1: 2n collocation rows plus one
    boundary row.  Interior rows are

        N: S_j(q_i)
        L: energy*S_j(q_i) + S_j''(q_i) - v(q_i)*S_j(q_i)

    and the boundary row is the outer-edge functional r (value row for
    "dirichlet", cos(p q_max) * derivative row + p sin(p q_max) * value row
    for ("robin", p)) entered as r in N and sigma*r in L.  sigma defaults
    to a negative number dominating the interior scale; pass it explicitly
    to keep it frozen across energy updates of the same solve.

    Returns (L, N, sigma).
    """
    points = np.asarray(points, dtype=float)
    V0 = basis.eval_matrix(points, d=0)[:, 1:]
    V2 = basis.eval_matrix(points, d=2)[:, 1:]
    m = V0.shape[1]
    if len(points) + 1 != m:
        raise ValueError("need %d collocation points for %d unknowns"
                         % (m - 1, m))
    if potential is None:
        v = np.zeros(len(points))
    elif callable(potential):
        v = np.asarray(potential(points), dtype=float)
    else:
        v = np.asarray(potential, dtype=float)
        if v.shape != points.shape:
            raise ValueError("potential sample length mismatch")
    L = np.zeros((m, m))
    N = np.zeros((m, m))
    N[:-1] = V0
    L[:-1] = V2 + (energy - v)[:, None] * V0
    q_max = basis.grid.q_max
    if boundary == "dirichlet":
        row = basis.eval_matrix([q_max], d=0)[0, 1:]
    elif isinstance(boundary, tuple) and len(boundary) == 2 and boundary[0] == "robin":
        p = float(boundary[1])
        row = (np.cos(p * q_max) * basis.eval_matrix([q_max], d=1)[0, 1:]
               + p * np.sin(p * q_max) * basis.eval_matrix([q_max], d=0)[0, 1:])
    else:
        raise ValueError("boundary must be 'dirichlet' or ('robin', p)")
    if sigma is None:
        sigma = -(1.0 + abs(energy) + np.max(np.abs(v))
                  + np.max(np.sum(np.abs(V2), axis=1)))
    N[-1] = row
    L[-1] = sigma * row
    return L, N, float(sigma)


def _apply_axis(mat, x, axis):
    x = np.moveaxis(x, axis, 0)
    shp = x.shape
    y = mat @ x.reshape(shp[0], -1)
    return np.moveaxis(y.reshape((mat.shape[0],) + shp[1:]), 0, axis)


class KroneckerPreconditioner:
    """Exact inverse of a Kronecker sum of per-axis factor pairs.

    Holds, per axis q: the factors (L_q, N_q), the complex eigenpairs
    (D_q, U_q) of W_q = N_q^{-1} L_q, and the combined left transform
    U_q^{-1} N_q^{-1}.  solve() realizes

        x = (x U_q) . [ (x U_q^{-1} N_q^{-1}) b / outer_sum(D) ]

    and matvec() the forward Kronecker-sum action, both on flat vectors
    (tensor-shaped input is accepted and returned in kind).
    """

    def __init__(self, axis_L, axis_N):
        self.axis_L = [np.asarray(L, dtype=float) for L in axis_L]
        self.axis_N = [np.asarray(N, dtype=float) for N in axis_N]
        if len(self.axis_L) != len(self.axis_N) or not self.axis_L:
            raise ValueError("need matching nonempty factor lists")
        self.dims = tuple(L.shape[0] for L in self.axis_L)
        self.dimension = int(np.prod(self.dims))
        self.eig_values = []
        self.eig_vectors = []
        self._front = []
        for L, N in zip(self.axis_L, self.axis_N):
            if L.shape != N.shape or L.shape[0] != L.shape[1]:
                raise ValueError("axis factors must be square and same-shaped")
            try:
                Ninv = np.linalg.inv(N)
            except np.linalg.LinAlgError:
                raise KrylovError("axis interpolation matrix N is singular")
            W = Ninv @ L
            D, U = scipy.linalg.eig(W)
            scale = max(1.0, np.max(np.abs(W)))
            resid = np.max(np.abs(W @ U - U * D[None, :]))
            if not resid <= 1e-9 * scale:
                raise KrylovError(
                    "axis eigendecomposition residual %g exceeds %g"
                    % (resid, 1e-9 * scale))
            if np.linalg.cond(U) > 1e12:
                raise KrylovError(
                    "axis pencil is numerically defective (eigenvector "
                    "condition > 1e12); perturb the grid slightly")
            self.eig_values.append(D)
            self.eig_vectors.append(U)
            self._front.append(np.linalg.solve(U, Ninv.astype(complex)))
        denom = self.eig_values[0]
        for D in self.eig_values[1:]:
            denom = denom[..., None] + D
        self._denom = denom
        dmin = np.min(np.abs(denom))
        dscale = max(1.0, np.max(np.abs(denom)))
        if dmin < 1e-12 * dscale:
            raise KrylovError(
                "Kronecker denominator %g of scale %g: the separable operator "
                "is near-singular at this energy; adjust energy or grid"
                % (dmin, dscale))

    def solve(self, b):
        b = np.asarray(b)
        flat = b.ndim == 1
        y = b.reshape(self.dims).astype(complex)
        for a, F in enumerate(self._front):
            y = _apply_axis(F, y, a)
        y = y / self._denom
        for a, U in enumerate(self.eig_vectors):
            y = _apply_axis(U, y, a)
        y = y.real
        return y.reshape(-1) if flat else y

    __call__ = solve

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ndim == 1
        xt = x.reshape(self.dims)
        out = np.zeros(self.dims)
        k = len(self.dims)
        for a in range(k):
            t = xt
            for q in range(k):
                t = _apply_axis(self.axis_L[q] if q == a else self.axis_N[q], t, q)
            out += t
        return out.reshape(-1) if flat else out


def build_precond(axes):
    """Build the Kronecker preconditioner from per-axis descriptions.

    axes is a sequence of tuples (basis, points, potential, energy,
    boundary) or (..., sigma) as accepted by axis_factor_matrices; the
    potential and energy entries are conventionally nonzero on the first
    (pair-coordinate) axis only.
    """
    Ls, Ns = [], []
    for spec in axes:
        L, N, _ = axis_factor_matrices(*spec)
        Ls.append(L)
        Ns.append(N)
    return KroneckerPreconditioner(Ls, Ns)


def kron_sum_dense(axis_L, axis_N):
    """Dense Kronecker-sum assembly of the same operator, for oracles."""
    k = len(axis_L)
    out = 0.0
    for a in range(k):
        term = np.array([[1.0]])
        for q in range(k):
            term = np.kron(term, axis_L[q] if q == a else axis_N[q])
        out = out + term
    return out


def inverse_iteration(solve_at, lam0, tol_E=1e-9, max_outer=60,
                      mass_apply=None, x0=None, dimension=None,
                      refresh_shift=True, seed=7):
    """Inverse iteration for the pencil eigenvalue nearest lam0.

    The pencil P(lam) is singular exactly at eigenvalues; solve_at(lam)
    must return a callable solving P(lam) x = b.  mass_apply is the action
    of M = -dP/dlam (identity when omitted, which is the classical A - lam
    case).  Each outer step solves P(shift) y = M x and updates

        lam <- shift + <Mx, x> / <Mx, y>

    which for M = identity is the textbook shift + <x,x>/<x,y> ratio.  The
    shift stays at lam0 while the estimates still bounce around (fixed-shift
    iteration filters the start vector toward the eigenpair nearest lam0),
    follows the estimate once successive updates contract to a small
    fraction of the estimate's distance from the shift (by then the
    iteration is locked into that eigenvalue's basin), and freezes once the
    updates drop below about 1e-4 of the eigenvalue scale, so the inner
    systems stay comfortably regular: the remaining distance to the
    eigenvalue caps their condition number, while the estimate itself
    still converges geometrically at (distance / spectral gap) per step,
    which costs only a couple of extra outer steps.  That cap is what lets
    iterative inner solvers reach their residual targets; a backward-stable
    direct inner solver would tolerate far closer shifts, but gains nothing
    from them.  Convergence is declared when successive estimates differ by
    less than tol_E.

    Returns (lam, x, SolverStats); x is normalized with a deterministic
    sign (largest-magnitude entry positive).
    """
    t0 = time.perf_counter()
    if x0 is None:
        if dimension is None:
            raise ValueError("pass x0 or dimension")
        # smooth deterministic start: healthy overlap with low modes, the
        # jitter guards against exact orthogonality to the target
        rng = np.random.default_rng(seed)
        x = np.ones(int(dimension)) + 1e-3 * rng.standard_normal(int(dimension))
    else:
        x = np.asarray(x0, dtype=float).copy()
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ValueError("start vector is zero")
    x /= nx
    lam = float(lam0)
    shift = lam
    frozen = False
    solver = solve_at(shift)
    stats = SolverStats()
    for k in range(1, max_outer + 1):
        z = x if mass_apply is None else mass_apply(x)
        y = solver(z)
        zy = float(z @ y)
        if abs(zy) < 1e-290 or not np.isfinite(zy):
            raise KrylovError("inverse iteration breakdown: <Mx, y> = %g" % zy,
                              x=x, stats=stats)
        lam_new = shift + float(z @ x) / zy
        step = abs(lam_new - lam)
        x = y / np.linalg.norm(y)
        imax = int(np.argmax(np.abs(x)))
        if x[imax] < 0.0:
            x = -x
        stats.iterations = k
        stats.residual = step
        lam = lam_new
        if k > 1 and step < tol_E:
            stats.converged = True
            stats.wall_time = time.perf_counter() - t0
            return lam, x, stats
        if refresh_shift and not frozen and k >= 2:
            if step < max(100.0 * tol_E, 1e-4 * (1.0 + abs(lam))):
                frozen = True
            elif step < 0.25 * abs(lam - shift):
                shift = lam
                solver = solve_at(shift)
    stats.wall_time = time.perf_counter() - t0
    err = KrylovError(
        "inverse iteration did not converge in %d steps (last step %g)"
        % (max_outer, stats.residual), x=x, stats=stats)
    # callers triage non-convergence by where the estimate ended up: an
    # estimate bouncing inside a continuum cluster means there is nothing
    # isolated near the guess, not that the linear algebra failed
    err.lam = lam
    raise err


def dense_reference_solve(A, b):
    """LU-with-pivoting direct solve, for small oracle systems only."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[0] > 5000:
        raise ValueError("dense reference solve capped at dimension 5000, got %d"
                         % A.shape[0])
    if A.shape[0] != b.shape[0]:
        raise ValueError("right-hand side length mismatch")
    lu, piv = scipy.linalg.lu_factor(A)
    if np.any(np.diag(lu) == 0.0) or not np.all(np.isfinite(lu)):
        raise np.linalg.LinAlgError("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), b)
