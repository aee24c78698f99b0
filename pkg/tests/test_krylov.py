"""BiCGSTAB, Kronecker preconditioner, inverse iteration, dense solver."""

import numpy as np
import pytest
import scipy.linalg

from fysolve.basis import SplineBasis, collocation_points, make_grid
from fysolve.krylov import (
    KroneckerPreconditioner,
    KrylovError,
    LinearOperator,
    axis_factor_matrices,
    bicgstab,
    build_precond,
    dense_reference_solve,
    inverse_iteration,
    kron_sum_dense,
)


def test_linear_operator_probe_passes_for_matrix():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(12, 12))
    op = LinearOperator.from_matrix(A)
    x = rng.normal(size=12)
    assert np.allclose(op(x), A @ x)


def test_linear_operator_probe_rejects_nonlinear():
    with pytest.raises(KrylovError):
        LinearOperator(8, lambda x: x**2)


def test_bicgstab_identity_one_iteration():
    n = 20
    b = np.linspace(1.0, 2.0, n)
    x, stats = bicgstab(LinearOperator(n, lambda v: v), None, b)
    assert stats.converged
    assert stats.iterations == 1
    assert np.allclose(x, b, atol=1e-12)


def test_bicgstab_zero_rhs():
    x, stats = bicgstab(LinearOperator(5, lambda v: 2 * v), None, np.zeros(5))
    assert stats.converged and stats.iterations == 0
    assert np.all(x == 0.0)


def test_bicgstab_diagonally_dominant_matches_dense():
    rng = np.random.default_rng(42)
    n = 100
    A = rng.normal(size=(n, n))
    A += np.diag(np.sum(np.abs(A), axis=1) + 1.0)
    b = rng.normal(size=n)
    tol = 1e-10
    x, stats = bicgstab(LinearOperator.from_matrix(A), None, b, tol=tol, max_iter=500)
    x_ref = dense_reference_solve(A, b)
    assert stats.converged
    assert np.linalg.norm(x - x_ref) / np.linalg.norm(x_ref) < tol * 10


def test_bicgstab_exact_preconditioner_one_iteration():
    rng = np.random.default_rng(1)
    n = 30
    A = rng.normal(size=(n, n)) + 5.0 * np.eye(n)
    Ainv = np.linalg.inv(A)
    b = rng.normal(size=n)
    x, stats = bicgstab(LinearOperator.from_matrix(A), lambda v: Ainv @ v, b)
    assert stats.iterations == 1
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-10


def test_bicgstab_max_iter_raises_with_iterate():
    rng = np.random.default_rng(3)
    n = 40
    A = rng.normal(size=(n, n)) + 5.0 * np.eye(n)
    b = rng.normal(size=n)
    with pytest.raises(KrylovError) as exc:
        bicgstab(LinearOperator.from_matrix(A), None, b, tol=1e-14, max_iter=2)
    assert exc.value.x is not None
    assert exc.value.stats.iterations == 2


def test_axis_factor_shapes_and_boundary_row():
    g = make_grid(5, 6.0)
    b = SplineBasis(g)
    pts = collocation_points(g)
    L, N, sigma = axis_factor_matrices(b, pts)
    m = 2 * g.n_intervals + 1
    assert L.shape == N.shape == (m, m)
    assert sigma < 0.0
    # Dirichlet boundary row picks out the outer-node value spline
    expect = np.zeros(m)
    expect[m - 2] = 1.0
    assert np.allclose(N[-1], expect, atol=1e-12)
    assert np.allclose(L[-1], sigma * expect, atol=1e-12)


def test_axis_factor_robin_row():
    g = make_grid(4, 5.0)
    b = SplineBasis(g)
    pts = collocation_points(g)
    p = 0.6
    L, N, sigma = axis_factor_matrices(b, pts, boundary=("robin", p))
    m = 2 * g.n_intervals + 1
    expect = np.zeros(m)
    expect[m - 1] = np.cos(p * 5.0)      # outer derivative spline
    expect[m - 2] = p * np.sin(p * 5.0)  # outer value spline
    assert np.allclose(N[-1], expect, atol=1e-12)
    # the functional passes a cos(p q) tail untouched and flags sin(p q),
    # so imposing it as a zero row removes any sin admixture
    cos_tail = np.zeros(b.size)
    cos_tail[0::2] = np.cos(p * b.nodes)
    cos_tail[1::2] = -p * np.sin(p * b.nodes)
    sin_tail = np.zeros(b.size)
    sin_tail[0::2] = np.sin(p * b.nodes)
    sin_tail[1::2] = p * np.cos(p * b.nodes)
    assert abs(N[-1] @ cos_tail[1:]) < 1e-12
    assert abs(N[-1] @ sin_tail[1:] - p) < 1e-12


def test_precond_1d_is_exact_inverse():
    g = make_grid(6, 7.0, mapping="geometric", ratio=1.2)
    b = SplineBasis(g)
    pts = collocation_points(g)
    pre = build_precond([(b, pts, lambda q: -2.0 * np.exp(-q * q), -0.5, "dirichlet")])
    Ld = kron_sum_dense(pre.axis_L, pre.axis_N)
    rng = np.random.default_rng(9)
    rhs = rng.normal(size=pre.dimension)
    x, stats = bicgstab(LinearOperator.from_matrix(Ld), pre.solve, rhs)
    assert stats.iterations == 1
    assert np.linalg.norm(Ld @ x - rhs) / np.linalg.norm(rhs) < 1e-10


def test_precond_2d_inverse_against_dense():
    gx = make_grid(4, 8.0, mapping="geometric", ratio=1.25)
    gy = make_grid(4, 10.0)
    bx, by = SplineBasis(gx), SplineBasis(gy)
    axes = [
        (bx, collocation_points(gx), lambda q: -3.0 * np.exp(-(q**2)), -0.7, "dirichlet"),
        (by, collocation_points(gy), None, 0.0, "dirichlet"),
    ]
    pre = build_precond(axes)
    Ld = kron_sum_dense(pre.axis_L, pre.axis_N)
    n = pre.dimension
    assert n == 81
    Linv = np.column_stack([pre.solve(col) for col in np.eye(n)])
    assert np.max(np.abs(Ld @ Linv - np.eye(n))) < 1e-8
    # forward action agrees with the dense assembly too
    rng = np.random.default_rng(4)
    x = rng.normal(size=n)
    assert np.max(np.abs(pre.matvec(x) - Ld @ x)) < 1e-10 * max(1, np.max(np.abs(Ld @ x)))


def test_precond_3d_inverse_against_dense():
    grids = [make_grid(3, 6.0, mapping="geometric", ratio=1.3),
             make_grid(3, 7.0),
             make_grid(3, 8.0)]
    bases = [SplineBasis(g) for g in grids]
    axes = [(bases[0], collocation_points(grids[0]),
             lambda q: -2.5 * np.exp(-(q**2)), -0.4, "dirichlet"),
            (bases[1], collocation_points(grids[1]), None, 0.0, "dirichlet"),
            (bases[2], collocation_points(grids[2]), None, 0.0, "dirichlet")]
    pre = build_precond(axes)
    Ld = kron_sum_dense(pre.axis_L, pre.axis_N)
    n = pre.dimension
    assert n == 343
    Linv = np.column_stack([pre.solve(col) for col in np.eye(n)])
    assert np.max(np.abs(Ld @ Linv - np.eye(n))) < 1e-7


def test_precond_eigen_reconstruction():
    g = make_grid(4, 6.0)
    b = SplineBasis(g)
    pre = build_precond([(b, collocation_points(g), None, 0.0, "dirichlet")])
    L, N = pre.axis_L[0], pre.axis_N[0]
    W = np.linalg.solve(N, L)
    D, U = pre.eig_values[0], pre.eig_vectors[0]
    scale = max(1.0, np.max(np.abs(W)))
    assert np.max(np.abs(U @ np.diag(D) @ np.linalg.inv(U) - W)) < 1e-10 * scale
    for d, u in zip(D, U.T):
        assert np.linalg.norm(W @ u - d * u) < 1e-10 * scale


def test_precond_rejects_defective_axis():
    J = np.array([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(KrylovError):
        KroneckerPreconditioner([J], [np.eye(2)])


def test_precond_rejects_singular_denominator():
    L1 = np.diag([1.0, 2.0])
    L2 = np.diag([-1.0, 5.0])
    with pytest.raises(KrylovError):
        KroneckerPreconditioner([L1, L2], [np.eye(2), np.eye(2)])


def test_precond_rejects_singular_N():
    with pytest.raises(KrylovError):
        KroneckerPreconditioner([np.eye(2)], [np.zeros((2, 2))])


def test_inverse_iteration_diag_nearest():
    A = np.diag([1.0, 2.0, 3.0])
    solve_at = lambda lam: (lambda b: np.linalg.solve(A - lam * np.eye(3), b))
    lam, x, stats = inverse_iteration(solve_at, 1.8, dimension=3, refresh_shift=False)
    assert abs(lam - 2.0) < 1e-9
    assert np.allclose(x, [0.0, 1.0, 0.0], atol=1e-5)
    assert stats.converged


def test_inverse_iteration_random_symmetric_matches_dense():
    rng = np.random.default_rng(17)
    n = 50
    A = rng.normal(size=(n, n))
    A = 0.5 * (A + A.T)
    evals = np.linalg.eigvalsh(A)
    target = evals[n // 3]
    lam0 = target + 0.3 * (evals[n // 3 + 1] - target)
    solve_at = lambda lam: (lambda b: np.linalg.solve(A - lam * np.eye(n), b))
    lam, x, stats = inverse_iteration(solve_at, lam0, dimension=n, tol_E=1e-12)
    assert abs(lam - target) < 1e-10
    assert np.linalg.norm(A @ x - lam * x) < 1e-8


def test_inverse_iteration_generalized_pencil_with_mass():
    rng = np.random.default_rng(23)
    n = 18
    A = rng.normal(size=(n, n))
    A = 0.5 * (A + A.T)
    B = rng.normal(size=(n, n))
    B = 0.5 * (B + B.T) + n * np.eye(n)
    evals = scipy.linalg.eigvalsh(A, B)
    target = evals[4]
    lam0 = target - 0.3 * (target - evals[3])
    solve_at = lambda lam: (lambda b: np.linalg.solve(A - lam * B, b))
    lam, x, stats = inverse_iteration(solve_at, lam0, dimension=n,
                                      mass_apply=lambda v: B @ v, tol_E=1e-12)
    assert abs(lam - target) < 1e-9
    assert np.linalg.norm(A @ x - lam * B @ x) < 1e-7


def test_inverse_iteration_shift_independence():
    A = np.diag([-5.0, -2.0, -0.5, 1.0])
    solve_at = lambda lam: (lambda b: np.linalg.solve(A - lam * np.eye(4), b))
    lam1, _, _ = inverse_iteration(solve_at, -4.0, dimension=4)
    lam2, _, _ = inverse_iteration(solve_at, -4.8, dimension=4)
    assert abs(lam1 - lam2) < 1e-9
    assert abs(lam1 + 5.0) < 1e-9


def test_inverse_iteration_max_outer():
    A = np.diag([1.0, 1.000001])
    solve_at = lambda lam: (lambda b: np.linalg.solve(A - lam * np.eye(2), b))
    with pytest.raises(KrylovError):
        inverse_iteration(solve_at, 0.0, dimension=2, max_outer=1)


def test_dense_reference_identity():
    b = np.arange(6.0)
    assert np.allclose(dense_reference_solve(np.eye(6), b), b)


def test_dense_reference_hilbert_vs_analytic_inverse():
    n = 5
    H = scipy.linalg.hilbert(n)
    Hinv = scipy.linalg.invhilbert(n, exact=True).astype(float)
    b = np.ones(n)
    x = dense_reference_solve(H, b)
    assert np.max(np.abs(x - Hinv @ b)) < 1e-7 * np.max(np.abs(Hinv @ b))


def test_dense_reference_random_residual():
    rng = np.random.default_rng(31)
    A = rng.normal(size=(100, 100)) + 10.0 * np.eye(100)
    b = rng.normal(size=100)
    x = dense_reference_solve(A, b)
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-10


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_dense_reference_guards():
    with pytest.raises(ValueError):
        dense_reference_solve(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        dense_reference_solve(np.eye(5001), np.zeros(5001))
    with pytest.raises(np.linalg.LinAlgError):
        dense_reference_solve(np.zeros((3, 3)), np.ones(3))
