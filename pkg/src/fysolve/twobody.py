"""Pair potentials and the S-wave two-body bound state.

Units are hbar^2/m0 = 1 with equal masses, so the radial coordinate x is
the interparticle distance and the reduced radial equation is

    (eps + d^2/dx^2 - v(x)) u(x) = 0,    u(0) = 0, u(x_max) = 0.

The pair energy eps < 0 and wave function u feed the three-body solvers:
eps sets the elastic threshold and u both the incoming-channel driving term
and the phase-shift extraction.  Solving on the same grid and collocation
rule as the three-body x axis makes the elastic driving term satisfied
exactly at the collocation points, so solve_pair is deliberately built on
the identical axis factors used there.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis import Grid1D, SplineBasis, collocation_points, gauss_legendre
from .krylov import axis_factor_matrices, inverse_iteration

__all__ = [
    "NoBoundStateError",
    "PotentialSpec",
    "PairSolution",
    "potential_eval",
    "solve_pair",
]

_SHAPES = ("gaussian", "yukawa", "exponential")


class NoBoundStateError(RuntimeError):
    """The discrete spectrum near the guess holds no negative eigenvalue."""


@dataclass(frozen=True)
class PotentialSpec:
    """Per-amplitude short-range potential, each a sum of standard terms.

    per_amplitude is a tuple over amplitudes; each entry is a tuple of
    (shape, strength, range) terms with shape one of gaussian, yukawa,
    exponential.  All shapes decay faster than 1/x^2, which is what the
    asymptotic matching assumes.
    """

    per_amplitude: tuple

    def __post_init__(self):
        if not self.per_amplitude:
            raise ValueError("need at least one amplitude")
        for terms in self.per_amplitude:
            for shape, strength, rng in terms:
                if shape not in _SHAPES:
                    raise ValueError("unknown potential shape %r" % (shape,))
                if not float(rng) > 0.0:
                    raise ValueError("potential range must be positive, got %g"
                                     % float(rng))

    @property
    def n_amplitudes(self):
        return len(self.per_amplitude)

    @classmethod
    def uniform(cls, terms, n_amplitudes=1):
        """Same term list on every amplitude."""
        t = tuple((s, float(a), float(r)) for s, a, r in terms)
        return cls(per_amplitude=(t,) * n_amplitudes)


def potential_eval(spec, alpha, x):
    """v_alpha(x) for scalar or array x >= 0.

    Yukawa terms diverge at the origin, so x = 0 is rejected when one is
    present; collocation and quadrature points are always strictly inside
    the intervals, which is where this is called.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValueError("potential evaluated at negative distance")
    if not 0 <= alpha < spec.n_amplitudes:
        raise IndexError("amplitude index %d out of range" % alpha)
    out = np.zeros_like(x)
    for shape, strength, rng in spec.per_amplitude[alpha]:
        if shape == "gaussian":
            out += strength * np.exp(-((x / rng) ** 2))
        elif shape == "exponential":
            out += strength * np.exp(-x / rng)
        else:  # yukawa
            if np.any(x == 0.0):
                raise ValueError("yukawa term diverges at x = 0")
            out += strength * np.exp(-x / rng) / x
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class PairSolution:
    """Bound pair state: energy, full-basis spline coefficients, grid."""

    energy: float
    u_coeffs: np.ndarray
    grid: Grid1D

    def basis(self):
        return SplineBasis(self.grid)

    def evaluate(self, x, d=0, outside="zero"):
        return self.basis().evaluate(self.u_coeffs, x, d=d, outside=outside)


def _norm_quadrature(grid):
    # order 4 per interval: exact for the degree-6 square of a cubic
    rule = gauss_legendre(4)
    a = grid.nodes[:-1]
    h = grid.widths
    pts = (a[:, None] + 0.5 * (rule.nodes[None, :] + 1.0) * h[:, None]).reshape(-1)
    wts = (0.5 * h[:, None] * rule.weights[None, :]).reshape(-1)
    return pts, wts


def solve_pair(spec, grid, lam0, alpha=0, tol_E=1e-9, max_outer=60):
    """Ground (or nearest-to-guess) pair bound state on a radial grid.

    Collocation with the same reduced Hermite basis and Gauss-point rows as
    the many-body axes; the energy eigenvalue is found by inverse iteration
    on the one-axis pencil, with dense LU factorizations as inner solver.
    The pencil is small, so the shift is first localized by a dense
    generalized eigensolve; inverse iteration then starts inside the right
    basin regardless of how coarse the caller's guess was, which matters
    when the discretized continuum crowds the guess.

    Parameters
    ----------
    spec : PotentialSpec
    grid : Grid1D
    lam0 : float
        Negative energy guess; the eigenvalue nearest the guess is returned.
    alpha : int
        Which amplitude's potential to use.

    Returns
    -------
    PairSolution
        With u normalized to unit integral of u^2 and a positive peak.

    Raises
    ------
    NoBoundStateError
        If the converged eigenvalue is not negative.
    """
    if not lam0 < 0.0:
        raise ValueError("bound-state guess must be negative, got %g" % lam0)
    basis = SplineBasis(grid)
    pts = collocation_points(grid)
    v = potential_eval(spec, alpha, pts)
    m = basis.size - 1
    _, N, sigma = axis_factor_matrices(basis, pts, potential=v, energy=lam0)
    mass = -N
    mass[-1] = 0.0

    def solve_at(lam):
        L, _, _ = axis_factor_matrices(basis, pts, potential=v, energy=lam,
                                       sigma=sigma)
        lu_piv = scipy.linalg.lu_factor(L)
        return lambda b: scipy.linalg.lu_solve(lu_piv, b)

    # the slot nearest the guess, from the dense spectrum of the pencil
    L0, _, _ = axis_factor_matrices(basis, pts, potential=v, energy=0.0,
                                    sigma=sigma)
    evals = scipy.linalg.eig(L0, mass, right=False)
    evals = evals[np.isfinite(evals)]
    real = evals.real[np.abs(evals.imag) <= 1e-6 * (1.0 + np.abs(evals.real))]
    if len(real) == 0:
        raise NoBoundStateError("one-axis pencil has no real spectrum")
    lam_loc = float(real[np.argmin(np.abs(real - lam0))])
    shift = lam_loc - 1e-5 * (1.0 + abs(lam_loc))

    lam, xr, _ = inverse_iteration(solve_at, shift, tol_E=tol_E,
                                   max_outer=max_outer,
                                   mass_apply=lambda t: mass @ t, dimension=m)
    if not lam < 0.0:
        raise NoBoundStateError(
            "no bound state near guess (converged to %g >= 0)" % lam)
    coeffs = np.zeros(basis.size)
    coeffs[1:] = xr
    qpts, qwts = _norm_quadrature(grid)
    u = basis.evaluate(coeffs, qpts)
    norm2 = float(qwts @ (u * u))
    coeffs /= np.sqrt(norm2)
    u = basis.evaluate(coeffs, qpts)
    if u[np.argmax(np.abs(u))] < 0.0:
        coeffs = -coeffs
    return PairSolution(energy=float(lam), u_coeffs=coeffs, grid=grid)
