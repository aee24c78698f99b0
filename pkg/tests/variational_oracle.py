"""Independent variational upper bound for three-boson ground energies.

A symmetrized set of product Gaussians, exp(-a x_p^2 - b y_p^2) summed
over the three partitions p, is evaluated against the s-wave-projected
Hamiltonian in closed form.  Re-expressing one partition's Gaussian in
another's coordinates turns the angular average into the entire function
sinh(s x y)/(s x y); expanding it termwise reduces every matrix element
to one- or two-index series over radial Gaussian moments.  Each series
has all terms of one sign and a guaranteed geometric tail (the ratio is
controlled by the positive definiteness of the summed exponents), so it
is summed in log space to machine accuracy.

Only Gaussian potential terms are supported; that is what the solver
comparisons use.  The result is a strict upper bound on the ground
energy of the same projected Hamiltonian the coupled-amplitude solver
discretizes, so solver energies may sit below it only by their own
discretization error.
"""

import numpy as np
from scipy.special import gammaln

_SQ3H = np.sqrt(3.0) / 2.0


def _log_radial_moment(alpha, m):
    # ln of int_0^inf t^(m+2) exp(-alpha t^2) dt for integer m >= 0
    m = np.asarray(m, dtype=float)
    return (np.log(0.5) + gammaln((m + 3.0) / 2.0)
            - ((m + 3.0) / 2.0) * np.log(alpha))


def _series_length(rho):
    if rho >= 0.995:
        raise ValueError("series ratio %g too close to 1" % rho)
    if rho < 0.3:
        return 120
    return min(4000, 120 + int(-90.0 / np.log(rho)))


def _sum_log_terms(lnmag, sign):
    top = np.max(lnmag)
    return sign * float(np.exp(top) * np.sum(np.exp(lnmag - top)))


def g1(P, Q, s, tx=0, ty=0, mu=0):
    """sum_l s^l / l! <u^(l+mu)> Ix(P, l+tx) Iy(Q, l+ty), the quarter-plane
    moment of x^(2+tx) y^(2+ty) u^mu exp(-P x^2 - Q y^2 + s x y u) under
    the normalized angular average; only l with l+mu even survive."""
    if P <= 0.0 or Q <= 0.0:
        raise ValueError("need positive quadratic forms")
    if s == 0.0:
        if mu % 2 == 1:
            return 0.0
        return float(np.exp(_log_radial_moment(P, tx)
                            + _log_radial_moment(Q, ty)) / (mu + 1.0))
    rho = s * s / (4.0 * P * Q)
    lmax = _series_length(rho)
    l = np.arange(mu % 2, lmax, 2)
    lnmag = (l * np.log(abs(s)) - gammaln(l + 1.0) - np.log(l + mu + 1.0)
             + _log_radial_moment(P, l + tx) + _log_radial_moment(Q, l + ty))
    tail = np.exp(lnmag[-1] - np.max(lnmag))
    if tail > 1e-15:
        raise RuntimeError("series truncated too early (tail %g)" % tail)
    sign = 1.0 if (mu % 2 == 0 or s > 0.0) else -1.0
    return _sum_log_terms(lnmag, sign)


def g2(P, Q, sj, sk):
    """Double series: the quarter-plane moment of x^2 y^2 exp(-P x^2 -
    Q y^2) times the product of two angular averages sinh(sj x y)/(sj x y)
    and likewise for sk.  Terms carry even powers only, so all are
    positive."""
    if P <= 0.0 or Q <= 0.0:
        raise ValueError("need positive quadratic forms")
    if sj == 0.0:
        return g1(P, Q, sk)
    if sk == 0.0:
        return g1(P, Q, sj)
    rho = (abs(sj) + abs(sk)) ** 2 / (4.0 * P * Q)
    lmax = _series_length(rho)
    i = np.arange(0, lmax, 2)
    l = np.arange(0, lmax, 2)
    II, LL = np.meshgrid(i, l, indexing="ij")
    lnmag = (II * np.log(abs(sj)) + LL * np.log(abs(sk))
             - gammaln(II + 2.0) - gammaln(LL + 2.0)
             + _log_radial_moment(P, II + LL)
             + _log_radial_moment(Q, II + LL))
    corner = np.exp(max(lnmag[-1, -1], lnmag[-1, 0], lnmag[0, -1])
                    - np.max(lnmag))
    if corner > 1e-15:
        raise RuntimeError("double series truncated too early (%g)" % corner)
    return _sum_log_terms(lnmag, 1.0)


def _params(a, b):
    # re-expression of exp(-a x'^2 - b y'^2) in the partner's coordinates
    p = 0.25 * a + 0.75 * b
    q = 0.75 * a + 0.25 * b
    s = _SQ3H * (a - b)
    return p, q, s


def _overlap(aj, bj, ak, bk):
    pk, qk, sk = _params(ak, bk)
    same = float(np.exp(_log_radial_moment(aj + ak, 0)
                        + _log_radial_moment(bj + bk, 0)))
    cross = g1(aj + pk, bj + qk, sk)
    return 3.0 * (same + 2.0 * cross)


def _kinetic(aj, bj, ak, bk):
    pj, qj, sj = _params(aj, bj)
    pk, qk, sk = _params(ak, bk)
    A, B = aj + ak, bj + bk
    c0 = 6.0 * (ak + bk)
    same = (c0 * np.exp(_log_radial_moment(A, 0) + _log_radial_moment(B, 0))
            - 4.0 * ak * ak * np.exp(_log_radial_moment(A, 2)
                                     + _log_radial_moment(B, 0))
            - 4.0 * bk * bk * np.exp(_log_radial_moment(A, 0)
                                     + _log_radial_moment(B, 2)))
    # bra in its own set, operator's polynomial re-expressed there
    P, Q = aj + pk, bj + qk
    gx2 = g1(P, Q, sk, tx=2)
    gy2 = g1(P, Q, sk, ty=2)
    gxyu = g1(P, Q, sk, tx=1, ty=1, mu=1)
    cross_jk = (c0 * g1(P, Q, sk)
                - 4.0 * ak * ak * (0.25 * gx2 + 0.75 * gy2 - _SQ3H * gxyu)
                - 4.0 * bk * bk * (0.75 * gx2 + 0.25 * gy2 + _SQ3H * gxyu))
    # operator's polynomial already in the ket's set, bra re-expressed
    P2, Q2 = ak + pj, bk + qj
    cross_kj = (c0 * g1(P2, Q2, sj)
                - 4.0 * ak * ak * g1(P2, Q2, sj, tx=2)
                - 4.0 * bk * bk * g1(P2, Q2, sj, ty=2))
    return 3.0 * (float(same) + cross_jk + cross_kj)


def _potential(aj, bj, ak, bk, terms):
    pj, qj, sj = _params(aj, bj)
    pk, qk, sk = _params(ak, bk)
    total = 0.0
    for strength, rng in terms:
        g = 1.0 / (rng * rng)
        own = float(np.exp(_log_radial_moment(aj + ak + g, 0)
                           + _log_radial_moment(bj + bk, 0)))
        one_j = 2.0 * g1(ak + pj + g, bk + qj, sj)
        one_k = 2.0 * g1(aj + pk + g, bj + qk, sk)
        both = 4.0 * g2(pj + pk + g, qj + qk, sj, sk)
        total += 3.0 * strength * (own + one_j + one_k + both)
    return total


def _gaussian_terms(spec):
    terms = []
    for shape, strength, rng in spec.per_amplitude[0]:
        if shape != "gaussian":
            raise ValueError("variational oracle handles gaussian terms "
                             "only, got %r" % shape)
        terms.append((float(strength), float(rng)))
    return terms


def geometric_set(lo, hi, n):
    return list(np.exp(np.linspace(np.log(lo), np.log(hi), n)))


def variational_energy3(spec, a_list=None, b_list=None, check_symmetry=True):
    """Upper bound on the three-boson ground energy for a Gaussian-term
    PotentialSpec (single amplitude).  a_list and b_list are the pair and
    spectator exponent sets; the basis is their product."""
    terms = _gaussian_terms(spec)
    if a_list is None:
        a_list = geometric_set(0.04, 3.0, 8)
    if b_list is None:
        b_list = geometric_set(0.015, 1.5, 8)
    prm = [(a, b) for a in a_list for b in b_list]
    n = len(prm)
    S = np.empty((n, n))
    H = np.empty((n, n))
    for j in range(n):
        aj, bj = prm[j]
        for k in range(j, n):
            ak, bk = prm[k]
            S[j, k] = S[k, j] = _overlap(aj, bj, ak, bk)
            H[j, k] = _kinetic(aj, bj, ak, bk) + _potential(aj, bj, ak, bk,
                                                            terms)
            if k != j:
                H[k, j] = _kinetic(ak, bk, aj, bj) + _potential(ak, bk, aj,
                                                                bj, terms)
    if check_symmetry:
        scale = np.max(np.abs(H))
        asym = np.max(np.abs(H - H.T))
        if asym > 1e-9 * scale:
            raise RuntimeError("matrix-element asymmetry %g" % (asym / scale))
    H = 0.5 * (H + H.T)
    evals, U = np.linalg.eigh(S)
    keep = evals > 1e-12 * evals[-1]
    X = U[:, keep] / np.sqrt(evals[keep])
    return float(np.linalg.eigvalsh(X.T @ H @ X)[0])


def brute_g1(P, Q, s, tx=0, ty=0, mu=0, span=14.0, pieces=24, order=24):
    """Direct quadrature of the g1 integrand, for checking the series."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, span / np.sqrt(min(P, Q, 1.0)), pieces + 1)
    pts = []
    wts = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        pts.append(0.5 * (hi - lo) * (t + 1.0) + lo)
        wts.append(0.5 * (hi - lo) * w)
    x = np.concatenate(pts)
    wx = np.concatenate(wts)
    u, wu = np.polynomial.legendre.leggauss(48)
    X = x[:, None, None]
    Y = x[None, :, None]
    U = u[None, None, :]
    f = (X ** (2 + tx) * Y ** (2 + ty) * U ** mu
         * np.exp(-P * X * X - Q * Y * Y + s * X * Y * U))
    ang = 0.5 * np.tensordot(f, wu, axes=([2], [0]))
    return float(wx @ ang @ wx)


def brute_g2(P, Q, sj, sk, span=14.0, pieces=24, order=24):
    """Direct quadrature of the g2 integrand, for checking the series."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, span / np.sqrt(min(P, Q, 1.0)), pieces + 1)
    pts = []
    wts = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        pts.append(0.5 * (hi - lo) * (t + 1.0) + lo)
        wts.append(0.5 * (hi - lo) * w)
    x = np.concatenate(pts)
    wx = np.concatenate(wts)

    def log_j0(xi):
        # ln(sinh(xi)/xi) for xi >= 0, stable for large arguments
        xi = np.abs(xi)
        out = np.zeros_like(xi)
        big = xi > 30.0
        mid = (xi > 1e-8) & ~big
        out[big] = xi[big] - np.log(2.0 * xi[big])
        out[mid] = np.log(np.sinh(xi[mid]) / xi[mid])
        return out

    X = x[:, None]
    Y = x[None, :]
    lnf = (2.0 * np.log(X) + 2.0 * np.log(Y) - P * X * X - Q * Y * Y
           + log_j0(sj * X * Y) + log_j0(sk * X * Y))
    return float(wx @ np.exp(lnf) @ wx)
