"""Variational upper bounds on 3- and 4-cluster ground energies of the
pairwise s-wave-projected Hamiltonian, from permutation-symmetrized
correlated Gaussians.

Each basis term is exp(-q^T D q) with D diagonal in one chain's scaled
Jacobi frame.  Relabeling particles turns D into a congruent dense form,
so a symmetrized basis function is a finite sum of vector Gaussians
exp(-q^T A q) over the k = N-1 relative vectors, and

    <A|B>          = pi^(3k/2) det(A+B)^(-3/2)
    <A|-Lap_q|B>   = 6 Tr[B (A+B)^(-1) A] <A|B>.

The potential is not the bare pair interaction: the amplitude solver this
oracle serves discretizes the Hamiltonian whose pair terms are projected
onto relative s-waves pair by pair.  Averaging a vector Gaussian over one
pair's direction replaces the cross couplings h into that coordinate by
the entire function sinh(2|h|x)/(2|h|x); the radial pair integral of the
bra and ket factors against a Gaussian well is then closed form, leaving
the complementary coordinates: nothing at N=3 (fully closed form) and a
smooth 3-dimensional integral at N=4 (tensor Gauss-Legendre).

Only Gaussian potential terms are supported.  The N=3 frontend exists to
cross-check this machinery against the independent series oracle in
variational_oracle.py; the N=4 frontend is the production bound.
"""

import itertools

import numpy as np

from fysolve.twobody import PotentialSpec


def chain_rows_3():
    # x = r1 - r2, y = sqrt(4/3) (R12 - r3); rows have squared norm 2
    s13 = np.sqrt(1.0 / 3.0)
    return np.array([
        [1.0, -1.0, 0.0],
        [s13, s13, -2.0 * s13],
    ])


def chain_rows_4_deep():
    # x = r1 - r2, y = sqrt(4/3) (R12 - r3), z = sqrt(3/2) (R123 - r4)
    s13 = np.sqrt(1.0 / 3.0)
    return np.array([
        [1.0, -1.0, 0.0, 0.0],
        [s13, s13, -2.0 * s13, 0.0],
        [np.sqrt(1.0 / 6.0)] * 3 + [-np.sqrt(3.0 / 2.0)],
    ])


def chain_rows_4_pair():
    # xi = r1 - r2, eta = r3 - r4, zeta = sqrt(2) (R12 - R34)
    h = np.sqrt(0.5)
    return np.array([
        [1.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, -1.0],
        [h, h, -h, -h],
    ])


def frame_forms(ref_rows, chain_rows, diag):
    """Distinct relabeled forms of diag, with their common multiplicity.

    All row matrices here satisfy rows rows^T = 2I, so expressing a
    relabeled chain's diagonal form in the reference frame is
    A = (1/4) ref (rows_P^T D rows_P) ref^T.  Orbit-stabilizer makes the
    multiplicity uniform across the orbit.
    """
    n = ref_rows.shape[1]
    d = np.diag(np.asarray(diag, dtype=float))
    seen = []
    count = 0
    for perm in itertools.permutations(range(n)):
        count += 1
        rows = chain_rows[:, perm]
        a = 0.25 * ref_rows @ (rows.T @ d @ rows) @ ref_rows.T
        a = 0.5 * (a + a.T)
        if not any(np.max(np.abs(a - b)) < 1e-12 for b in seen):
            seen.append(a)
    return np.array(seen), count // len(seen)


def pair_vectors(ref_rows):
    """Unit vectors c with r_i - r_j = sum_a c_a q_a, one per pair."""
    n = ref_rows.shape[1]
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros(n)
            e[i] = 1.0
            e[j] = -1.0
            out.append(0.5 * ref_rows @ e)
    return np.array(out)


def _pair_frames(cs):
    """One orthogonal matrix per pair, first row the pair's unit vector."""
    frames = []
    for c in cs:
        k = len(c)
        m = np.eye(k)
        m[:, 0] = c
        q, _ = np.linalg.qr(m)
        if q[:, 0] @ c < 0.0:
            q = -q
        frames.append(q.T)
    return np.array(frames)


def _overlap_kinetic(a, b, k):
    m = a + b
    mi = np.linalg.inv(m)
    s = np.pi ** (1.5 * k) * np.linalg.det(m) ** -1.5
    t = 6.0 * np.trace(b @ mi @ a) * s
    return s, t


def _ln_j0(t):
    """ln(sinh(t)/t) for t >= 0, stable across the whole range."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t < 0.01
    big = t > 30.0
    mid = ~small & ~big
    ts = t[small]
    out[small] = np.log1p(ts * ts / 6.0 * (1.0 + ts * ts / 20.0
                                           * (1.0 + ts * ts / 42.0)))
    out[mid] = np.log(np.sinh(t[mid]) / t[mid])
    out[big] = t[big] - np.log(2.0 * t[big])
    return out


def _sqrt_diff_ratio(beta, gamma):
    """[(beta-gamma)^(-1/2) - (beta+gamma)^(-1/2)] / gamma, stable at 0."""
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    t = gamma / beta
    series = (1.0 + 0.625 * t * t + 0.984375 * t ** 4) * beta ** -1.5
    with np.errstate(invalid="ignore", divide="ignore"):
        exact = (1.0 / np.sqrt(beta - gamma)
                 - 1.0 / np.sqrt(beta + gamma)) / gamma
    return np.where(t < 1e-3, series, exact)


def _potential_k2(axx, ha, ayy, bxx, hb, byy, pot_terms):
    """Projected pair element, one complementary vector: fully closed."""
    total = 0.0
    for strength, g in pot_terms:
        c0 = axx + bxx + g
        beta = ayy + byy - (ha * ha + hb * hb) / c0
        gamma = 2.0 * abs(ha * hb) / c0
        if beta - gamma <= 0.0:
            raise ValueError("non-integrable projected element")
        radial = 0.25 * np.sqrt(np.pi) * _sqrt_diff_ratio(beta, gamma)
        total += (strength * 16.0 * np.pi ** 2
                  * np.sqrt(np.pi / c0) / (4.0 * c0) * radial)
    return float(total)


class _QuadK3:
    """Tensor Gauss-Legendre rule for the two complementary radii and
    their angle cosine, radii scaled per element."""

    def __init__(self, n_rad=48, n_ang=24):
        t, w = np.polynomial.legendre.leggauss(n_rad)
        self.rt = 0.5 * (t + 1.0)
        self.rw = 0.5 * w
        self.vt, self.vw = np.polynomial.legendre.leggauss(n_ang)


def _potential_k3(axx, ha, ayz, bxx, hb, byz, pot_terms, quad, mult):
    """Projected pair elements, two complementary vectors, batched.

    axx, ha, ayz describe the bra form in the pair-adapted frame and
    broadcast against the ket arrays bxx (..., ), hb (..., 2),
    byz (..., 2, 2); mult broadcasts likewise.  Returns the summed scalar.
    """
    s = ayz + byz
    total = 0.0
    for strength, g in pot_terms:
        c0 = axx + bxx + g
        corr = (np.einsum("...i,...j->...ij", ha, ha)
                + np.einsum("...i,...j->...ij", hb, hb)) / c0[..., None, None]
        seff = s - corr
        tr = seff[..., 0, 0] + seff[..., 1, 1]
        det = (seff[..., 0, 0] * seff[..., 1, 1]
               - seff[..., 0, 1] * seff[..., 1, 0])
        lam_min = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0)))
        if np.any(lam_min <= 0.0) or np.any(det <= 0.0):
            raise ValueError("non-integrable projected element")
        radius = 8.5 / np.sqrt(lam_min)
        y = radius[..., None, None, None] * quad.rt[:, None, None]
        z = radius[..., None, None, None] * quad.rt[None, :, None]
        v = quad.vt[None, None, :]
        wts = (radius[..., None, None, None] ** 2
               * quad.rw[:, None, None] * quad.rw[None, :, None]
               * quad.vw[None, None, :])
        yz = y * z
        ha2 = (ha[..., 0, None, None, None] ** 2 * y * y
               + ha[..., 1, None, None, None] ** 2 * z * z
               + 2.0 * ha[..., 0, None, None, None]
               * ha[..., 1, None, None, None] * yz * v)
        hb2 = (hb[..., 0, None, None, None] ** 2 * y * y
               + hb[..., 1, None, None, None] ** 2 * z * z
               + 2.0 * hb[..., 0, None, None, None]
               * hb[..., 1, None, None, None] * yz * v)
        ha2 = np.maximum(ha2, 0.0)
        hb2 = np.maximum(hb2, 0.0)
        c0e = c0[..., None, None, None]
        expo = (-(s[..., 0, 0, None, None, None] * y * y
                  + s[..., 1, 1, None, None, None] * z * z
                  + 2.0 * s[..., 0, 1, None, None, None] * yz * v)
                + (ha2 + hb2) / c0e
                + _ln_j0(2.0 * np.sqrt(ha2 * hb2) / c0e))
        vals = yz * yz * np.exp(expo)
        slab = np.sum(vals * wts, axis=(-3, -2, -1))
        pref = (strength * 32.0 * np.pi ** 3
                * np.sqrt(np.pi / c0) / (4.0 * c0))
        total += float(np.sum(mult * pref * slab))
    return total


def _gaussian_terms(spec):
    terms = []
    for shape, strength, rng in spec.per_amplitude[0]:
        if shape != "gaussian":
            raise ValueError("only gaussian potential terms supported, "
                             "got %r" % (shape,))
        terms.append((float(strength), 1.0 / float(rng) ** 2))
    return terms


def _lowest(h, s):
    h = 0.5 * (h + h.T)
    s = 0.5 * (s + s.T)
    w, u = np.linalg.eigh(s)
    keep = w > 1e-12 * w.max()
    back = u[:, keep] / np.sqrt(w[keep])
    return float(np.min(np.linalg.eigvalsh(back.T @ h @ back)))


def _assemble(ref_rows, spec, form_sets, quad):
    k = ref_rows.shape[0]
    pot = _gaussian_terms(spec)
    cs = pair_vectors(ref_rows)
    frames = _pair_frames(cs)

    # pair-adapted blocks of every distinct form, per pair frame
    adapted = []
    for forms, mult in form_sets:
        tilde = np.einsum("pab,fbc,pdc->fpad", frames, forms, frames)
        adapted.append((tilde, mult))

    n = len(form_sets)
    smat = np.zeros((n, n))
    hmat = np.zeros((n, n))
    for i in range(n):
        di = form_sets[i][0][0]
        di_ad = adapted[i][0][0]
        for j in range(i, n):
            forms_j, mult_j = form_sets[j]
            sv = 0.0
            tv = 0.0
            for b in forms_j:
                s, t = _overlap_kinetic(di, b, k)
                sv += mult_j * s
                tv += mult_j * t
            tilde_j = adapted[j][0]
            pv = 0.0
            for p in range(len(cs)):
                a_ad = di_ad[p]
                b_ad = tilde_j[:, p]
                if k == 2:
                    for bb in b_ad:
                        pv += mult_j * _potential_k2(
                            a_ad[0, 0], a_ad[0, 1], a_ad[1, 1],
                            bb[0, 0], bb[0, 1], bb[1, 1], pot)
                else:
                    pv += _potential_k3(
                        a_ad[0, 0], a_ad[0, 1:], a_ad[1:, 1:],
                        b_ad[:, 0, 0], b_ad[:, 0, 1:], b_ad[:, 1:, 1:],
                        pot, quad, float(mult_j))
            smat[i, j] = smat[j, i] = sv
            hmat[i, j] = hmat[j, i] = tv + pv
    return hmat, smat


def variational_energy3_projected(spec, exponent_pairs):
    """3-cluster bound from the closed-form path; series cross-check."""
    if not isinstance(spec, PotentialSpec):
        raise TypeError("spec must be a PotentialSpec")
    ref = chain_rows_3()
    sets = [frame_forms(ref, ref, ab) for ab in exponent_pairs]
    h, s = _assemble(ref, spec, sets, None)
    return _lowest(h, s)


def default_triples4():
    """Small tempered product set: 18 deep-chain + 4 pair-chain terms."""
    deep = [(a, b, c)
            for a in (0.12, 0.42, 1.5)
            for b in (0.1, 0.35, 1.2)
            for c in (0.09, 0.5)]
    pair = [(a, a, g) for a in (0.15, 0.7) for g in (0.1, 0.6)]
    return deep, pair


def variational_energy4(spec, deep_triples=None, pair_triples=None,
                        n_rad=48, n_ang=24):
    """4-cluster ground-energy upper bound for a Gaussian pair potential.

    deep_triples are exponents in the deep-chain frame (pair,
    pair-spectator, trimer-spectator); pair_triples in the two-pair frame
    (pair, pair, separation).  Both sets are relabeling-symmetrized.
    """
    if not isinstance(spec, PotentialSpec):
        raise TypeError("spec must be a PotentialSpec")
    if deep_triples is None or pair_triples is None:
        d0, p0 = default_triples4()
        deep_triples = d0 if deep_triples is None else deep_triples
        pair_triples = p0 if pair_triples is None else pair_triples
    ref = chain_rows_4_deep()
    hrows = chain_rows_4_pair()
    sets = [frame_forms(ref, ref, t) for t in deep_triples]
    sets += [frame_forms(ref, hrows, t) for t in pair_triples]
    h, s = _assemble(ref, spec, sets, _QuadK3(n_rad, n_ang))
    return _lowest(h, s)
