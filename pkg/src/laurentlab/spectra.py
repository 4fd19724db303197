"""Eigensolvers, arc projectors and resolvent probes.

The only dense eigenkernel in the package is a cyclic Jacobi iteration
for Hermitian matrices; unitary operators are diagonalized through the
commuting Hermitian pair (U + U*)/2, (U - U*)/(2i), which exploits
normality instead of a nonsymmetric QR.  Sweeps use a round-robin
ordering so each round applies a set of disjoint rotations at once.
"""

from __future__ import annotations

import math
import threading
import weakref
from dataclasses import dataclass, field

import numpy as np

from .errors import ArcError, ConvergenceError, DomainError
from .lattice import Box, LatticeOperator
from .symbol import range_arc, wrap_phase

TWO_PI = 2.0 * math.pi

JACOBI_TOL = 1e-13
JACOBI_SWEEP_CAP = 60
CLUSTER_GAP = 1e-8
ORTHONORMAL_TOL = 1e-10
RESIDUAL_TOL = 1e-8
MODULUS_TOL = 1e-10
NORMALITY_TOL = 1e-10


# ----------------------------------------------------------------------
# Jacobi kernel
# ----------------------------------------------------------------------

def _round_robin_rounds(n: int):
    """Tournament pairings: n-1 rounds of disjoint pairs covering all pairs."""
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps), np.array(qs)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _rotate_pairs(a: np.ndarray, v: np.ndarray, ps: np.ndarray, qs: np.ndarray):
    """Annihilate a[p, q] for disjoint index pairs with 2x2 unitary rotations."""
    apq = a[ps, qs]
    r = np.abs(apq)
    # entries below ~sqrt(min normal float) are treated as already zero;
    # subnormal pivots would overflow the divisions below
    live = r > 1e-150
    r_safe = np.where(live, r, 1.0)
    phase = np.where(live, apq / r_safe, 1.0)
    app = a[ps, ps].real
    aqq = a[qs, qs].real
    tau = (aqq - app) / (2.0 * r_safe)
    sgn = np.where(tau >= 0.0, 1.0, -1.0)
    t = np.where(live, -sgn / (np.abs(tau) + np.hypot(tau, 1.0)), 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c

    rp = a[ps, :]
    rq = a[qs, :]
    a[ps, :] = c[:, None] * rp + (s * phase)[:, None] * rq
    a[qs, :] = -(s * np.conj(phase))[:, None] * rp + c[:, None] * rq
    cp = a[:, ps]
    cq = a[:, qs]
    a[:, ps] = c[None, :] * cp + (s * np.conj(phase))[None, :] * cq
    a[:, qs] = -(s * phase)[None, :] * cp + c[None, :] * cq
    vp = v[:, ps]
    vq = v[:, qs]
    v[:, ps] = c[None, :] * vp + (s * np.conj(phase))[None, :] * vq
    v[:, qs] = -(s * phase)[None, :] * vp + c[None, :] * vq
    a[ps, qs] = 0.0
    a[qs, ps] = 0.0


def _offdiag_frobenius(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def jacobi_hermitian(matrix: np.ndarray, tol: float = JACOBI_TOL,
                     sweep_cap: int = JACOBI_SWEEP_CAP):
    """Full eigendecomposition of a Hermitian matrix by cyclic Jacobi sweeps.

    Convergence is declared when the off-diagonal Frobenius mass falls
    below ``tol`` times the Frobenius norm of the input.  Returns
    eigenvalues ascending and the matching orthonormal eigenvector
    columns.
    """
    a = np.array(matrix, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n == 1:
        return a.real.ravel().copy(), v
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return np.zeros(n), v
    rounds = _round_robin_rounds(n)
    off = _offdiag_frobenius(a)
    for _ in range(sweep_cap):
        if off <= tol * scale:
            break
        for ps, qs in rounds:
            _rotate_pairs(a, v, ps, qs)
        off = _offdiag_frobenius(a)
    else:
        raise ConvergenceError(
            f"Jacobi sweeps exhausted with off-diagonal mass {off:.3e}",
            defect=off)
    w = np.diagonal(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


# ----------------------------------------------------------------------
# spectral data
# ----------------------------------------------------------------------

@dataclass(eq=False)
class SpectralData:
    """Eigendecomposition record.

    ``phases`` holds sorted eigenphases in [0, 2*pi) for unitary
    operators and plain sorted eigenvalues for Hermitian ones.
    """

    box: Box
    kind: str
    phases: np.ndarray
    vectors: np.ndarray
    residual: float
    modulus_defect: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.phases.size

    def participation_ratios(self) -> np.ndarray:
        """1 / sum |v_i|^4 per normalized eigenvector; ~size when extended."""
        density = np.abs(self.vectors) ** 2
        return 1.0 / np.sum(density ** 2, axis=0)


_EIG_CACHE: "weakref.WeakKeyDictionary[LatticeOperator, dict]" = weakref.WeakKeyDictionary()
_EIG_LOCK = threading.Lock()


def _cached(op: LatticeOperator, kind: str, builder):
    with _EIG_LOCK:
        slot = _EIG_CACHE.setdefault(op, {})
        if kind in slot:
            return slot[kind]
    data = builder()
    with _EIG_LOCK:
        _EIG_CACHE.setdefault(op, {})[kind] = data
    return data


def hermitian_eig(op: LatticeOperator, tol: float = JACOBI_TOL,
                  sweep_cap: int = JACOBI_SWEEP_CAP) -> SpectralData:
    """Eigendecomposition of a Hermitian lattice operator (cached)."""
    if not op.hermitian:
        raise DomainError("operator is not flagged hermitian")
    op.verify_hermitian()

    def build():
        w, v = jacobi_hermitian(op.matrix, tol=tol, sweep_cap=sweep_cap)
        residual = float(np.max(np.linalg.norm(op.matrix @ v - v * w, axis=0)))
        data = SpectralData(box=op.box, kind="hermitian", phases=w, vectors=v,
                            residual=residual)
        _check_spectral(data)
        return data

    return _cached(op, "hermitian", build)


def unitary_eig(op: LatticeOperator, cluster_gap: float = CLUSTER_GAP) -> SpectralData:
    """Eigenphases and eigenvectors of a unitary operator (cached).

    Diagonalizes the commuting Hermitian pair H1 = (U + U*)/2,
    H2 = (U - U*)/(2i): H1 first, then the compression of H2 inside each
    H1 eigenvalue cluster.  Phases are recovered as atan2(h2, h1).
    """
    if not op.unitary:
        op.verify_unitary()
    m = op.matrix
    normality = float(np.max(np.abs(m @ m.conj().T - m.conj().T @ m)))
    if normality > NORMALITY_TOL:
        raise DomainError(f"normality defect {normality:.3e} exceeds {NORMALITY_TOL:g}")

    def build():
        h1 = (m + m.conj().T) / 2.0
        h2 = (m - m.conj().T) / 2.0j
        w1, v = jacobi_hermitian(h1)
        lam2 = np.empty_like(w1)
        start = 0
        n = w1.size
        while start < n:
            stop = start + 1
            while stop < n and w1[stop] - w1[stop - 1] < cluster_gap:
                stop += 1
            block = v[:, start:stop]
            if stop - start == 1:
                lam2[start] = np.real(np.vdot(block[:, 0], h2 @ block[:, 0]))
            else:
                comp = block.conj().T @ h2 @ block
                comp = (comp + comp.conj().T) / 2.0
                w2, u = jacobi_hermitian(comp)
                v[:, start:stop] = block @ u
                lam2[start:stop] = w2
            start = stop
        phases = wrap_phase(np.arctan2(lam2, w1))
        moduli = np.hypot(w1, lam2)
        order = np.argsort(phases, kind="stable")
        phases = phases[order]
        vectors = v[:, order]
        eigs = np.exp(1j * phases)
        residual = float(np.max(np.linalg.norm(m @ vectors - vectors * eigs, axis=0)))
        data = SpectralData(box=op.box, kind="unitary", phases=phases,
                            vectors=vectors, residual=residual,
                            modulus_defect=np.abs(moduli[order] - 1.0))
        _check_spectral(data)
        if np.max(data.modulus_defect) > MODULUS_TOL:
            raise ConvergenceError(
                "eigenvalue modulus defect "
                f"{np.max(data.modulus_defect):.3e} exceeds {MODULUS_TOL:g}; "
                "cluster splitting failed", defect=float(np.max(data.modulus_defect)))
        return data

    return _cached(op, "unitary", build)


def _check_spectral(data: SpectralData) -> None:
    v = data.vectors
    gram_defect = float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))))
    if gram_defect > ORTHONORMAL_TOL:
        raise ConvergenceError(f"eigenvectors lost orthonormality: {gram_defect:.3e}",
                               defect=gram_defect)
    if data.residual > RESIDUAL_TOL:
        raise ConvergenceError(f"eigen residual {data.residual:.3e} exceeds "
                               f"{RESIDUAL_TOL:g}", defect=data.residual)


# ----------------------------------------------------------------------
# arcs
# ----------------------------------------------------------------------

def arc_width(arc) -> float:
    low, high = float(arc[0]), float(arc[1])
    if high - low >= TWO_PI:
        return TWO_PI
    return float(np.mod(high - low, TWO_PI))


def arc_membership(phases: np.ndarray, arc) -> np.ndarray:
    """Strict membership of phases in the counterclockwise arc low -> high."""
    width = arc_width(arc)
    if width == TWO_PI:
        return np.ones_like(np.asarray(phases), dtype=bool)
    if width == 0.0:
        return np.zeros_like(np.asarray(phases), dtype=bool)
    low = wrap_phase(float(arc[0]))
    dist = np.mod(np.asarray(phases) - low, TWO_PI)
    return (dist > 0.0) & (dist < width)


def arc_projector(data: SpectralData, arc) -> LatticeOperator:
    """Sum of eigenprojectors with phase strictly inside the arc."""
    mask = arc_membership(data.phases, arc)
    block = data.vectors[:, mask]
    p = block @ block.conj().T
    return LatticeOperator(data.box, p, hermitian=True)


def _smootherstep(u: np.ndarray) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)


def arc_filter_profile(phases: np.ndarray, arc, smoothing: float) -> np.ndarray:
    """C^2 bump: 1 on the arc shrunk by ``smoothing``, 0 outside the arc."""
    width = arc_width(arc)
    if smoothing >= width / 2.0:
        raise ArcError(f"smoothing {smoothing} >= half arc width {width / 2.0}")
    if width == TWO_PI:
        return np.ones_like(np.asarray(phases, dtype=float))
    low = wrap_phase(float(arc[0]))
    dist = np.mod(np.asarray(phases) - low, TWO_PI)
    inside = (dist > 0.0) & (dist < width)
    up = _smootherstep(dist / smoothing)
    down = _smootherstep((width - dist) / smoothing)
    return np.where(inside, np.minimum(up, down), 0.0)


def arc_filter(data: SpectralData, arc, smoothing: float) -> LatticeOperator:
    """Smoothed spectral cutoff Phi(U) = sum phi(theta_k) P_k."""
    phi = arc_filter_profile(data.phases, arc, smoothing)
    mask = phi > 0.0
    block = data.vectors[:, mask]
    p = (block * phi[mask][None, :]) @ block.conj().T
    return LatticeOperator(data.box, p, hermitian=True)


# ----------------------------------------------------------------------
# essential-arc comparison
# ----------------------------------------------------------------------

@dataclass
class ArcCompareReport:
    """Classification of eigenphases against the essential arc."""

    arc: tuple
    endpoint_exclusion: float
    inside_count: int
    outlier_count: int
    suspect_count: int
    unclassified_count: int
    outliers: list = field(default_factory=list)  # (index, phase, participation)


def essential_arc_compare(data: SpectralData, a: float,
                          endpoint_exclusion: float = 0.0,
                          extended_fraction: float = 0.2) -> ArcCompareReport:
    """Compare eigenphases of a perturbed operator with the symbol arc.

    Phases inside the arc are bulk; phases outside are outlier (discrete
    eigenvalue) candidates, kept only when their eigenvector is localized
    (participation ratio below ``extended_fraction`` times the dimension);
    phases within ``endpoint_exclusion`` of an arc endpoint stay
    unclassified because truncation artifacts concentrate there.
    """
    low, high = range_arc(a)
    pr = data.participation_ratios()
    n = data.size
    inside = outliers = suspects = unclassified = 0
    outlier_list = []
    for i, theta in enumerate(data.phases):
        d_end = min(_phase_dist(theta, low), _phase_dist(theta, high))
        if d_end <= endpoint_exclusion:
            unclassified += 1
            continue
        if arc_membership(np.array([theta]), (low, high))[0]:
            inside += 1
        else:
            if pr[i] < extended_fraction * n:
                outliers += 1
                outlier_list.append((i, float(theta), float(pr[i])))
            else:
                suspects += 1
    return ArcCompareReport(arc=(low, high), endpoint_exclusion=endpoint_exclusion,
                            inside_count=inside, outlier_count=outliers,
                            suspect_count=suspects, unclassified_count=unclassified,
                            outliers=outlier_list)


def _phase_dist(a: float, b: float) -> float:
    d = abs(wrap_phase(a) - wrap_phase(b))
    return min(d, TWO_PI - d)


# ----------------------------------------------------------------------
# limiting-absorption probe
# ----------------------------------------------------------------------

def weight_operator(a_op: LatticeOperator) -> LatticeOperator:
    """(A^2 + 1)^{-1/2} through the eigendecomposition of A."""
    data = hermitian_eig(a_op)
    w = 1.0 / np.sqrt(data.phases ** 2 + 1.0)
    m = (data.vectors * w[None, :]) @ data.vectors.conj().T
    return LatticeOperator(a_op.box, m, hermitian=True)


def default_radial_ladder(depth: int = 10) -> np.ndarray:
    return 1.0 - 0.5 ** np.arange(1, depth + 1)


def lap_probe(u_op: LatticeOperator, a_op: LatticeOperator,
              theta_samples, radial_ladder=None,
              weight: LatticeOperator | None = None) -> list:
    """Weighted resolvent norms ||W (1 - z U*)^{-1} W|| on a radial ladder.

    Rows are dicts (theta, radius, norm).  A profile that stays flat in
    the radius supports resolvent boundedness at that phase; growth like
    1/(1 - |z|) signals a point mass.
    """
    if radial_ladder is None:
        radial_ladder = default_radial_ladder()
    w = weight if weight is not None else weight_operator(a_op)
    ustar = u_op.matrix.conj().T
    eye = np.eye(u_op.dim)
    rows = []
    for theta in np.atleast_1d(theta_samples):
        for r in radial_ladder:
            if r == 1.0:
                raise DomainError("radial ladder must avoid |z| = 1")
            z = r * np.exp(1j * float(theta))
            resolvent = np.linalg.solve(eye - z * ustar, w.matrix)
            norm = float(np.linalg.norm(w.matrix @ resolvent, 2))
            rows.append({"theta": float(theta), "radius": float(r), "norm": norm})
    return rows


# ----------------------------------------------------------------------
# dumps
# ----------------------------------------------------------------------

def save_spectral_csv(data: SpectralData, path, header_lines=()) -> None:
    """CSV columns: index, phase, modulus_defect, participation_ratio."""
    pr = data.participation_ratios()
    defect = (data.modulus_defect if data.modulus_defect is not None
              else np.zeros(data.size))
    with open(path, "w", encoding="ascii") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("index,phase,modulus_defect,participation_ratio\n")
        for i in range(data.size):
            fh.write(f"{i},{data.phases[i]:.17g},{defect[i]:.17g},{pr[i]:.17g}\n")


def save_lap_csv(rows, path, header_lines=()) -> None:
    """CSV columns: theta, radius, norm."""
    with open(path, "w", encoding="ascii") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("theta,radius,norm\n")
        for row in rows:
            fh.write(f"{row['theta']:.17g},{row['radius']:.17g},{row['norm']:.17g}\n")
