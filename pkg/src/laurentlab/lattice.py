"""Finite-box realizations of lattice operators.

A :class:`Box` is a finite window of Z^d with odd side lengths and
centered coordinates, closed either cyclically (``periodic``) or by
truncation (``open``).  Operators are dense complex matrices tagged with
structural flags.  Rule of thumb used throughout the package: spectral
statements use periodic boxes (exact circulant algebra), anything
involving position operators uses open boxes together with interior
windows sized by band arithmetic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BoxMismatchError, ConvergenceError, DomainError, PrecisionLoss
from .symbol import Symbol, ggt_weight_symbol

DEFAULT_DIMENSION_CAP = 8192

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Box:
    """Finite sublattice with odd sides and centered coordinates."""

    sides: tuple
    boundary: str = "periodic"
    cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        sides = tuple(int(n) for n in (self.sides if isinstance(self.sides, (tuple, list))
                                       else (self.sides,)))
        object.__setattr__(self, "sides", sides)
        if self.boundary not in ("periodic", "open"):
            raise DomainError(f"boundary must be periodic or open, got {self.boundary!r}")
        for n in sides:
            if n < 3 or n % 2 == 0:
                raise DomainError(f"box sides must be odd and >= 3, got {sides}")
        if self.size > self.cap:
            raise DomainError(f"box dimension {self.size} exceeds cap {self.cap}")

    @property
    def dim(self) -> int:
        return len(self.sides)

    @property
    def size(self) -> int:
        return int(np.prod(self.sides))

    @property
    def halves(self) -> tuple:
        return tuple((n - 1) // 2 for n in self.sides)

    def coords(self) -> np.ndarray:
        """Coordinates of every site, shape (size, dim), row-major layout."""
        axes = [np.arange(-h, h + 1) for h in self.halves]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def flat_index(self, coords: np.ndarray) -> np.ndarray:
        """Row-major flat index of coordinate rows (must lie inside the box)."""
        coords = np.atleast_2d(coords)
        idx = np.zeros(coords.shape[0], dtype=int)
        for j, (n, h) in enumerate(zip(self.sides, self.halves)):
            idx = idx * n + (coords[:, j] + h)
        return idx

    def interior_mask(self, margin: int) -> np.ndarray:
        """Sites whose distance to every face is at least ``margin``."""
        c = self.coords()
        mask = np.ones(self.size, dtype=bool)
        for j, h in enumerate(self.halves):
            mask &= np.abs(c[:, j]) <= h - margin
        return mask


@dataclass(eq=False)
class LatticeOperator:
    """Dense operator on a box, with structural flags.

    Operators are immutable by convention once constructed; the matrix is
    shared, not copied, so treat it as read-only.
    """

    box: Box
    matrix: np.ndarray
    unitary: bool = False
    hermitian: bool = False
    bandwidth: int | None = None
    unitary_defect: float | None = None

    def __post_init__(self):
        n = self.box.size
        if self.matrix.shape != (n, n):
            raise DomainError(f"matrix shape {self.matrix.shape} does not match box size {n}")

    @property
    def dim(self) -> int:
        return self.box.size

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.matrix @ psi

    def adjoint(self) -> "LatticeOperator":
        return LatticeOperator(self.box, self.matrix.conj().T,
                               unitary=self.unitary, hermitian=self.hermitian,
                               bandwidth=self.bandwidth)

    def verify_unitary(self, tol: float = UNITARY_TOL) -> float:
        defect = float(np.max(np.abs(self.matrix.conj().T @ self.matrix
                                     - np.eye(self.dim))))
        if defect > tol:
            raise DomainError(f"unitary defect {defect:.3e} exceeds {tol:g}")
        return defect

    def verify_hermitian(self, tol: float = HERMITIAN_TOL) -> float:
        defect = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
        if defect > tol:
            raise DomainError(f"hermitian defect {defect:.3e} exceeds {tol:g}")
        return defect


def same_box(*ops) -> Box:
    box = ops[0].box
    for op in ops[1:]:
        if op.box.sides != box.sides or op.box.boundary != box.boundary:
            raise BoxMismatchError("operators live on different boxes")
    return box


def identity_op(box: Box) -> LatticeOperator:
    return LatticeOperator(box, np.eye(box.size, dtype=complex),
                           unitary=True, hermitian=True, bandwidth=0)


# ----------------------------------------------------------------------
# elementary operators
# ----------------------------------------------------------------------

def _normalize_multi_index(box: Box, alpha) -> tuple:
    if isinstance(alpha, (int, np.integer)):
        alpha = (alpha,)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != box.dim:
        raise DomainError(f"multi-index {alpha} does not match box dim {box.dim}")
    return alpha


def shift_op(box: Box, alpha) -> LatticeOperator:
    """Translation by the multi-index ``alpha``.

    Periodic mode gives a cyclic permutation (exactly unitary); open mode
    truncates and is flagged non-unitary unless alpha = 0.
    """
    alpha = _normalize_multi_index(box, alpha)
    n = box.size
    m = np.zeros((n, n), dtype=complex)
    src = box.coords()
    tgt = src + np.array(alpha)
    if box.boundary == "periodic":
        for j, (nj, h) in enumerate(zip(box.sides, box.halves)):
            tgt[:, j] = (tgt[:, j] + h) % nj - h
        m[box.flat_index(tgt), np.arange(n)] = 1.0
        unitary = True
    else:
        valid = np.ones(n, dtype=bool)
        for j, h in enumerate(box.halves):
            valid &= np.abs(tgt[:, j]) <= h
        m[box.flat_index(tgt[valid]), np.flatnonzero(valid)] = 1.0
        unitary = alpha == (0,) * box.dim
    return LatticeOperator(box, m, unitary=unitary,
                           hermitian=(alpha == (0,) * box.dim),
                           bandwidth=max(abs(a) for a in alpha) if any(alpha) else 0)


def position_op(box: Box, axis: int = 0) -> LatticeOperator:
    """Coordinate multiplication along ``axis`` (centered, hence symmetric)."""
    if not 0 <= axis < box.dim:
        raise DomainError(f"axis {axis} out of range for dim {box.dim}")
    diag = box.coords()[:, axis].astype(complex)
    return LatticeOperator(box, np.diag(diag), hermitian=True, bandwidth=0)


def diagonal_op(box: Box, gamma) -> LatticeOperator:
    """Multiplication operator site -> gamma(site).

    ``gamma`` is an array over the box's flat site order, or a callable
    mapping the (size, dim) coordinate array to values.  The operator norm
    equals sup |gamma|.
    """
    if callable(gamma):
        values = np.asarray(gamma(box.coords()), dtype=complex)
    else:
        values = np.asarray(gamma, dtype=complex)
    if values.shape != (box.size,):
        raise DomainError(f"diagonal needs {box.size} values, got {values.shape}")
    herm = bool(np.max(np.abs(values.imag)) < 1e-14) if values.size else True
    return LatticeOperator(box, np.diag(values), hermitian=herm, bandwidth=0)


def laurent_op(box: Box, f: Symbol, report_defect: bool = True) -> LatticeOperator:
    """Convolution by the coefficients of ``f``: sum_alpha c_alpha T^alpha.

    On open boxes the band must fit (bandwidth < min side / 2).  On
    periodic boxes wider bands are folded cyclically, which keeps the
    eigenvalue set exactly at the symbol samples; coefficients landing on
    the same cyclic offset accumulate.  For unimodular symbols in periodic
    mode the unitary defect max|L*L - I| is measured and recorded (it is
    nonzero only through the dropped coefficient tail).
    """
    if f.dim != box.dim:
        raise DomainError(f"symbol dim {f.dim} != box dim {box.dim}")
    bw = f.bandwidth
    if box.boundary == "open" and 2 * bw >= min(box.sides):
        raise DomainError(
            f"symbol bandwidth {bw} does not fit open box sides {box.sides}")
    n = box.size
    m = np.zeros((n, n), dtype=complex)
    src = box.coords()
    arange = np.arange(n)
    for alpha, c in f.coeffs.items():
        tgt = src + np.array(alpha)
        if box.boundary == "periodic":
            for j, (nj, h) in enumerate(zip(box.sides, box.halves)):
                tgt[:, j] = (tgt[:, j] + h) % nj - h
            m[box.flat_index(tgt), arange] += c
        else:
            valid = np.ones(n, dtype=bool)
            for j, h in enumerate(box.halves):
                valid &= np.abs(tgt[:, j]) <= h
            m[box.flat_index(tgt[valid]), arange[valid]] += c
    herm = _coeffs_hermitian(f)
    unitary = False
    defect = None
    if box.boundary == "periodic" and f.unimodular and report_defect:
        defect = float(np.max(np.abs(m.conj().T @ m - np.eye(n))))
        unitary = defect < UNITARY_TOL
    return LatticeOperator(box, m, unitary=unitary, hermitian=herm,
                           bandwidth=bw, unitary_defect=defect)


def _coeffs_hermitian(f: Symbol, tol: float = 1e-14) -> bool:
    for idx, c in f.coeffs.items():
        neg = tuple(-i for i in idx)
        if abs(np.conj(f.coeffs.get(neg, 0.0)) - c) > tol:
            return False
    return True


def _require_real_weights(weights: Sequence[Symbol]) -> None:
    for j, g in enumerate(weights):
        asym = 0.0
        for idx, c in g.coeffs.items():
            neg = tuple(-i for i in idx)
            asym = max(asym, abs(np.conj(g.coeffs.get(neg, 0.0)) - c))
        # l1 bound on the imaginary part over the torus
        if asym * max(1, len(g.coeffs)) > 1e-10:
            raise DomainError(f"weight symbol {j} is not real-valued (defect {asym:.3e})")


def conjugate_op(box: Box, weights: Sequence[Symbol]) -> LatticeOperator:
    """Symmetrized momentum-weighted position operator.

    A_g = (1/2) sum_j (L_{g_j} X_j + X_j L_{g_j}) for a family of d
    real-valued weight symbols.  The position operator is only canonical
    with open boundaries, so periodic boxes are refused.  The entry at
    (beta, beta') is sum_j g_j_hat(beta - beta') (beta_j + beta'_j) / 2.
    """
    if box.boundary != "open":
        raise DomainError("conjugate operators require an open box")
    if len(weights) != box.dim:
        raise DomainError(f"need {box.dim} weight symbols, got {len(weights)}")
    _require_real_weights(weights)
    n = box.size
    acc = np.zeros((n, n), dtype=complex)
    for j, g in enumerate(weights):
        lg = laurent_op(box, g).matrix
        xj = box.coords()[:, j].astype(float)
        acc += 0.5 * (lg * xj[None, :] + xj[:, None] * lg)
    sym_defect = float(np.max(np.abs(acc - acc.conj().T)))
    if sym_defect > HERMITIAN_TOL:
        raise DomainError(f"conjugate operator symmetry defect {sym_defect:.3e}")
    return LatticeOperator(box, acc, hermitian=True,
                           bandwidth=max(g.bandwidth for g in weights))


def conjugate_op_ggt(box: Box, a: float, series_cut: int | None = None,
                     tail_tol: float = 1e-12) -> LatticeOperator:
    """Conjugate operator of the Cauchy-kernel family by its shift series.

    A_a = (1/2) sum_{m != 0} a^{-|m|} (T^m X + X T^m) with truncated
    shifts; the geometric weights make the truncation error of order
    a^{-series_cut} * side, which must stay below ``tail_tol``.
    """
    if box.boundary != "open":
        raise DomainError("conjugate operators require an open box")
    if box.dim != 1:
        raise DomainError("the shift-series conjugate operator is one-dimensional")
    if a <= 1.0:
        raise DomainError(f"parameter a must exceed 1, got {a}")
    n = box.size
    if series_cut is None:
        series_cut = int(math.ceil(math.log(n / tail_tol) / math.log(a)))
    if a ** (-series_cut) * n >= tail_tol:
        warnings.warn(
            f"series cut {series_cut} leaves tail {a ** -series_cut * n:.3e} "
            f">= {tail_tol:g}", PrecisionLoss, stacklevel=2)
    k = box.coords()[:, 0].astype(float)
    acc = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    for m in range(1, series_cut + 1):
        w = a ** (-m)
        rows = idx[m:]
        cols = idx[:n - m]
        # the +/- m terms combine into w * (mean of the two coordinates)
        acc[rows, cols] += w * (k[cols] + k[rows]) / 2.0
        acc[cols, rows] += w * (k[cols] + k[rows]) / 2.0
    return LatticeOperator(box, acc, hermitian=True, bandwidth=series_cut)


# ----------------------------------------------------------------------
# vectors
# ----------------------------------------------------------------------

def basis_vector(box: Box, coord) -> np.ndarray:
    coord = _normalize_multi_index(box, coord)
    psi = np.zeros(box.size, dtype=complex)
    psi[box.flat_index(np.array([coord]))[0]] = 1.0
    return psi


def x_norm(box: Box, psi: np.ndarray) -> float:
    """sqrt(|psi|^2 + sum_j |X_j psi|^2) with centered coordinates."""
    psi = np.asarray(psi)
    weight = 1.0 + np.sum(box.coords().astype(float) ** 2, axis=1)
    return float(np.sqrt(np.sum(np.abs(psi) ** 2 * weight)))


def support_margin(box: Box, psi: np.ndarray, tol: float = 0.0) -> int:
    """Distance from the support of ``psi`` to the nearest box face."""
    mask = np.abs(psi) > tol
    if not np.any(mask):
        return min(box.halves)
    c = box.coords()[mask]
    return int(min(h - np.max(np.abs(c[:, j])) for j, h in enumerate(box.halves)))


# ----------------------------------------------------------------------
# polar correction
# ----------------------------------------------------------------------

def polar_unitary(op: LatticeOperator, tol: float = 1e-13,
                  max_iter: int = 40) -> LatticeOperator:
    """Closest unitary by Newton iteration X <- (X + X^{-*})/2.

    Converges quadratically for the near-unitary matrices produced by
    band truncation; raises on singular input or stagnation.
    """
    x = op.matrix.astype(complex).copy()
    n = op.box.size
    eye = np.eye(n)
    for _ in range(max_iter):
        try:
            inv_adj = np.linalg.inv(x).conj().T
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("polar iteration hit a singular iterate") from exc
        x_next = 0.5 * (x + inv_adj)
        if np.max(np.abs(x_next - x)) < 0.25 * tol:
            x = x_next
            break
        x = x_next
    defect = float(np.max(np.abs(x.conj().T @ x - eye)))
    if defect > 10 * tol:
        raise ConvergenceError("polar iteration did not reach unitarity",
                               defect=defect)
    return LatticeOperator(op.box, x, unitary=True, bandwidth=None)


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------

def save_operator(op: LatticeOperator, path) -> None:
    """Structured-text dump: box header plus one ``row`` line per matrix row."""
    lines = [f"dim = {op.box.dim}",
             "sides = " + " ".join(str(s) for s in op.box.sides),
             f"boundary = {op.box.boundary}",
             f"unitary = {int(op.unitary)}",
             f"hermitian = {int(op.hermitian)}",
             f"bandwidth = {op.bandwidth if op.bandwidth is not None else -1}"]
    for i in range(op.dim):
        row = op.matrix[i]
        parts = [f"{v.real:.17g} {v.imag:.17g}" for v in row]
        lines.append("row " + " ".join(parts))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_operator(path) -> LatticeOperator:
    header = {}
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("row "):
                vals = [float(x) for x in line[4:].split()]
                rows.append(np.array(vals[0::2]) + 1j * np.array(vals[1::2]))
            else:
                key, _, value = line.partition("=")
                header[key.strip()] = value.strip()
    sides = tuple(int(s) for s in header["sides"].split())
    box = Box(sides=sides, boundary=header["boundary"])
    bw = int(header.get("bandwidth", -1))
    return LatticeOperator(box, np.array(rows),
                           unitary=bool(int(header.get("unitary", 0))),
                           hermitian=bool(int(header.get("hermitian", 0))),
                           bandwidth=None if bw < 0 else bw)


def save_vector(box: Box, psi: np.ndarray, path) -> None:
    """One line per site: coordinates, real part, imaginary part."""
    coords = box.coords()
    with open(path, "w", encoding="ascii") as fh:
        fh.write("dim = %d\nsides = %s\n"
                 % (box.dim, " ".join(str(s) for s in box.sides)))
        for c, v in zip(coords, psi):
            fh.write(" ".join(str(int(x)) for x in c)
                     + f" {v.real:.17g} {v.imag:.17g}\n")


def load_vector(path) -> tuple[Box, np.ndarray]:
    header = {}
    entries = []
    with open(path, "r", encoding="ascii") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" in line:
                key, _, value = line.partition("=")
                header[key.strip()] = value.strip()
                continue
            parts = line.split()
            entries.append(parts)
    sides = tuple(int(s) for s in header["sides"].split())
    box = Box(sides=sides)
    psi = np.zeros(box.size, dtype=complex)
    d = box.dim
    for parts in entries:
        coord = np.array([[int(p) for p in parts[:d]]])
        psi[box.flat_index(coord)[0]] = complex(float(parts[d]), float(parts[d + 1]))
    return box, psi
