"""Symbols on the d-torus with finitely supported Fourier coefficients.

A symbol is a function f : T^d -> C stored as a finite coefficient map
{alpha -> c_alpha} plus an optional closed-form evaluator.  Everything
downstream (convolution operators, conjugate operators, commutator
checks) is driven by these coefficient maps, so truncation tails are
tracked explicitly in ``dropped_mass``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, PrecisionLoss

TWO_PI = 2.0 * math.pi

#: default tolerance for dropping convolution / quadrature tails
DEFAULT_TAIL_TOL = 1e-12

#: grid agreement required between evaluator and trigonometric sum
EVALUATOR_TOL = 1e-10

#: permitted deviation of |f| from 1 for unimodular-flagged symbols
UNIMODULAR_TOL = 1e-10


def wrap_phase(x):
    """Map angles to the canonical interval [0, 2*pi)."""
    return np.mod(x, TWO_PI)


@dataclass(frozen=True)
class Symbol:
    """A trigonometric polynomial f(theta) = sum_alpha c_alpha e^{i theta.alpha}.

    Attributes
    ----------
    dim : int
        Torus dimension d.
    coeffs : dict
        Map from integer multi-index (length-d tuple) to complex coefficient.
    evaluator : callable, optional
        Closed form ``f(t1, ..., td)`` accepting numpy arrays per axis.
        When present it must agree with the coefficient sum on a grid.
    unimodular : bool
        Claim that |f| = 1 on the torus (checked on a test grid).
    dropped_mass : float
        l1 mass of coefficients dropped during construction.
    """

    dim: int
    coeffs: dict = field(default_factory=dict)
    evaluator: Callable | None = None
    unimodular: bool = False
    dropped_mass: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError(f"torus dimension must be >= 1, got {self.dim}")
        clean = {}
        for idx, c in self.coeffs.items():
            key = tuple(int(i) for i in (idx if isinstance(idx, tuple) else (idx,)))
            if len(key) != self.dim:
                raise DomainError(f"multi-index {key} does not match dim {self.dim}")
            clean[key] = complex(c)
        object.__setattr__(self, "coeffs", clean)

    @property
    def bandwidth(self) -> int:
        """Largest sup-norm of a supported multi-index."""
        if not self.coeffs:
            return 0
        return max(max(abs(i) for i in idx) for idx in self.coeffs)

    # -- evaluation -----------------------------------------------------

    def _axes(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.dim == 1 and theta.ndim <= 1:
            return (theta,)
        if theta.shape[-1] != self.dim:
            raise DomainError(f"theta last axis must have length {self.dim}")
        return tuple(np.moveaxis(theta, -1, 0))

    def coefficient_sum(self, theta):
        """Evaluate the trigonometric sum at ``theta`` (shape (..., d))."""
        axes = self._axes(theta)
        out = np.zeros(np.broadcast(*axes).shape, dtype=complex)
        for idx, c in self.coeffs.items():
            phase = sum(a * t for a, t in zip(idx, axes))
            out = out + c * np.exp(1j * phase)
        return out

    def __call__(self, theta):
        if self.evaluator is not None:
            return np.asarray(self.evaluator(*self._axes(theta)), dtype=complex)
        return self.coefficient_sum(theta)

    # -- diagnostics ----------------------------------------------------

    def validate(self, grid: int = 64) -> None:
        """Check the evaluator/unimodularity claims on a uniform grid."""
        grid = max(grid, 4 * self.bandwidth + 4)
        theta = _uniform_grid(self.dim, grid)
        vals = self.coefficient_sum(theta)
        if self.evaluator is not None:
            direct = self(theta)
            gap = np.max(np.abs(direct - vals))
            if gap > EVALUATOR_TOL:
                raise DomainError(
                    f"evaluator disagrees with coefficient sum by {gap:.3e}"
                )
        if self.unimodular:
            defect = np.max(np.abs(np.abs(self(theta)) - 1.0))
            if defect > UNIMODULAR_TOL:
                raise DomainError(f"unimodular flag violated by {defect:.3e}")


def _uniform_grid(dim: int, grid: int) -> np.ndarray:
    """Uniform tensor grid on [0, 2pi)^dim, shape (grid**dim, dim)."""
    axis = np.arange(grid) * (TWO_PI / grid)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# ----------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------

def constant_symbol(c: complex, dim: int = 1) -> Symbol:
    coeffs = {} if c == 0 else {(0,) * dim: complex(c)}
    return Symbol(dim=dim, coeffs=coeffs, evaluator=None,
                  unimodular=abs(abs(c) - 1.0) < UNIMODULAR_TOL)


def harmonic_symbol(alpha, dim: int | None = None) -> Symbol:
    """f(theta) = e^{i theta . alpha} for a lattice multi-index alpha."""
    idx = tuple(int(a) for a in (alpha if isinstance(alpha, (tuple, list, np.ndarray)) else (alpha,)))
    d = dim if dim is not None else len(idx)

    def ev(*axes):
        return np.exp(1j * sum(a * t for a, t in zip(idx, axes)))

    return Symbol(dim=d, coeffs={idx: 1.0}, evaluator=ev, unimodular=True)


def fourier_coeffs(evaluator: Callable, d: int, grid: int, bandwidth: int,
                   tail_tol: float = DEFAULT_TAIL_TOL) -> Symbol:
    """Coefficients of ``evaluator`` by the trapezoidal rule on a uniform grid.

    The rule coincides with the discrete Fourier transform of the grid
    samples, so ``grid >= 4 * bandwidth`` per axis keeps aliasing below
    the coefficient tails themselves.  Coefficients with modulus below
    ``tail_tol`` are dropped and their l1 mass is recorded.
    """
    if grid < 4 * max(bandwidth, 1):
        raise DomainError(f"grid {grid} < 4*bandwidth = {4 * bandwidth} (aliasing)")
    axis = np.arange(grid) * (TWO_PI / grid)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    samples = np.asarray(evaluator(*mesh), dtype=complex)
    if not np.all(np.isfinite(samples)):
        raise DomainError("evaluator is unbounded on the grid")
    hat = np.fft.fftn(samples) / samples.size

    coeffs = {}
    dropped = 0.0
    edge_hit = False
    rng = range(-bandwidth, bandwidth + 1)
    for idx in np.ndindex(*([2 * bandwidth + 1] * d)):
        alpha = tuple(rng[i] for i in idx)
        c = hat[tuple(a % grid for a in alpha)]
        if abs(c) >= tail_tol:
            coeffs[alpha] = complex(c)
            if max(abs(a) for a in alpha) == bandwidth:
                edge_hit = True
        else:
            dropped += abs(c)
    if edge_hit:
        warnings.warn(
            f"coefficients at the bandwidth edge {bandwidth} still exceed "
            f"tail_tol={tail_tol:g}; aliasing risk", PrecisionLoss, stacklevel=2)
    return Symbol(dim=d, coeffs=coeffs, evaluator=evaluator,
                  dropped_mass=dropped)


def _ggt_eval(a: float, t):
    e = np.exp(1j * np.asarray(t))
    return -(np.conj(e) - a) / (e - a)


def ggt_symbol(a: float, tail_tol: float = DEFAULT_TAIL_TOL,
               bandwidth: int | None = None) -> Symbol:
    """The unimodular Cauchy-kernel symbol f_a(t) = -(e^{-it} - a)/(e^{it} - a).

    Its Fourier expansion is geometric: coefficient 1/a at index -1 and
    -(1 - a^{-2}) a^{-l} at every l >= 0.  ``bandwidth`` truncates the
    geometric tail (default: the first index whose coefficient drops
    below ``tail_tol``).
    """
    if a <= 1.0:
        raise DomainError(f"parameter a must exceed 1, got {a}")
    amp = 1.0 - a ** -2
    if bandwidth is None:
        bandwidth = max(2, int(math.ceil(math.log(amp / tail_tol) / math.log(a))))
    coeffs = {(-1,): 1.0 / a}
    for l in range(bandwidth + 1):
        coeffs[(l,)] = -amp * a ** (-l)
    dropped = amp * a ** (-bandwidth) / (a - 1.0)
    return Symbol(dim=1, coeffs=coeffs, evaluator=lambda t: _ggt_eval(a, t),
                  unimodular=True, dropped_mass=dropped)


def ggt_weight_symbol(a: float, tail_tol: float = DEFAULT_TAIL_TOL,
                      bandwidth: int | None = None) -> Symbol:
    """The real symbol sum_{m != 0} a^{-|m|} e^{imt} = 2 Re 1/(a e^{it} - 1).

    This is i f_a conj(f_a)' and drives the canonical conjugate operator
    for the ``ggt_symbol`` family.
    """
    if a <= 1.0:
        raise DomainError(f"parameter a must exceed 1, got {a}")
    if bandwidth is None:
        bandwidth = max(2, int(math.ceil(math.log(1.0 / tail_tol) / math.log(a))))
    coeffs = {}
    for m in range(1, bandwidth + 1):
        coeffs[(m,)] = a ** (-m)
        coeffs[(-m,)] = a ** (-m)
    dropped = 2.0 * a ** (-bandwidth) / (a - 1.0)

    def ev(t):
        ct = np.cos(np.asarray(t))
        return 2.0 * (a * ct - 1.0) / (a * a - 2.0 * a * ct + 1.0) + 0j

    return Symbol(dim=1, coeffs=coeffs, evaluator=ev, dropped_mass=dropped)


# ----------------------------------------------------------------------
# coefficient algebra
# ----------------------------------------------------------------------

def conj_symbol(f: Symbol) -> Symbol:
    """Pointwise complex conjugate: coefficients conj(c_{-alpha})."""
    coeffs = {tuple(-i for i in idx): np.conj(c) for idx, c in f.coeffs.items()}
    ev = None
    if f.evaluator is not None:
        base = f.evaluator
        ev = lambda *ax: np.conj(base(*ax))
    return Symbol(dim=f.dim, coeffs=coeffs, evaluator=ev,
                  unimodular=f.unimodular, dropped_mass=f.dropped_mass)


def add_symbols(f: Symbol, g: Symbol, scale: complex = 1.0) -> Symbol:
    if f.dim != g.dim:
        raise DomainError("dimension mismatch")
    coeffs = dict(f.coeffs)
    for idx, c in g.coeffs.items():
        coeffs[idx] = coeffs.get(idx, 0.0) + scale * c
    return Symbol(dim=f.dim, coeffs=coeffs,
                  dropped_mass=f.dropped_mass + abs(scale) * g.dropped_mass)


def scale_symbol(f: Symbol, scale: complex) -> Symbol:
    coeffs = {idx: scale * c for idx, c in f.coeffs.items()}
    return Symbol(dim=f.dim, coeffs=coeffs,
                  dropped_mass=abs(scale) * f.dropped_mass)


def multiply_symbols(f: Symbol, g: Symbol,
                     tail_tol: float = DEFAULT_TAIL_TOL) -> Symbol:
    """Pointwise product by coefficient convolution (bandwidths add)."""
    if f.dim != g.dim:
        raise DomainError("dimension mismatch")
    acc: dict[tuple, complex] = {}
    for ia, ca in f.coeffs.items():
        for ib, cb in g.coeffs.items():
            key = tuple(x + y for x, y in zip(ia, ib))
            acc[key] = acc.get(key, 0.0) + ca * cb
    dropped = f.dropped_mass + g.dropped_mass
    coeffs = {}
    for idx, c in acc.items():
        if abs(c) >= tail_tol:
            coeffs[idx] = c
        else:
            dropped += abs(c)
    return Symbol(dim=f.dim, coeffs=coeffs, dropped_mass=dropped)


def derivative(f: Symbol, axis: int) -> Symbol:
    """Partial derivative along ``axis``: coefficients i * alpha_j * c_alpha."""
    if not 0 <= axis < f.dim:
        raise DomainError(f"axis {axis} out of range for dim {f.dim}")
    coeffs = {idx: 1j * idx[axis] * c for idx, c in f.coeffs.items()
              if idx[axis] != 0}
    return Symbol(dim=f.dim, coeffs=coeffs,
                  dropped_mass=f.dropped_mass * max(1, f.bandwidth))


@dataclass(frozen=True)
class DerivedSymbols:
    """Derived data of a symbol used by commutator and transport checks.

    ``velocity[j]`` is i f d_j conj(f) (real-valued when |f| = 1),
    ``speed_sq`` is |grad f|^2 and ``weighted`` is sum_j g_j d_j f
    for an optional weight family g.
    """

    partials: tuple
    velocity: tuple
    speed_sq: Symbol
    weighted: Symbol | None = None


def derived_symbols(f: Symbol, weights: Sequence[Symbol] | None = None,
                    tail_tol: float = 1e-10,
                    check_grid: int = 256) -> DerivedSymbols:
    """Partial derivatives, velocity symbols i f d_j conj(f), and |grad f|^2.

    Raises a ``PrecisionLoss`` warning when the differentiated coefficient
    tail exceeds ``tail_tol`` and checks that the velocity symbols are real
    on a grid whenever f is unimodular.
    """
    diff_tail = f.dropped_mass * max(1, f.bandwidth)
    if diff_tail > tail_tol:
        warnings.warn(
            f"differentiated tail mass {diff_tail:.3e} exceeds {tail_tol:g}",
            PrecisionLoss, stacklevel=2)
    fbar = conj_symbol(f)
    partials = tuple(derivative(f, j) for j in range(f.dim))
    velocity = []
    for j in range(f.dim):
        vj = scale_symbol(multiply_symbols(f, derivative(fbar, j), tail_tol), 1j)
        velocity.append(vj)
    speed = constant_symbol(0.0, f.dim)
    for pj in partials:
        speed = add_symbols(speed, multiply_symbols(pj, conj_symbol(pj), tail_tol))
    if f.unimodular:
        theta = _uniform_grid(f.dim, min(check_grid, max(32, 4 * f.bandwidth + 4)))
        for vj in velocity:
            im = np.max(np.abs(np.imag(vj.coefficient_sum(theta))))
            if im > 1e-10:
                warnings.warn(
                    f"velocity symbol has imaginary part {im:.3e} on the grid",
                    PrecisionLoss, stacklevel=2)
    weighted = None
    if weights is not None:
        if len(weights) != f.dim:
            raise DomainError("need one weight symbol per axis")
        weighted = constant_symbol(0.0, f.dim)
        for gj, pj in zip(weights, partials):
            weighted = add_symbols(weighted, multiply_symbols(gj, pj, tail_tol))
    return DerivedSymbols(partials=partials, velocity=tuple(velocity),
                          speed_sq=speed, weighted=weighted)


# ----------------------------------------------------------------------
# critical sets and the essential arc
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalReport:
    """Grid samples of the critical set and their phases, sorted by phase."""

    critical_points: list
    critical_values: list
    grid_step: float


def critical_set(f: Symbol, grid: int = 512, tol: float = 1e-8) -> CriticalReport:
    """Scan a uniform grid for |grad f| < tol with one bisection step per axis.

    ``tol`` has to be commensurate with the grid step for symbols whose
    gradient vanishes only at isolated points; the refinement step halves
    the location error along each axis.
    """
    partials = [derivative(f, j) for j in range(f.dim)]

    def grad_norm(pts):
        # pts has shape (m, d)
        acc = 0.0
        for pj in partials:
            acc = acc + np.abs(pj.coefficient_sum(pts)) ** 2
        return np.sqrt(acc)

    theta = _uniform_grid(f.dim, grid)
    flagged = theta[grad_norm(theta) < tol]
    step = TWO_PI / grid
    refined = []
    for point in flagged:
        best = point.copy()
        best_val = float(grad_norm(best[None, :])[0])
        for j in range(f.dim):
            for sign in (-1.0, 1.0):
                cand = best.copy()
                cand[j] += sign * step / 2.0
                val = float(grad_norm(cand[None, :])[0])
                if val < best_val:
                    best, best_val = cand, val
        refined.append(wrap_phase(best))
    if refined:
        pts_arr = np.array(refined)
        vals = wrap_phase(np.angle(f(pts_arr)))
        order = np.argsort(vals)
        pts = [tuple(pts_arr[i]) if f.dim > 1 else float(pts_arr[i, 0])
               for i in order]
        vals = [float(vals[i]) for i in order]
    else:
        pts, vals = [], []
    return CriticalReport(critical_points=pts, critical_values=vals,
                          grid_step=step)


def range_arc(a: float) -> tuple[float, float]:
    """Endpoints of the essential arc of the ``ggt_symbol`` family.

    Returns (arg f_a(-t_a), arg f_a(t_a)) with t_a = arccos(1/a), both
    wrapped to [0, 2*pi).
    """
    if a <= 1.0:
        raise DomainError(f"parameter a must exceed 1, got {a}")
    t_a = math.acos(1.0 / a)
    ends = _ggt_eval(a, np.array([-t_a, t_a]))
    low, high = wrap_phase(np.angle(ends))
    return float(low), float(high)


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------

def save_symbol(f: Symbol, path) -> None:
    """Plain-text dump: header lines plus one ``coeff`` line per index."""
    lines = [f"dim = {f.dim}",
             f"bandwidth = {f.bandwidth}",
             f"unimodular = {int(f.unimodular)}",
             f"dropped_mass = {f.dropped_mass!r}"]
    for idx in sorted(f.coeffs):
        c = f.coeffs[idx]
        idx_txt = " ".join(str(i) for i in idx)
        lines.append(f"coeff {idx_txt} {c.real:.17g} {c.imag:.17g}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_symbol(path) -> Symbol:
    dim = None
    unimodular = False
    dropped = 0.0
    coeffs = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("coeff"):
                parts = line.split()
                if dim is None or len(parts) != 3 + dim:
                    raise DomainError(f"{path}:{lineno}: malformed coeff line")
                idx = tuple(int(p) for p in parts[1:1 + dim])
                coeffs[idx] = complex(float(parts[-2]), float(parts[-1]))
            else:
                key, _, value = line.partition("=")
                key = key.strip()
                value = value.strip()
                if key == "dim":
                    dim = int(value)
                elif key == "unimodular":
                    unimodular = bool(int(value))
                elif key == "dropped_mass":
                    dropped = float(value)
                elif key == "bandwidth":
                    pass
                else:
                    raise DomainError(f"{path}:{lineno}: unknown key {key!r}")
    if dim is None:
        raise DomainError(f"{path}: missing dim header")
    return Symbol(dim=dim, coeffs=coeffs, unimodular=unimodular,
                  dropped_mass=dropped)
