"""Kernel operators on finite site sets.

A kernel is a Hermitian positive-definite matrix A over the sites, together
with cached derived quantities: the diagonal-dominance margin lambda, the
off-diagonal mass q(A), the operator norm, and the marginal kernel
K = A(I+A)^-1 that defines the determinantal point process.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    NotHermitianError,
    NotPositiveDefiniteError,
    SingularRestrictionError,
    ValidationError,
)

# Relative tolerance for Hermiticity / positive-definiteness validation.
VALIDATION_RTOL = 1e-10


def _abs1(z):
    """Entrywise |Re z| + |Im z|, the modulus used for diagonal dominance."""
    return np.abs(np.real(z)) + np.abs(np.imag(z))


@dataclass(frozen=True)
class SiteSpace:
    """Finite site set, optionally laid out on a d-dimensional torus.

    Sites are indexed 0..n_sites-1. With a torus geometry the index maps
    row-major to coordinates, and distances are wrap-around Manhattan
    distances, which define the distance classes used by convolution
    kernels and weight functions.
    """

    n_sites: int
    torus_sides: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValidationError("n_sites must be >= 1")
        if self.torus_sides is not None:
            sides = tuple(int(s) for s in self.torus_sides)
            if any(s < 1 for s in sides):
                raise ValidationError("torus sides must be positive")
            if int(np.prod(sides)) != self.n_sites:
                raise DimensionMismatchError(
                    f"torus sides {sides} enclose {int(np.prod(sides))} sites, "
                    f"but n_sites={self.n_sites}"
                )
            object.__setattr__(self, "torus_sides", sides)

    @classmethod
    def torus(cls, *sides: int) -> "SiteSpace":
        sides = tuple(int(s) for s in sides)
        return cls(n_sites=int(np.prod(sides)), torus_sides=sides)

    @classmethod
    def ring(cls, n: int) -> "SiteSpace":
        return cls.torus(n)

    @property
    def dim(self) -> int | None:
        return None if self.torus_sides is None else len(self.torus_sides)

    def coordinate(self, index: int) -> tuple[int, ...]:
        if self.torus_sides is None:
            raise ValidationError("site space has no torus geometry")
        coord = []
        for side in reversed(self.torus_sides):
            coord.append(index % side)
            index //= side
        return tuple(reversed(coord))

    def index(self, coord) -> int:
        if self.torus_sides is None:
            raise ValidationError("site space has no torus geometry")
        idx = 0
        for c, side in zip(coord, self.torus_sides):
            idx = idx * side + (c % side)
        return idx

    def distance(self, i: int, j: int) -> int:
        """Wrap-around Manhattan distance between two sites."""
        ci, cj = self.coordinate(i), self.coordinate(j)
        total = 0
        for a, b, side in zip(ci, cj, self.torus_sides):
            d = abs(a - b)
            total += min(d, side - d)
        return total

    def distance_matrix(self) -> np.ndarray:
        n = self.n_sites
        out = np.zeros((n, n), dtype=np.int64)
        for i, j in itertools.combinations(range(n), 2):
            d = self.distance(i, j)
            out[i, j] = out[j, i] = d
        return out


@dataclass(frozen=True)
class KernelSpec:
    """Declarative recipe for a kernel matrix.

    variant 'explicit': a dense matrix (real or complex entries).
    variant 'scalar': a * identity.
    variant 'torus': a * identity plus a real convolution C whose
    coefficients are given per wrap-around distance class; requires a
    torus SiteSpace. Complex couplings must use the explicit variant.
    """

    variant: str
    a: float = 1.0
    matrix: np.ndarray | None = None
    coupling: dict[int, float] = field(default_factory=dict)
    q_value: float | None = None

    def __post_init__(self):
        if self.variant not in ("explicit", "scalar", "torus"):
            raise ValidationError(f"unknown kernel variant {self.variant!r}")
        if self.variant == "explicit" and self.matrix is None:
            raise ValidationError("explicit kernel requires a matrix")
        if self.variant == "torus":
            for dist, coeff in self.coupling.items():
                if int(dist) < 1:
                    raise ValidationError("coupling distance classes start at 1")
                if np.iscomplexobj(np.asarray(coeff)):
                    raise ValidationError("torus couplings are real; use explicit for complex kernels")

    @classmethod
    def explicit(cls, matrix, q_value=None) -> "KernelSpec":
        return cls(variant="explicit", matrix=np.asarray(matrix), q_value=q_value)

    @classmethod
    def scalar(cls, a: float, q_value=None) -> "KernelSpec":
        return cls(variant="scalar", a=float(a), q_value=q_value)

    @classmethod
    def torus_convolution(cls, a: float, coupling: dict[int, float], q_value=None) -> "KernelSpec":
        return cls(
            variant="torus",
            a=float(a),
            coupling={int(k): float(v) for k, v in coupling.items()},
            q_value=q_value,
        )


class Kernel:
    """Validated Hermitian positive-definite operator with cached derivatives.

    Immutable after construction: safe to share freely. Use build_kernel()
    rather than calling this constructor directly.
    """

    def __init__(self, matrix: np.ndarray, space: SiteSpace, q_value: float | None = None):
        a = np.asarray(matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"kernel matrix must be square, got {a.shape}")
        if a.shape[0] != space.n_sites:
            raise DimensionMismatchError(
                f"matrix is {a.shape[0]}x{a.shape[0]} but site space has {space.n_sites} sites"
            )
        if np.iscomplexobj(a) and np.abs(a.imag).max() > 0:
            a = np.ascontiguousarray(a, dtype=np.complex128)
        else:
            a = np.ascontiguousarray(a.real, dtype=np.float64)

        scale = max(np.abs(a).max(), 1.0)
        herm_defect = np.abs(a - a.conj().T).max()
        if herm_defect > VALIDATION_RTOL * scale:
            raise NotHermitianError(f"max |A - A*| = {herm_defect:.3e} exceeds tolerance")
        a = (a + a.conj().T) / 2.0
        if np.isrealobj(a):
            np.fill_diagonal(a, a.diagonal().real)

        eigvals = np.linalg.eigvalsh(a)
        op_norm = float(eigvals[-1])
        if eigvals[0] <= VALIDATION_RTOL * max(op_norm, 1.0):
            raise NotPositiveDefiniteError(f"min eigenvalue {eigvals[0]:.3e} is not positive")

        off_mass = _abs1(a).sum(axis=1) - _abs1(a.diagonal())
        q_min = float(off_mass.max())
        if q_value is None:
            q_value = q_min
        elif q_value < q_min - VALIDATION_RTOL * max(op_norm, 1.0):
            raise ValidationError(f"q_value={q_value} is below q(A)={q_min}")

        self.space = space
        self.matrix = a
        self.matrix.setflags(write=False)
        self.eigenvalues = eigvals
        self.op_norm = op_norm
        self.min_eig = float(eigvals[0])
        self.lambda_margin = float((a.diagonal().real - off_mass).min())
        self.q_value = float(q_value)
        # K = A(I+A)^-1 by solving (I+A)X = A; I+A is well conditioned for A > 0.
        k = np.linalg.solve(np.eye(a.shape[0], dtype=a.dtype) + a, a)
        self.marginal_kernel = (k + k.conj().T) / 2.0
        self.marginal_kernel.setflags(write=False)
        self._inverse = None

    @property
    def n_sites(self) -> int:
        return self.space.n_sites

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.matrix)

    @property
    def inverse(self) -> np.ndarray:
        """A^-1, computed once on first use (needed by the dual variational path)."""
        if self._inverse is None:
            inv = np.linalg.inv(self.matrix)
            self._inverse = (inv + inv.conj().T) / 2.0
            self._inverse.setflags(write=False)
        return self._inverse

    def submatrix(self, sites) -> np.ndarray:
        idx = np.asarray(list(sites), dtype=np.intp)
        return self.matrix[np.ix_(idx, idx)]

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return (
            f"Kernel(n={self.n_sites}, {kind}, lambda={self.lambda_margin:.6g}, "
            f"q={self.q_value:.6g}, norm={self.op_norm:.6g})"
        )


def build_kernel(spec: KernelSpec, space: SiteSpace) -> Kernel:
    """Materialize a KernelSpec on a site space and validate it."""
    n = space.n_sites
    if spec.variant == "scalar":
        a = spec.a * np.eye(n)
    elif spec.variant == "explicit":
        a = np.asarray(spec.matrix)
        if a.shape != (n, n):
            raise DimensionMismatchError(f"explicit matrix is {a.shape}, expected {(n, n)}")
    else:  # torus convolution
        if space.torus_sides is None:
            raise ValidationError("torus-convolution kernel requires a torus site space")
        dist = space.distance_matrix()
        a = spec.a * np.eye(n)
        for d, coeff in spec.coupling.items():
            a[dist == d] += coeff
    return Kernel(a, space, q_value=spec.q_value)


@dataclass(frozen=True)
class AssumptionAReport:
    holds: bool
    lam: float


def check_assumption_a(kernel: Kernel) -> AssumptionAReport:
    """Diagonal dominance in the |Re|+|Im| sense; lam is the uniform margin."""
    lam = kernel.lambda_margin
    return AssumptionAReport(holds=lam > 0.0, lam=lam)


def restrict_a_bracket(kernel: Kernel, window) -> np.ndarray:
    """Interaction operator of the window: K_W (I_W - K_W)^-1.

    K_W is the compression of the marginal kernel to the window. Because all
    eigenvalues of K lie strictly below 1 the restriction is invertible; a
    conditioning guard catches numerically hopeless cases.
    """
    idx = np.asarray(sorted(window), dtype=np.intp)
    if idx.size == 0:
        return np.zeros((0, 0), dtype=kernel.matrix.dtype)
    k_w = kernel.marginal_kernel[np.ix_(idx, idx)]
    resid = np.eye(idx.size, dtype=k_w.dtype) - k_w
    cond = np.linalg.cond(resid)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularRestrictionError(f"I - K_W has condition number {cond:.3e}")
    out = np.linalg.solve(resid, k_w)
    return (out + out.conj().T) / 2.0


def load_kernel_matrix(path) -> np.ndarray:
    """Read a dense matrix file: first line n, then n rows of n entries.

    Entries are real ("1.5") or complex ("1.5+2j") literals accepted by
    Python's complex().
    """
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValidationError(f"{path}: empty kernel file")
    try:
        n = int(tokens[0])
    except ValueError as exc:
        raise ValidationError(f"{path}: first token must be the dimension") from exc
    values = tokens[1:]
    if len(values) != n * n:
        raise ValidationError(f"{path}: expected {n * n} entries, found {len(values)}")
    try:
        data = np.array([complex(v) for v in values]).reshape(n, n)
    except ValueError as exc:
        raise ValidationError(f"{path}: unparsable entry ({exc})") from exc
    if np.abs(data.imag).max() == 0:
        data = data.real
    return data
