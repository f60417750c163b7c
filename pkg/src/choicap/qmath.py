"""Dense complex linear algebra and entropic primitives on multipartite spaces.

Conventions used throughout the package:

* Subsystem 0 is the most significant Kronecker factor; every partial trace
  addresses that ordering.
* Entropies are base-2 (values in bits).
* States are immutable value objects; constructors validate their invariants
  and the backing arrays are marked read-only.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvariantViolation

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_NEG_TOL = 1e-10
ENTROPY_CLIP = 1e-12


@dataclass(frozen=True, eq=False)
class DimLayout:
    """Ordered subsystem dimensions of a multipartite space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"subsystem dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self) -> int:
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)


def _as_layout(layout) -> DimLayout:
    if isinstance(layout, DimLayout):
        return layout
    if isinstance(layout, int):
        return DimLayout((layout,))
    return DimLayout(tuple(layout))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix with a subsystem layout."""

    matrix: np.ndarray
    layout: DimLayout

    def __post_init__(self):
        layout = _as_layout(self.layout)
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        if mat.shape[0] != layout.total:
            raise DimensionMismatch(
                f"matrix side {mat.shape[0]} does not match layout {layout.dims}"
            )
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
            raise InvariantViolation("density matrix is not Hermitian within 1e-10")
        if abs(np.trace(mat).real - 1.0) > TRACE_TOL or abs(np.trace(mat).imag) > TRACE_TOL:
            raise InvariantViolation(f"trace {np.trace(mat)} is not 1 within 1e-10")
        lo = float(np.linalg.eigvalsh(mat)[0])
        if lo < -EIG_NEG_TOL:
            raise InvariantViolation(f"negative eigenvalue {lo} beyond -1e-10")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_close(self, other: "DensityMatrix", tol: float = 1e-10) -> bool:
        return self.dim == other.dim and np.max(np.abs(self.matrix - other.matrix)) <= tol


def flat_state(layout) -> DensityMatrix:
    """Maximally mixed state 1/d on the given layout (or single dimension)."""
    layout = _as_layout(layout)
    d = layout.total
    return DensityMatrix(np.eye(d) / d, layout)


def pure_state(vec, layout=None) -> DensityMatrix:
    """Rank-one projector |v><v| from a (not necessarily normalized) vector."""
    v = np.asarray(vec, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    v = v / n
    if layout is None:
        layout = DimLayout((v.size,))
    return DensityMatrix(np.outer(v, v.conj()), _as_layout(layout))


def basis_state(index: int, dim: int) -> DensityMatrix:
    """Computational basis projector |index><index| on a dim-dimensional space."""
    v = np.zeros(dim)
    v[index] = 1.0
    return pure_state(v)


def ebit_vector(d: int) -> np.ndarray:
    """The maximally entangled vector (1/sqrt(d)) sum_i |ii> on d x d."""
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1.0 / np.sqrt(d)
    return v


def ebit(d: int) -> DensityMatrix:
    """Maximally entangled pair state on layout [d, d]."""
    return pure_state(ebit_vector(d), DimLayout((d, d)))


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Kronecker product; the first argument is the most significant factor."""
    return DensityMatrix(np.kron(a.matrix, b.matrix), DimLayout(a.layout.dims + b.layout.dims))


def _partial_trace_matrix(mat: np.ndarray, dims: tuple[int, ...], keep) -> np.ndarray:
    """Partial trace on a raw matrix; `keep` is the set of retained subsystem indices."""
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if not keep:
        raise ValueError("must keep at least one subsystem")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"keep indices {keep} out of range for {n} subsystems")
    traced = [i for i in range(n) if i not in keep]
    work = mat.reshape(dims + dims)
    live = list(dims)
    for idx in sorted(traced, reverse=True):
        work = np.trace(work, axis1=idx, axis2=idx + len(live))
        live.pop(idx)
    side = int(np.prod(live))
    return work.reshape(side, side)


def partial_trace(s: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state on the kept subsystems (original subsystem order)."""
    keep = sorted(set(int(k) for k in keep))
    reduced = _partial_trace_matrix(np.asarray(s.matrix), s.layout.dims, keep)
    new_dims = tuple(s.layout.dims[i] for i in keep)
    return DensityMatrix(reduced, DimLayout(new_dims))


def entropy_of_hermitian(mat: np.ndarray) -> float:
    """Base-2 von Neumann entropy of a Hermitian PSD matrix (internal fast path).

    Eigenvalues below 1e-12 are clipped to zero; eigenvalues below -1e-10
    signal an invalid state and raise.
    """
    w = np.linalg.eigvalsh(mat)
    if w[0] < -EIG_NEG_TOL:
        raise InvariantViolation(f"negative eigenvalue {w[0]} beyond -1e-10")
    w = w[w >= ENTROPY_CLIP]
    if w.size == 0:
        return 0.0
    return float(-np.sum(w * np.log2(w)))


def von_neumann_entropy(s: DensityMatrix) -> float:
    """Entropy -sum(lam * log2 lam) of the state's spectrum, in bits."""
    mat = np.asarray(s.matrix)
    if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
        raise InvariantViolation("input is not Hermitian within 1e-10")
    return entropy_of_hermitian(mat)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity |sqrt(a) sqrt(b)|_1^2, via the spectrum of sqrt(a) b sqrt(a)."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension mismatch {a.dim} vs {b.dim}")
    ra = _psd_sqrt(np.asarray(a.matrix))
    w = np.linalg.eigvalsh(ra @ np.asarray(b.matrix) @ ra)
    w = np.clip(w, 0.0, None)
    val = float(np.sum(np.sqrt(w)) ** 2)
    return min(max(val, 0.0), 1.0)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of the difference."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension mismatch {a.dim} vs {b.dim}")
    w = np.linalg.eigvalsh(np.asarray(a.matrix) - np.asarray(b.matrix))
    return float(0.5 * np.sum(np.abs(w)))


def random_density(seed: int, dim: int, layout=None) -> DensityMatrix:
    """Random density matrix L L^dag / tr(L L^dag) from a seeded complex Gaussian factor.

    The factor is a full square Gaussian matrix, so the ensemble mean is the
    flat state. Identical seeds reproduce identical outputs bit-for-bit.
    """
    rng = np.random.default_rng(seed)
    factor = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    a = factor @ factor.conj().T
    a /= np.trace(a).real
    return DensityMatrix(a, _as_layout(layout) if layout is not None else DimLayout((dim,)))


def random_unitary(seed: int, dim: int) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix with phase fix."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def binary_entropy(p: float) -> float:
    """h2(p) in bits."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


def shannon_entropy(probs) -> float:
    """H(p) in bits, ignoring zero entries."""
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))
