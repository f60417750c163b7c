"""Quantum channels in Kraus, Choi and Stinespring form, plus a channel zoo.

Index conventions, fixed here once for the whole package:

* A Choi state is laid out ``[output, input]``: the maximally entangled
  reference pair is "bent over" onto the *input* factor, so its partial trace
  over the output factor is 1/dim_in.
* A Stinespring dilation output is laid out ``[output, environment]``.
* With row-major vectorization ``vec(K)[o * dim_in + i] = K[o, i]``, the Choi
  matrix of a channel with Kraus operators ``K_a`` is
  ``(1/d) sum_a vec(K_a) vec(K_a)^dag``.
* The complementary channel sends ``rho`` to the environment state with
  entries ``tr(K_i rho K_j^dag)`` at position ``(i, j)``.
"""

import hashlib
import threading
from dataclasses import dataclass

import numpy as np

from . import qmath
from .errors import DimensionMismatch, InvariantViolation, SpecError
from .qmath import DensityMatrix, DimLayout

TP_TOL = 1e-10
CHOI_MARGINAL_TOL = 1e-9
CHOI_RANK_CUTOFF = 1e-10


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Completely positive trace-preserving map given by Kraus operators.

    The operators are stored stacked as a read-only complex array of shape
    ``(rank, dim_out, dim_in)`` and must satisfy ``sum_i K_i^dag K_i = 1``
    within 1e-10.
    """

    kraus: np.ndarray

    def __post_init__(self):
        k = np.array(self.kraus, dtype=complex)
        if k.ndim != 3 or k.shape[0] == 0:
            raise ValueError(f"expected a nonempty stack of matrices, got shape {k.shape}")
        defect = np.tensordot(k.conj(), k, axes=([0, 1], [0, 1])) - np.eye(k.shape[2])
        if np.max(np.abs(defect)) > TP_TOL:
            raise InvariantViolation(
                f"Kraus operators are not trace preserving; defect {np.max(np.abs(defect)):.3e}"
            )
        k.setflags(write=False)
        object.__setattr__(self, "kraus", k)

    @property
    def rank(self) -> int:
        return self.kraus.shape[0]

    @property
    def dim_out(self) -> int:
        return self.kraus.shape[1]

    @property
    def dim_in(self) -> int:
        return self.kraus.shape[2]

    def content_hash(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        h.update(np.ascontiguousarray(self.kraus).tobytes())
        h.update(repr(self.kraus.shape).encode())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class ChoiState:
    """Bipartite state on [output, input] whose input marginal is flat."""

    state: DensityMatrix

    def __post_init__(self):
        if len(self.state.layout) != 2:
            raise ValueError(f"Choi state needs a two-factor layout, got {self.state.layout.dims}")
        _validate_choi_marginal(self.state, CHOI_MARGINAL_TOL)

    @property
    def dim_out(self) -> int:
        return self.state.layout.dims[0]

    @property
    def dim_in(self) -> int:
        return self.state.layout.dims[1]

    @property
    def matrix(self) -> np.ndarray:
        return self.state.matrix


def _validate_choi_marginal(state: DensityMatrix, tol: float):
    d_in = state.layout.dims[1]
    marg = qmath._partial_trace_matrix(np.asarray(state.matrix), state.layout.dims, (1,))
    dev = np.max(np.abs(marg - np.eye(d_in) / d_in))
    if dev > tol:
        raise InvariantViolation(f"Choi input marginal deviates from 1/d by {dev:.3e} (> {tol:g})")


@dataclass(frozen=True, eq=False)
class StinespringDilation:
    """Isometry V with V^dag V = 1 whose output is laid out [output, environment]."""

    isometry: np.ndarray
    dim_out: int
    dim_env: int

    def __post_init__(self):
        v = np.array(self.isometry, dtype=complex)
        if v.shape[0] != self.dim_out * self.dim_env:
            raise DimensionMismatch(
                f"isometry rows {v.shape[0]} != dim_out*dim_env {self.dim_out * self.dim_env}"
            )
        defect = np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1])))
        if defect > TP_TOL:
            raise InvariantViolation(f"V^dag V deviates from identity by {defect:.3e}")
        v.setflags(write=False)
        object.__setattr__(self, "isometry", v)

    @property
    def dim_in(self) -> int:
        return self.isometry.shape[1]


def apply(ch: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    """Channel action sum_i K_i rho K_i^dag."""
    if rho.dim != ch.dim_in:
        raise DimensionMismatch(f"state dim {rho.dim} != channel input dim {ch.dim_in}")
    out = apply_matrix(ch, np.asarray(rho.matrix))
    return DensityMatrix(out, DimLayout((ch.dim_out,)))


def apply_matrix(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    k = ch.kraus
    tmp = k @ rho
    return np.tensordot(tmp, k.conj(), axes=([0, 2], [0, 2]))


def output_and_environment(ch: KrausChannel, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Both the channel output and the environment state tr(K_i rho K_j^dag), sharing work."""
    k = ch.kraus
    tmp = k @ rho
    out = np.tensordot(tmp, k.conj(), axes=([0, 2], [0, 2]))
    env = np.tensordot(tmp, k.conj(), axes=([1, 2], [1, 2]))
    return out, env


def choi_of(ch: KrausChannel) -> ChoiState:
    """Choi state (Phi (x) 1)(ebit) on layout [dim_out, dim_in]."""
    d = ch.dim_in
    vecs = ch.kraus.reshape(ch.rank, ch.dim_out * d)
    mat = vecs.T @ vecs.conj() / d  # sum_a vec(K_a) vec(K_a)^dag / d
    state = DensityMatrix(mat, DimLayout((ch.dim_out, d)))
    return ChoiState(state)


def _kraus_from_choi_matrix(mat: np.ndarray, d_out: int, d_in: int) -> np.ndarray:
    w, v = np.linalg.eigh(d_in * mat)
    ops = [
        np.sqrt(w[i]) * v[:, i].reshape(d_out, d_in)
        for i in range(w.size)
        if w[i] > CHOI_RANK_CUTOFF
    ]
    if not ops:
        raise InvariantViolation("Choi state has no eigenvalues above the rank cutoff")
    k = np.array(ops)
    defect = np.max(np.abs(np.tensordot(k.conj(), k, axes=([0, 1], [0, 1])) - np.eye(d_in)))
    if defect > 1e-8:
        raise InvariantViolation(
            f"truncated Kraus set violates trace preservation by {defect:.3e}"
        )
    return k


def kraus_from_choi(omega: ChoiState) -> KrausChannel:
    """Recover Kraus operators from the spectral decomposition of d * Choi.

    Eigenvalues at or below 1e-10 are truncated; if the truncated operator set
    fails trace preservation by more than 1e-8 the input is rejected rather
    than renormalized. The number of operators equals the Choi rank.
    """
    return KrausChannel(
        _kraus_from_choi_matrix(np.asarray(omega.matrix), omega.dim_out, omega.dim_in)
    )


_COMPLEMENTARY_MEMO: dict[str, KrausChannel] = {}
_MEMO_LOCK = threading.Lock()


def complementary(ch: KrausChannel) -> KrausChannel:
    """Channel to the environment of the Stinespring dilation.

    The output state has entries ``tr(K_i rho K_j^dag)`` at ``(i, j)``; its
    dimension equals the number of Kraus operators of ``ch``. Results are
    memoized by content hash of the Kraus data.
    """
    key = ch.content_hash()
    hit = _COMPLEMENTARY_MEMO.get(key)
    if hit is not None:
        return hit
    comp = KrausChannel(np.ascontiguousarray(ch.kraus.transpose(1, 0, 2)))
    with _MEMO_LOCK:
        _COMPLEMENTARY_MEMO.setdefault(key, comp)
    return _COMPLEMENTARY_MEMO[key]


def stinespring(ch: KrausChannel) -> StinespringDilation:
    """Isometry V with V |psi> = sum_i (K_i |psi>) (x) |i>_env, output laid out [out, env]."""
    r, d_out, d_in = ch.kraus.shape
    v = ch.kraus.transpose(1, 0, 2).reshape(d_out * r, d_in)
    return StinespringDilation(v, dim_out=d_out, dim_env=r)


def purified_choi(ch: KrausChannel) -> DensityMatrix:
    """Pure tripartite state (V (x) 1)|ebit> on layout [out, env, in]."""
    dil = stinespring(ch)
    d = ch.dim_in
    vec = np.asarray(dil.isometry).reshape(dil.dim_out * dil.dim_env * d) / np.sqrt(d)
    return qmath.pure_state(vec, DimLayout((dil.dim_out, dil.dim_env, d)))


def isi_readout(omega: ChoiState, rho: DensityMatrix) -> DensityMatrix:
    """Recover the channel action from its Choi state: d * tr_in[omega (1 (x) rho^t)]."""
    if rho.dim != omega.dim_in:
        raise DimensionMismatch(f"state dim {rho.dim} != Choi input dim {omega.dim_in}")
    d_out, d_in = omega.dim_out, omega.dim_in
    w = np.asarray(omega.matrix).reshape(d_out, d_in, d_out, d_in)
    out = d_in * np.einsum("oapc,ac->op", w, np.asarray(rho.matrix))
    return DensityMatrix(out, DimLayout((d_out,)))


def tensor(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """Parallel composition a (x) b with Kraus products; a is the most significant factor."""
    ka, kb = a.kraus, b.kraus
    out = np.einsum("aij,bkl->abikjl", ka, kb).reshape(
        a.rank * b.rank, a.dim_out * b.dim_out, a.dim_in * b.dim_in
    )
    return KrausChannel(out)


def tensor_power(ch: KrausChannel, n: int) -> KrausChannel:
    if n < 1:
        raise ValueError("tensor power needs n >= 1")
    out = ch
    for _ in range(n - 1):
        out = tensor(out, ch)
    return out


def compose(after: KrausChannel, before: KrausChannel) -> KrausChannel:
    """Serial composition (after o before); compresses rank via a Choi roundtrip
    when the product list exceeds dim_in * dim_out."""
    if after.dim_in != before.dim_out:
        raise DimensionMismatch(
            f"cannot compose: after.dim_in {after.dim_in} != before.dim_out {before.dim_out}"
        )
    prod = np.einsum("aij,bjk->abik", after.kraus, before.kraus).reshape(
        after.rank * before.rank, after.dim_out, before.dim_in
    )
    ch = KrausChannel(prod)
    if ch.rank > ch.dim_in * ch.dim_out:
        ch = kraus_from_choi(choi_of(ch))
    return ch


# ---------------------------------------------------------------------------
# channel zoo
# ---------------------------------------------------------------------------

PAULI_MATRICES = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _check_prob(name: str, value: float):
    if not (-1e-12 <= value <= 1.0 + 1e-12):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def identity(d: int) -> KrausChannel:
    return KrausChannel(np.eye(d, dtype=complex)[None, :, :])


def pauli(p0: float, p1: float, p2: float, p3: float) -> KrausChannel:
    probs = (p0, p1, p2, p3)
    for i, p in enumerate(probs):
        _check_prob(f"p{i}", p)
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError(f"Pauli probabilities must sum to 1, got {sum(probs)}")
    ops = [np.sqrt(max(p, 0.0)) * sig for p, sig in zip(probs, PAULI_MATRICES) if p > 0.0]
    return KrausChannel(np.array(ops))


def dephasing(p: float) -> KrausChannel:
    """(1-p) rho + p Z rho Z on a qubit."""
    _check_prob("p", p)
    return pauli(1.0 - p, 0.0, 0.0, p)


def depolarizing(lam: float, d: int = 2) -> KrausChannel:
    """(1-lam) rho + lam * 1/d in any dimension."""
    _check_prob("lam", lam)
    ops = []
    if lam < 1.0:
        ops.append(np.sqrt(1.0 - lam) * np.eye(d, dtype=complex))
    if lam > 0.0:
        for i in range(d):
            for j in range(d):
                op = np.zeros((d, d), dtype=complex)
                op[i, j] = np.sqrt(lam / d)
                ops.append(op)
    return KrausChannel(np.array(ops))


def erasure(q: float, d: int = 2) -> KrausChannel:
    """Erasure to a flag state: dim d input, dim d+1 output, flag on the last basis vector."""
    _check_prob("q", q)
    embed = np.zeros((d + 1, d), dtype=complex)
    embed[:d, :] = np.eye(d)
    ops = []
    if q < 1.0:
        ops.append(np.sqrt(1.0 - q) * embed)
    if q > 0.0:
        for i in range(d):
            op = np.zeros((d + 1, d), dtype=complex)
            op[d, i] = np.sqrt(q)
            ops.append(op)
    return KrausChannel(np.array(ops))


def amplitude_damping(gamma: float) -> KrausChannel:
    _check_prob("gamma", gamma)
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
    return KrausChannel(np.array([k0, k1]))


def dephrasure(p: float, q: float) -> KrausChannel:
    """Qubit dephasing mixed with erasure to a third flag level.

    D(rho) = (1-q) [(1-p) rho + p Z rho Z] + q |e><e|, with dim_in 2, dim_out 3
    and |e> the last output basis vector. Kraus operators with exactly zero
    weight are dropped, so dephrasure(p, 0) is a dephasing channel embedded in
    the 3-dimensional output.
    """
    _check_prob("p", p)
    _check_prob("q", q)
    embed = np.zeros((3, 2), dtype=complex)
    embed[0, 0] = embed[1, 1] = 1.0
    z = embed @ PAULI_MATRICES[3]
    ops = []
    if (1.0 - q) * (1.0 - p) > 0.0:
        ops.append(np.sqrt((1.0 - q) * (1.0 - p)) * embed)
    if (1.0 - q) * p > 0.0:
        ops.append(np.sqrt((1.0 - q) * p) * z)
    if q > 0.0:
        for i in range(2):
            op = np.zeros((3, 2), dtype=complex)
            op[2, i] = np.sqrt(q)
            ops.append(op)
    return KrausChannel(np.array(ops))


def replacer(target: DensityMatrix) -> KrausChannel:
    """Channel that discards its input and outputs the target state."""
    w, v = np.linalg.eigh(np.asarray(target.matrix))
    d = target.dim
    ops = []
    for k in range(d):
        if w[k] <= 1e-14:
            continue
        for i in range(d):
            op = np.sqrt(w[k]) * np.outer(v[:, k], np.eye(d)[i])
            ops.append(op)
    return KrausChannel(np.array(ops))


def random_channel(seed: int, dim_in: int, dim_out: int, kraus_rank: int) -> KrausChannel:
    """Random channel from a Haar isometry into dim_out * kraus_rank."""
    total = dim_out * kraus_rank
    if total < dim_in:
        raise ValueError("dim_out * kraus_rank must be >= dim_in for an isometry")
    u = qmath.random_unitary(seed, total)
    v = u[:, :dim_in]
    k = v.reshape(dim_out, kraus_rank, dim_in).transpose(1, 0, 2)
    return KrausChannel(np.ascontiguousarray(k))


# ---------------------------------------------------------------------------
# JSON channel specs
# ---------------------------------------------------------------------------

_ZOO_BUILDERS = {
    "identity": lambda params: identity(int(params.get("d", 2))),
    "pauli": lambda params: pauli(
        float(params["p0"]), float(params["p1"]), float(params["p2"]), float(params["p3"])
    ),
    "dephasing": lambda params: dephasing(float(params["p"])),
    "depolarizing": lambda params: depolarizing(float(params["lam"]), int(params.get("d", 2))),
    "erasure": lambda params: erasure(float(params["q"]), int(params.get("d", 2))),
    "amplitude_damping": lambda params: amplitude_damping(float(params["gamma"])),
    "dephrasure": lambda params: dephrasure(float(params["p"]), float(params["q"])),
    "replacer": lambda params: replacer(
        qmath.basis_state(int(params.get("basis", 0)), int(params.get("d", 2)))
    ),
}


def channel_from_spec(spec: dict) -> KrausChannel:
    """Build a channel from a JSON-style spec.

    Either ``{"name": "<zoo-name>", "params": {...}}`` or an explicit Kraus
    form ``{"kraus": [[[ [re, im], ... ]]], "dim_in": n, "dim_out": m}`` with
    row-major matrix entries.
    """
    if not isinstance(spec, dict):
        raise SpecError(f"channel spec must be an object, got {type(spec).__name__}")
    if "name" in spec:
        name = spec["name"]
        builder = _ZOO_BUILDERS.get(name)
        if builder is None:
            raise SpecError(f"unknown channel name {name!r}; known: {sorted(_ZOO_BUILDERS)}")
        try:
            return builder(spec.get("params", {}))
        except KeyError as exc:
            raise SpecError(f"channel {name!r} is missing parameter {exc}") from exc
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
    if "kraus" in spec:
        try:
            dim_in = int(spec["dim_in"])
            dim_out = int(spec["dim_out"])
            raw = np.asarray(spec["kraus"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed explicit Kraus spec: {exc}") from exc
        if raw.ndim != 4 or raw.shape[1:] != (dim_out, dim_in, 2):
            raise SpecError(
                f"kraus entries must have shape (rank, {dim_out}, {dim_in}, 2), got {raw.shape}"
            )
        mats = raw[..., 0] + 1j * raw[..., 1]
        try:
            return KrausChannel(mats)
        except InvariantViolation as exc:
            raise SpecError(str(exc)) from exc
    raise SpecError("channel spec needs either a 'name' or a 'kraus' entry")


def channel_to_spec(ch: KrausChannel) -> dict:
    """Explicit Kraus JSON form of a channel (inverse of channel_from_spec)."""
    stacked = np.stack([ch.kraus.real, ch.kraus.imag], axis=-1)
    return {"kraus": stacked.tolist(), "dim_in": ch.dim_in, "dim_out": ch.dim_out}
