"""Exact error-correction condition checking and coding-fidelity evaluation.

The correctability criterion for a code projector P and error operators E_i is
``P E_i^dag E_j P = c_ij P``; diagonalizing the (Hermitian, density-like)
matrix ``c`` yields effective errors with definite probabilities, whose count
can be smaller than the error-set cardinality (degeneracy).
"""

from dataclasses import dataclass

import numpy as np

from . import channels as ch_mod
from . import qmath
from .channels import KrausChannel
from .errors import CapExceeded, DimensionMismatch, InvariantViolation
from .qmath import DensityMatrix, DimLayout
from .superchannels import Superchannel, induced_channel

PROJECTOR_TOL = 1e-10
DEFAULT_KL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CodeProjector:
    """Hermitian idempotent projector onto a code space of dimension K."""

    projector: np.ndarray
    code_dim: int

    def __post_init__(self):
        p = np.array(self.projector, dtype=complex)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"projector must be square, got {p.shape}")
        if np.max(np.abs(p - p.conj().T)) > PROJECTOR_TOL:
            raise InvariantViolation("projector is not Hermitian within 1e-10")
        if np.max(np.abs(p @ p - p)) > PROJECTOR_TOL:
            raise InvariantViolation("projector is not idempotent within 1e-10")
        if abs(np.trace(p).real - self.code_dim) > 1e-9:
            raise InvariantViolation(
                f"trace {np.trace(p).real} does not match code dimension {self.code_dim}"
            )
        p.setflags(write=False)
        object.__setattr__(self, "projector", p)

    @property
    def dim(self) -> int:
        return self.projector.shape[0]


@dataclass(frozen=True, eq=False)
class KLReport:
    satisfied: bool
    c_matrix: np.ndarray
    residual: float
    degeneracy_rank: int
    effective_error_probs: tuple[float, ...]


def kl_check(code: CodeProjector, ch: KrausChannel, tol: float = DEFAULT_KL_TOL) -> KLReport:
    """Exact-correctability check of a channel's Kraus set against a code.

    residual is the largest operator-norm deviation of P E_i^dag E_j P from
    c_ij P over all Kraus pairs; the effective error probabilities are the
    eigenvalues of c above 1e-10.
    """
    if code.dim != ch.dim_in:
        raise DimensionMismatch(f"code dim {code.dim} != channel input dim {ch.dim_in}")
    p = np.asarray(code.projector)
    k = ch.kraus
    r = ch.rank
    sandwich = np.einsum("ax,iyx,jyz,ze->ijae", p, k.conj(), k, p, optimize=True)
    # c_ij = tr(P E_i^dag E_j P) / K
    c = np.trace(sandwich, axis1=2, axis2=3) / code.code_dim
    c = 0.5 * (c + c.conj().T)
    residual = 0.0
    for i in range(r):
        for j in range(r):
            dev = sandwich[i, j] - c[i, j] * p
            residual = max(residual, float(np.linalg.norm(dev, 2)))
    w = np.linalg.eigvalsh(c)
    probs = tuple(float(x) for x in w[w > 1e-10][::-1])
    return KLReport(
        satisfied=residual <= tol,
        c_matrix=c,
        residual=residual,
        degeneracy_rank=len(probs),
        effective_error_probs=probs,
    )


def exact_recovery_decoder(
    code: CodeProjector,
    ch: KrausChannel,
    logical_isometry: np.ndarray,
    tol: float = DEFAULT_KL_TOL,
) -> KrausChannel:
    """Polar-decomposition recovery for an exactly correctable channel.

    Returns a channel from the physical space to the logical space: for each
    effective error F_k with probability p_k > 0, the recovery Kraus operator
    is V^dag P F_k^dag / sqrt(p_k); uncorrected directions are mapped to the
    first logical basis state to complete the channel.
    """
    report = kl_check(code, ch, tol)
    if not report.satisfied:
        raise InvariantViolation(
            f"channel is not exactly correctable on this code (residual {report.residual:.3e})"
        )
    p = np.asarray(code.projector)
    v = np.asarray(logical_isometry, dtype=complex)
    if v.shape[0] != code.dim:
        raise DimensionMismatch("logical isometry rows must match the physical dimension")
    w, u = np.linalg.eigh(np.asarray(report.c_matrix))
    ops = []
    covered = np.zeros((ch.dim_out, ch.dim_out), dtype=complex)
    for idx in range(w.size):
        if w[idx] <= 1e-10:
            continue
        eff = np.tensordot(u[:, idx], ch.kraus, axes=(0, 0))  # F_k = sum_j u[j,k] E_j
        ops.append(v.conj().T @ p @ eff.conj().T / np.sqrt(w[idx]))
        covered += eff @ p @ eff.conj().T / w[idx]
    leftover, basis = np.linalg.eigh(np.eye(ch.dim_out) - covered)
    logical_dim = v.shape[1]
    sink = np.zeros(logical_dim)
    sink[0] = 1.0
    for idx in range(leftover.size):
        if leftover[idx] > 0.5:
            ops.append(np.outer(sink, basis[:, idx].conj()))
    return KrausChannel(np.array(ops))


def entanglement_fidelity(
    encode: Superchannel,
    ch: KrausChannel,
    decode: KrausChannel,
    k: int,
    cap: int = 256,
) -> float:
    """Fidelity between k maximally entangled pairs and the coded channel's Choi state.

    ``ch`` is the full physical channel (tensor up parallel uses before the
    call); the effective logical channel is decode o ch o encode, formed via
    the induced channel of the encoding superchannel.
    """
    logical = 2**k
    if logical * logical > cap:
        raise CapExceeded(f"{k} logical qubits need Choi dimension {logical**2} > cap {cap}")
    piped = induced_channel(encode, ch)
    total = ch_mod.compose(decode, piped)
    if total.dim_in != logical or total.dim_out != logical:
        raise DimensionMismatch(
            f"composed channel is {total.dim_out}x{total.dim_in}, expected logical dim {logical}"
        )
    return qmath.fidelity(qmath.ebit(logical), ch_mod.choi_of(total).state)


# ---------------------------------------------------------------------------
# three-qubit repetition demo code
# ---------------------------------------------------------------------------


def repetition3_isometry() -> np.ndarray:
    v = np.zeros((8, 2), dtype=complex)
    v[0, 0] = 1.0  # |000>
    v[7, 1] = 1.0  # |111>
    return v


def repetition3_projector() -> CodeProjector:
    v = repetition3_isometry()
    return CodeProjector(v @ v.conj().T, code_dim=2)


def repetition3_encoder() -> Superchannel:
    v = repetition3_isometry()
    return Superchannel.pre_only(KrausChannel(v[None, :, :]), dim_out=8)


def _kron_all(ops) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def weight_one_x_channel(weights=(0.25, 0.25, 0.25, 0.25)) -> KrausChannel:
    """Correlated three-qubit channel applying 1, X1, X2 or X3 with the given weights."""
    x = ch_mod.PAULI_MATRICES[1]
    eye = np.eye(2, dtype=complex)
    errors = [
        _kron_all([eye, eye, eye]),
        _kron_all([x, eye, eye]),
        _kron_all([eye, x, eye]),
        _kron_all([eye, eye, x]),
    ]
    w = np.asarray(weights, dtype=float)
    if w.shape != (4,) or abs(w.sum() - 1.0) > 1e-10 or np.any(w < 0):
        raise ValueError("weights must be four nonnegative numbers summing to 1")
    return KrausChannel(np.array([np.sqrt(wi) * e for wi, e in zip(w, errors)]))


def code_from_spec(spec: dict) -> CodeProjector:
    """Build a code projector from a JSON-style spec.

    Either ``{"stabilizer_code": "repetition3"}`` or an explicit
    ``{"projector": [[...]], "code_dim": K}`` with real entries (code_dim
    defaults to the rounded trace).
    """
    from .errors import SpecError

    if not isinstance(spec, dict):
        raise SpecError(f"code spec must be an object, got {type(spec).__name__}")
    if "stabilizer_code" in spec:
        name = spec["stabilizer_code"]
        if name != "repetition3":
            raise SpecError(f"unknown stabilizer code {name!r}; known: ['repetition3']")
        return repetition3_projector()
    if "projector" in spec:
        try:
            mat = np.asarray(spec["projector"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise SpecError(f"malformed projector: {exc}") from exc
        code_dim = int(spec.get("code_dim", round(float(np.trace(mat)))))
        try:
            return CodeProjector(mat, code_dim)
        except (InvariantViolation, ValueError) as exc:
            raise SpecError(str(exc)) from exc
    raise SpecError("code spec needs either a 'stabilizer_code' or a 'projector' entry")
