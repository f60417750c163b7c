"""Superchannels acting on Choi states and on channels.

A superchannel maps Choi states on ``[dim_out, dim_in]`` to Choi states on
``[new_out, new_in]`` through bipartite Kraus operators

    S_mu = sum_m  post[m, mu] (x) pre[m]

where the memory index ``m`` couples a pre family to a post family. Because
the reference pair of a Choi state is bent onto the input factor, the stored
``pre[m]`` matrices act on the *input port* in the bent direction
(``dim_in -> new_in``); the pre-processing they induce on the channel itself
is by their transposes, which is why the induced channel reads

    F_{i, mu} = sum_m  post[m, mu] K_i pre[m]^t.

The two representations are tied together by the duality square
``choi_of(induced_channel(s, ch)) == apply_to_choi(s, choi_of(ch))``, which
the test suite checks on random memory-coupled instances to guard against
transpose-convention drift.
"""

from dataclasses import dataclass

import numpy as np

from . import channels, qmath
from .channels import ChoiState, KrausChannel
from .errors import DimensionMismatch, InvariantViolation
from .qmath import DensityMatrix, DimLayout

COMPLETENESS_TOL = 1e-9
OUTPUT_MARGINAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Superchannel:
    """Pre/post Kraus families with a shared memory index.

    ``pre_kraus`` has shape ``(memory, new_in, dim_in)`` and ``post_kraus``
    has shape ``(memory, n_post, new_out, dim_out)``.
    """

    pre_kraus: np.ndarray
    post_kraus: np.ndarray

    def __post_init__(self):
        pre = np.array(self.pre_kraus, dtype=complex)
        post = np.array(self.post_kraus, dtype=complex)
        if pre.ndim != 3:
            raise ValueError(f"pre_kraus must have shape (memory, new_in, dim_in), got {pre.shape}")
        if post.ndim != 4:
            raise ValueError(
                f"post_kraus must have shape (memory, n_post, new_out, dim_out), got {post.shape}"
            )
        if pre.shape[0] != post.shape[0]:
            raise DimensionMismatch(
                f"memory dims differ: pre {pre.shape[0]} vs post {post.shape[0]}"
            )
        pre.setflags(write=False)
        post.setflags(write=False)
        object.__setattr__(self, "pre_kraus", pre)
        object.__setattr__(self, "post_kraus", post)

    @property
    def memory_dim(self) -> int:
        return self.pre_kraus.shape[0]

    @property
    def dim_in(self) -> int:
        return self.pre_kraus.shape[2]

    @property
    def new_in(self) -> int:
        return self.pre_kraus.shape[1]

    @property
    def dim_out(self) -> int:
        return self.post_kraus.shape[3]

    @property
    def new_out(self) -> int:
        return self.post_kraus.shape[2]

    # -- constructors -------------------------------------------------------

    @staticmethod
    def identity(dim_out: int, dim_in: int) -> "Superchannel":
        pre = np.eye(dim_in, dtype=complex)[None, :, :]
        post = np.eye(dim_out, dtype=complex)[None, None, :, :]
        return Superchannel(pre, post)

    @staticmethod
    def post_only(ch: KrausChannel, dim_in: int) -> "Superchannel":
        """Post-process the channel output with ``ch``; the input port is untouched."""
        pre = np.eye(dim_in, dtype=complex)[None, :, :]
        post = np.asarray(ch.kraus)[None, :, :, :]
        return Superchannel(pre, post)

    @staticmethod
    def pre_only(ch: KrausChannel, dim_out: int) -> "Superchannel":
        """Pre-process the channel input with ``ch``; the output port is untouched.

        The stored pre family holds the transposes of the Kraus operators of
        ``ch``, matching the bent input port; the memory index enumerates them
        and the post family closes it with identity blocks.
        """
        m = ch.rank
        pre = np.ascontiguousarray(np.asarray(ch.kraus).transpose(0, 2, 1))
        post = np.zeros((m, m, dim_out, dim_out), dtype=complex)
        for i in range(m):
            post[i, i] = np.eye(dim_out)
        return Superchannel(pre, post)

    @staticmethod
    def from_unitaries(
        u1: np.ndarray,
        u2: np.ndarray,
        dim_in: int,
        new_in: int,
        dim_out: int,
        new_out: int,
        memory_dim: int,
    ) -> "Superchannel":
        """Build the Kraus families from dilating unitaries.

        ``u1`` acts on (input port (x) ancilla) -> (new input port (x) memory)
        and must be square of side ``dim_in * a1 == new_in * memory_dim``;
        its ancilla starts in |0>, so ``pre[m] = (1 (x) <m|) u1 (1 (x) |0>)``.
        ``u2`` acts on (output port (x) memory) -> (new output port (x) a2)
        with side ``dim_out * memory_dim == new_out * a2`` and
        ``post[m, mu] = (1 (x) <mu|) u2 (1 (x) |m>)``.
        """
        u1 = np.asarray(u1, dtype=complex)
        u2 = np.asarray(u2, dtype=complex)
        side1, side2 = u1.shape[0], u2.shape[0]
        if u1.shape != (side1, side1) or side1 % dim_in or side1 != new_in * memory_dim:
            raise DimensionMismatch(
                f"u1 side {side1} incompatible with dim_in {dim_in}, new_in {new_in}, "
                f"memory {memory_dim}"
            )
        if u2.shape != (side2, side2) or side2 != dim_out * memory_dim or side2 % new_out:
            raise DimensionMismatch(
                f"u2 side {side2} incompatible with dim_out {dim_out}, new_out {new_out}, "
                f"memory {memory_dim}"
            )
        a1 = side1 // dim_in
        a2 = side2 // new_out
        blocks1 = u1.reshape(new_in, memory_dim, dim_in, a1)
        pre = blocks1[:, :, :, 0].transpose(1, 0, 2)  # ancilla input fixed to |0>
        blocks2 = u2.reshape(new_out, a2, dim_out, memory_dim)
        post = blocks2.transpose(3, 1, 0, 2)  # (memory, mu, new_out, dim_out)
        return Superchannel(np.ascontiguousarray(pre), np.ascontiguousarray(post))

    @staticmethod
    def random_memory_coupled(seed: int, dim: int, memory_dim: int = 2) -> "Superchannel":
        """Random dimension-preserving superchannel with a genuine memory.

        The pre family is a random mixed-unitary (hence unital on the bent
        port, so Choi states map to Choi states); the post family comes from a
        random dilating unitary.
        """
        rng = np.random.default_rng(seed)
        weights = rng.dirichlet(np.ones(memory_dim))
        pre = np.array(
            [
                np.sqrt(weights[m]) * qmath.random_unitary(seed * 977 + 31 * m + 7, dim)
                for m in range(memory_dim)
            ]
        )
        u2 = qmath.random_unitary(seed * 977 + 501, dim * memory_dim)
        blocks2 = u2.reshape(dim, memory_dim, dim, memory_dim)
        post = blocks2.transpose(3, 1, 0, 2)
        return Superchannel(pre, np.ascontiguousarray(post))


def bipartite_kraus(s: Superchannel) -> np.ndarray:
    """Explicit stack of the S_mu operators; raises if completeness fails."""
    ops = np.einsum("mrab,mcd->racbd", s.post_kraus, s.pre_kraus).reshape(
        s.post_kraus.shape[1], s.new_out * s.new_in, s.dim_out * s.dim_in
    )
    defect = np.tensordot(ops.conj(), ops, axes=([0, 1], [0, 1])) - np.eye(ops.shape[2])
    if np.max(np.abs(defect)) > COMPLETENESS_TOL:
        raise InvariantViolation(
            f"sum_mu S_mu^dag S_mu deviates from identity by {np.max(np.abs(defect)):.3e}"
        )
    return ops


def apply_to_choi(s: Superchannel, omega: ChoiState) -> ChoiState:
    """Transform a Choi state: sum_mu S_mu omega S_mu^dag.

    The output is validated against the Choi marginal constraint (tolerance
    1e-8); a violating result raises rather than being silently accepted.
    """
    if (omega.dim_out, omega.dim_in) != (s.dim_out, s.dim_in):
        raise DimensionMismatch(
            f"Choi dims ({omega.dim_out}, {omega.dim_in}) do not match superchannel "
            f"({s.dim_out}, {s.dim_in})"
        )
    ops = bipartite_kraus(s)
    tmp = ops @ np.asarray(omega.matrix)
    out = np.tensordot(tmp, ops.conj(), axes=([0, 2], [0, 2]))
    state = DensityMatrix(out, DimLayout((s.new_out, s.new_in)))
    channels._validate_choi_marginal(state, OUTPUT_MARGINAL_TOL)
    return ChoiState(state)


def induced_channel(s: Superchannel, ch: KrausChannel) -> KrausChannel:
    """The transformed channel, with Kraus operators F_{i,mu} = sum_m post[m,mu] K_i pre[m]^t."""
    if (ch.dim_out, ch.dim_in) != (s.dim_out, s.dim_in):
        raise DimensionMismatch(
            f"channel dims ({ch.dim_out}, {ch.dim_in}) do not match superchannel "
            f"({s.dim_out}, {s.dim_in})"
        )
    pre_t = s.pre_kraus.transpose(0, 2, 1)
    f = np.einsum("mrab,ibc,mcd->irad", s.post_kraus, ch.kraus, pre_t)
    f = f.reshape(ch.rank * s.post_kraus.shape[1], s.new_out, s.new_in)
    return KrausChannel(f)
