"""Entropic information measures of (state, channel) pairs.

All values are in bits and returned raw: negative values are meaningful and
capacity-level clipping at zero happens only in reporting. ``copies`` counts
how many uses of the underlying channel enter a measure (two per side for the
Choi measures).
"""

from dataclasses import dataclass

import numpy as np

from . import channels as ch_mod
from . import qmath
from .channels import ChoiState, KrausChannel
from .errors import CapExceeded, DimensionMismatch
from .qmath import DensityMatrix

DEFAULT_DIM_CAP = 256

MEASURE_KINDS = ("coherent", "mutual", "choi-coherent", "choi-mutual", "holevo")


@dataclass(frozen=True)
class InfoValue:
    """A measure value in bits together with the number of channel uses."""

    value: float
    measure_kind: str
    copies: int

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError("copies must be >= 1")
        if self.measure_kind not in MEASURE_KINDS:
            raise ValueError(f"unknown measure kind {self.measure_kind!r}")

    def per_use(self) -> float:
        return self.value / self.copies


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Probability-weighted collection of states."""

    members: tuple[tuple[float, DensityMatrix], ...]

    def __post_init__(self):
        members = tuple((float(p), s) for p, s in self.members)
        if not members:
            raise ValueError("ensemble must not be empty")
        probs = np.array([p for p, _ in members])
        if np.any(probs < -1e-12):
            raise ValueError("ensemble probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-10:
            raise ValueError(f"ensemble probabilities sum to {probs.sum()}, not 1")
        dims = {s.dim for _, s in members}
        if len(dims) != 1:
            raise DimensionMismatch(f"ensemble members have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "members", members)

    @property
    def dim(self) -> int:
        return self.members[0][1].dim


def coherent_entropies(ch: KrausChannel, rho: np.ndarray) -> tuple[float, float]:
    """(output entropy, environment entropy) for a raw input matrix."""
    out, env = ch_mod.output_and_environment(ch, rho)
    return qmath.entropy_of_hermitian(out), qmath.entropy_of_hermitian(env)


def coherent_information(rho: DensityMatrix, ch: KrausChannel) -> InfoValue:
    """S(output) - S(environment) in bits for a single channel use."""
    if rho.dim != ch.dim_in:
        raise DimensionMismatch(f"state dim {rho.dim} != channel input dim {ch.dim_in}")
    s_out, s_env = coherent_entropies(ch, np.asarray(rho.matrix))
    return InfoValue(s_out - s_env, "coherent", 1)


def mutual_information(rho: DensityMatrix, ch: KrausChannel) -> InfoValue:
    """S(rho) plus the coherent information."""
    ic = coherent_information(rho, ch)
    s_in = qmath.entropy_of_hermitian(np.asarray(rho.matrix))
    return InfoValue(s_in + ic.value, "mutual", 1)


def choi_coherent_information(omega: ChoiState, ch: KrausChannel) -> InfoValue:
    """Coherent information of a Choi-state input through two parallel channel uses."""
    if omega.dim_out != ch.dim_in or omega.dim_in != ch.dim_in:
        raise DimensionMismatch(
            f"Choi input must live on two copies of dim {ch.dim_in}, "
            f"got [{omega.dim_out}, {omega.dim_in}]"
        )
    pair = ch_mod.tensor(ch, ch)
    s_out, s_env = coherent_entropies(pair, np.asarray(omega.matrix))
    return InfoValue(s_out - s_env, "choi-coherent", 2)


def choi_mutual_information(omega: ChoiState, ch: KrausChannel) -> InfoValue:
    """S(omega) plus the Choi coherent information over two parallel uses."""
    ic = choi_coherent_information(omega, ch)
    s_in = qmath.entropy_of_hermitian(np.asarray(omega.matrix))
    return InfoValue(s_in + ic.value, "choi-mutual", 2)


def holevo_chi(ens: Ensemble, ch: KrausChannel) -> InfoValue:
    """S(sum_i p_i Phi(w_i)) - sum_i p_i S(Phi(w_i)) for the channel passed in.

    Callers interested in classical Choi coding pass the two-copy channel and
    two-copy Choi states as members.
    """
    if ens.dim != ch.dim_in:
        raise DimensionMismatch(f"ensemble dim {ens.dim} != channel input dim {ch.dim_in}")
    avg = np.zeros((ch.dim_out, ch.dim_out), dtype=complex)
    mean_member_entropy = 0.0
    for p, state in ens.members:
        out = ch_mod.apply_matrix(ch, np.asarray(state.matrix))
        avg += p * out
        if p > 0.0:
            mean_member_entropy += p * qmath.entropy_of_hermitian(out)
    return InfoValue(qmath.entropy_of_hermitian(avg) - mean_member_entropy, "holevo", 1)


def check_dim_cap(ch: KrausChannel, measure_kind: str, n: int, cap: int = DEFAULT_DIM_CAP):
    """Raise CapExceeded when the n-use input space exceeds the cap."""
    uses = 2 * n if measure_kind in ("choi-coherent", "choi-mutual", "holevo") else n
    total = ch.dim_in**uses
    if total > cap:
        raise CapExceeded(
            f"input dimension {ch.dim_in}^{uses} = {total} exceeds the cap {cap}"
        )


def n_shot(measure_kind: str, state, ch: KrausChannel, n: int, cap: int = DEFAULT_DIM_CAP) -> InfoValue:
    """Evaluate a measure against n parallel uses of the channel.

    For the Choi measures the state lives on two n-use blocks, so 2n uses
    enter the returned ``copies``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    check_dim_cap(ch, measure_kind, n, cap)
    chn = ch_mod.tensor_power(ch, n) if n > 1 else ch
    if measure_kind == "coherent":
        val = coherent_information(state, chn)
        return InfoValue(val.value, "coherent", n)
    if measure_kind == "mutual":
        val = mutual_information(state, chn)
        return InfoValue(val.value, "mutual", n)
    if measure_kind == "choi-coherent":
        val = choi_coherent_information(state, chn)
        return InfoValue(val.value, "choi-coherent", 2 * n)
    if measure_kind == "choi-mutual":
        val = choi_mutual_information(state, chn)
        return InfoValue(val.value, "choi-mutual", 2 * n)
    if measure_kind == "holevo":
        pair = ch_mod.tensor(chn, chn)
        val = holevo_chi(state, pair)
        return InfoValue(val.value, "holevo", 2 * n)
    raise ValueError(f"unknown measure kind {measure_kind!r}")
