"""Global maximization of information measures over states and Choi states.

States are parameterized by a lower-triangular factor L (real diagonal,
complex strictly-lower part) so that A = L L^dag is positive semidefinite for
every finite parameter vector; normalization then makes any vector decode to a
valid state. For Choi targets the input marginal is restored exactly by a
symmetric B^{-1/2} normalization on the input factor. Local searches are
quasi-newton (L-BFGS-B) with central finite differences, restarted from
seeded random vectors plus deterministic flat / maximally-entangled starts.

Everything is deterministic given the config: per-restart seeds derive from
the master seed by counter, grid points derive per-index seeds, threads only
distribute independent work items, and ties break toward the lowest restart
index.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from . import channels as ch_mod
from . import information as info_mod
from . import qmath
from .channels import ChoiState, KrausChannel
from .errors import InvariantViolation
from .information import Ensemble, InfoValue
from .qmath import DensityMatrix, DimLayout

DECODE_RIDGE = 1e-12
FD_REL_STEP = 1e-5
TIE_TOL = 1e-12
THREADS_ENV_VAR = "CHOICAP_THREADS"


def worker_count() -> int:
    """Thread count from the CHOICAP_THREADS environment variable.

    Defaults to the available parallelism; never affects results, only wall
    time.
    """
    raw = os.environ.get(THREADS_ENV_VAR, "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class OptimizerConfig:
    """Multistart settings; identical config and seed give bit-identical results.

    ``step_tol`` is a lower bound on finite-difference steps (the relative
    step 1e-5 always exceeds it at the scales probed); ``obj_tol`` is the
    relative objective-decrease stopping tolerance of the local search.
    """

    restarts: int = 32
    max_iters: int = 2000
    step_tol: float = 1e-9
    obj_tol: float = 1e-8
    seed: int = 0
    dim_cap: int = 256
    ensemble_size: int = 4

    def __post_init__(self):
        if min(self.restarts, self.max_iters, self.dim_cap, self.ensemble_size) < 1:
            raise ValueError("restarts, max_iters, dim_cap and ensemble_size must be positive")
        if self.step_tol <= 0 or self.obj_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class RestartRecord:
    label: str
    iterations: int
    value: float


@dataclass(frozen=True, eq=False)
class OptResult:
    best_value: InfoValue
    argmax: object
    restart_log: tuple[RestartRecord, ...]
    converged: bool


# ---------------------------------------------------------------------------
# parameterization
# ---------------------------------------------------------------------------


def packed_length(dim: int) -> int:
    """Number of free real parameters of a dim-dimensional factor."""
    return dim * dim


def raw_length(dim: int) -> int:
    """Length of the full raw vector (re/im for every matrix slot)."""
    return 2 * dim * dim


def _lower_from_packed(x: np.ndarray, dim: int) -> np.ndarray:
    low = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    low[idx, idx] = x[:dim]
    rows, cols = np.tril_indices(dim, -1)
    rest = x[dim:]
    low[rows, cols] = rest[0::2] + 1j * rest[1::2]
    return low


def _packed_from_lower(low: np.ndarray) -> np.ndarray:
    dim = low.shape[0]
    rows, cols = np.tril_indices(dim, -1)
    out = np.empty(packed_length(dim))
    out[:dim] = np.diagonal(low).real
    out[dim::2] = low[rows, cols].real
    out[dim + 1 :: 2] = low[rows, cols].imag
    return out


def _packed_from_raw(raw: np.ndarray, dim: int) -> np.ndarray:
    m = np.asarray(raw, dtype=float).reshape(dim, dim, 2)
    full = m[..., 0] + 1j * m[..., 1]
    low = np.tril(full, -1)
    idx = np.arange(dim)
    low[idx, idx] = full[idx, idx].real
    return _packed_from_lower(low)


def _raw_from_packed(x: np.ndarray, dim: int) -> np.ndarray:
    low = _lower_from_packed(x, dim)
    out = np.zeros((dim, dim, 2))
    out[..., 0] = low.real
    out[..., 1] = low.imag
    return out.ravel()


def _decode_density_matrix(low: np.ndarray) -> np.ndarray:
    a = low @ low.conj().T
    idx = np.arange(a.shape[0])
    a[idx, idx] += DECODE_RIDGE
    return a / np.trace(a).real


def _decode_choi_matrix(low: np.ndarray, d_out: int, d_in: int) -> np.ndarray:
    a = low @ low.conj().T
    idx = np.arange(a.shape[0])
    a[idx, idx] += DECODE_RIDGE
    marg = qmath._partial_trace_matrix(a, (d_out, d_in), (1,))
    w, v = np.linalg.eigh(marg)
    c = (v / np.sqrt(w)) @ v.conj().T
    a4 = a.reshape(d_out, d_in, d_out, d_in)
    out = np.einsum("ia,oapb,bj->oipj", c, a4, c).reshape(a.shape)
    return out / d_in


@dataclass(frozen=True, eq=False)
class StateParam:
    """Unconstrained real parameterization of a density matrix or Choi state.

    ``raw`` holds re/im parts for every slot of a square factor; only the
    lower triangle is used and the diagonal imaginary parts are ignored, so
    decoding is a total function of any finite vector.
    """

    raw: np.ndarray
    target_kind: str
    layout: DimLayout

    def __post_init__(self):
        layout = qmath._as_layout(self.layout)
        if self.target_kind not in ("density", "choi"):
            raise ValueError(f"target_kind must be 'density' or 'choi', got {self.target_kind!r}")
        if self.target_kind == "choi" and len(layout.dims) != 2:
            raise ValueError("choi parameterizations need a two-factor layout")
        raw = np.array(self.raw, dtype=float)
        expected = raw_length(layout.total)
        if raw.shape != (expected,):
            raise ValueError(f"raw vector must have length {expected}, got {raw.shape}")
        if not np.all(np.isfinite(raw)):
            raise ValueError("raw vector must be finite")
        raw.setflags(write=False)
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "layout", layout)


def decode(p: StateParam):
    """Decode a parameter vector into a valid DensityMatrix or ChoiState."""
    dim = p.layout.total
    low = _lower_from_packed(_packed_from_raw(p.raw, dim), dim)
    if p.target_kind == "density":
        return DensityMatrix(_decode_density_matrix(low), p.layout)
    d_out, d_in = p.layout.dims
    mat = _decode_choi_matrix(low, d_out, d_in)
    return ChoiState(DensityMatrix(mat, p.layout))


def _flat_packed(dim: int) -> np.ndarray:
    x = np.zeros(packed_length(dim))
    x[:dim] = 1.0
    return x


def _ebit_packed(side: int) -> np.ndarray:
    low = np.zeros((side * side, side * side), dtype=complex)
    low[:, 0] = qmath.ebit_vector(side)
    return _packed_from_lower(low)


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


class _Objective:
    """Bundles the parameter space, value function and result wrapper."""

    def __init__(self, n_params, value, wrap, det_starts, measure_kind, copies):
        self.n_params = n_params
        self.value = value
        self.wrap = wrap
        self.det_starts = det_starts
        self.measure_kind = measure_kind
        self.copies = copies


def _build_objective(measure_kind: str, ch: KrausChannel, n: int, cfg: OptimizerConfig) -> _Objective:
    info_mod.check_dim_cap(ch, measure_kind, n, cfg.dim_cap)
    chn = ch_mod.tensor_power(ch, n) if n > 1 else ch

    if measure_kind in ("coherent", "mutual"):
        dim = chn.dim_in
        layout = DimLayout((ch.dim_in,) * n)
        include_input_entropy = measure_kind == "mutual"

        def value(x: np.ndarray) -> float:
            rho = _decode_density_matrix(_lower_from_packed(x, dim))
            s_out, s_env = info_mod.coherent_entropies(chn, rho)
            val = s_out - s_env
            if include_input_entropy:
                val += qmath.entropy_of_hermitian(rho)
            return val

        def wrap(x: np.ndarray) -> DensityMatrix:
            return DensityMatrix(_decode_density_matrix(_lower_from_packed(x, dim)), layout)

        starts = [("flat", _flat_packed(dim))]
        return _Objective(packed_length(dim), value, wrap, starts, measure_kind, n)

    if measure_kind in ("choi-coherent", "choi-mutual"):
        side = chn.dim_in
        pair = ch_mod.tensor(chn, chn)
        layout = DimLayout((side, side))
        include_input_entropy = measure_kind == "choi-mutual"
        dim = side * side

        def value(x: np.ndarray) -> float:
            omega = _decode_choi_matrix(_lower_from_packed(x, dim), side, side)
            s_out, s_env = info_mod.coherent_entropies(pair, omega)
            val = s_out - s_env
            if include_input_entropy:
                val += qmath.entropy_of_hermitian(omega)
            return val

        def wrap(x: np.ndarray) -> ChoiState:
            omega = _decode_choi_matrix(_lower_from_packed(x, dim), side, side)
            return ChoiState(DensityMatrix(omega, layout))

        starts = [("flat", _flat_packed(dim)), ("ebit", _ebit_packed(side))]
        return _Objective(packed_length(dim), value, wrap, starts, measure_kind, 2 * n)

    if measure_kind == "holevo":
        side = chn.dim_in
        pair = ch_mod.tensor(chn, chn)
        layout = DimLayout((side, side))
        dim = side * side
        m = cfg.ensemble_size
        member_len = packed_length(dim)

        def split(x):
            weights = x[:m] ** 2 + 1e-12
            weights = weights / weights.sum()
            mats = [
                _decode_choi_matrix(
                    _lower_from_packed(x[m + j * member_len : m + (j + 1) * member_len], dim),
                    side,
                    side,
                )
                for j in range(m)
            ]
            return weights, mats

        def value(x: np.ndarray) -> float:
            weights, mats = split(x)
            avg = np.zeros((pair.dim_out, pair.dim_out), dtype=complex)
            mean_entropy = 0.0
            for p, mat in zip(weights, mats):
                out = ch_mod.apply_matrix(pair, mat)
                avg += p * out
                mean_entropy += p * qmath.entropy_of_hermitian(out)
            return qmath.entropy_of_hermitian(avg) - mean_entropy

        def wrap(x: np.ndarray) -> Ensemble:
            weights, mats = split(x)
            return Ensemble(
                tuple(
                    (float(p), DensityMatrix(mat, layout)) for p, mat in zip(weights, mats)
                )
            )

        start = np.zeros(m + m * member_len)
        start[:m] = 1.0
        for j in range(m):
            block = _ebit_packed(side) if j % 2 else _flat_packed(dim)
            start[m + j * member_len : m + (j + 1) * member_len] = block
        starts = [("flat-ebit", start)]
        return _Objective(m + m * member_len, value, wrap, starts, measure_kind, 2 * n)

    raise ValueError(f"unknown measure kind {measure_kind!r}")


# ---------------------------------------------------------------------------
# multistart driver
# ---------------------------------------------------------------------------


def _run_restart(value_fn, x0: np.ndarray, max_iters: int, ftol: float):
    best = {"f": -np.inf, "x": np.array(x0, dtype=float)}

    def negated(x):
        val = value_fn(x)
        if not np.isfinite(val):
            raise InvariantViolation("objective returned a non-finite value")
        if val > best["f"]:
            best["f"] = val
            best["x"] = np.array(x, dtype=float)
        return -val

    res = minimize(
        negated,
        x0,
        method="L-BFGS-B",
        jac="3-point",
        options={
            "maxiter": max_iters,
            "ftol": ftol,
            "finite_diff_rel_step": FD_REL_STEP,
        },
    )
    return best["f"], best["x"], int(res.nit), bool(res.success)


def _multistart(value_fn, n_params: int, cfg: OptimizerConfig, det_starts):
    starts = list(det_starts)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        starts.append((f"seed{i}", rng.uniform(-1.0, 1.0, n_params)))

    def work(item):
        label, x0 = item
        f, x, nit, ok = _run_restart(value_fn, x0, cfg.max_iters, cfg.obj_tol)
        return label, f, x, nit, ok

    workers = min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, starts))
    else:
        results = [work(item) for item in starts]

    best_idx = 0
    for i in range(1, len(results)):
        if results[i][1] > results[best_idx][1] + TIE_TOL:
            best_idx = i
    log = tuple(RestartRecord(label, nit, f) for label, f, _, nit, _ in results)
    label, f, x, _, ok = results[best_idx]
    return f, x, log, ok


def maximize(measure_kind: str, ch: KrausChannel, n: int, cfg: OptimizerConfig) -> OptResult:
    """Best value of a measure over its state space for n parallel channel uses."""
    obj = _build_objective(measure_kind, ch, n, cfg)
    f, x, log, ok = _multistart(obj.value, obj.n_params, cfg, obj.det_starts)
    argmax = obj.wrap(x)
    return OptResult(
        best_value=InfoValue(float(f), obj.measure_kind, obj.copies),
        argmax=argmax,
        restart_log=log,
        converged=ok,
    )


# ---------------------------------------------------------------------------
# higher-level reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GapReport:
    """Superadditivity comparison of one- and two-use maxima."""

    one_shot: OptResult
    two_shot: OptResult
    choi_one_shot: OptResult

    @property
    def gap(self) -> float:
        return self.two_shot.best_value.value - 2.0 * self.one_shot.best_value.value

    @property
    def undoubled_diff(self) -> float:
        return self.two_shot.best_value.value - self.one_shot.best_value.value


def superadditivity_gap(ch: KrausChannel, cfg: OptimizerConfig) -> GapReport:
    """Maximize the coherent information over one use, two uses and Choi inputs."""
    one = maximize("coherent", ch, 1, cfg)
    two = maximize("coherent", ch, 2, cfg)
    choi_one = maximize("choi-coherent", ch, 1, cfg)
    return GapReport(one_shot=one, two_shot=two, choi_one_shot=choi_one)


@dataclass(frozen=True, eq=False)
class ChainReport:
    """Capacity-chain values: flat input, per-use Choi maximum, state maximum."""

    flat: float
    choi_per_use: float
    state_max: float
    two_copy_half: float
    state_result: OptResult
    choi_result: OptResult
    two_copy_result: OptResult

    def ordering_ok(self, tol: float = 1e-8) -> bool:
        return self.flat <= self.choi_per_use + tol and self.choi_per_use <= self.two_copy_half + tol


def capacity_chain(ch: KrausChannel, cfg: OptimizerConfig) -> ChainReport:
    flat_value = info_mod.coherent_information(qmath.flat_state(ch.dim_in), ch).value
    state = maximize("coherent", ch, 1, cfg)
    choi = maximize("choi-coherent", ch, 1, cfg)
    two_copy = maximize("coherent", ch, 2, cfg)
    return ChainReport(
        flat=flat_value,
        choi_per_use=choi.best_value.value / 2.0,
        state_max=state.best_value.value,
        two_copy_half=two_copy.best_value.value / 2.0,
        state_result=state,
        choi_result=choi,
        two_copy_result=two_copy,
    )


@dataclass(frozen=True)
class CAReport:
    """Control-assisted capacities from one shared maximization."""

    q_ca_hat: float
    c_ca_hat: float


def ca_capacities(ch: KrausChannel, cfg: OptimizerConfig) -> tuple[CAReport, OptResult]:
    """q = max I(omega, two uses)/4 and c = 2q by the shared maximization."""
    res = maximize("choi-mutual", ch, 1, cfg)
    best = res.best_value.value
    return CAReport(q_ca_hat=best / 4.0, c_ca_hat=best / 2.0), res


def point_seed(master_seed: int, index: int) -> int:
    """Deterministic per-grid-point seed derived from the master seed."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def scan(family, grid, cfg: OptimizerConfig, param_names) -> list[dict]:
    """Superadditivity-gap rows over a parameter grid, in grid order.

    ``family`` maps one grid tuple to a channel. Each point runs with a seed
    derived from its index, so results do not depend on execution order or
    thread count.
    """
    grid = [tuple(point) for point in grid]
    param_names = list(param_names)

    def work(item):
        idx, point = item
        point_cfg = replace(cfg, seed=point_seed(cfg.seed, idx))
        report = superadditivity_gap(family(*point), point_cfg)
        row = dict(zip(param_names, point))
        row.update(
            one_shot=report.one_shot.best_value.value,
            two_shot=report.two_shot.best_value.value,
            gap=report.gap,
            undoubled_diff=report.undoubled_diff,
            choi_one_shot=report.choi_one_shot.best_value.value,
            one_shot_converged=report.one_shot.converged,
            two_shot_converged=report.two_shot.converged,
            choi_one_shot_converged=report.choi_one_shot.converged,
        )
        return idx, row

    items = list(enumerate(grid))
    workers = min(worker_count(), max(len(items), 1))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(item) for item in items]
    results.sort(key=lambda pair: pair[0])
    return [row for _, row in results]


def scan_point_config(cfg: OptimizerConfig, index: int) -> OptimizerConfig:
    """The exact per-point config a scan uses at a grid index."""
    return replace(cfg, seed=point_seed(cfg.seed, index))


def degradability_residual(ch: KrausChannel, cfg: OptimizerConfig) -> float:
    """Least Frobenius distance between the environment dual and D o Phi over channels D.

    Candidate channels D from the channel output to the environment are
    parameterized through their Choi states with the same multistart
    machinery; a residual below 1e-3 is conventionally reported as
    "numerically degradable".
    """
    comp = ch_mod.complementary(ch)
    target = np.asarray(ch_mod.choi_of(comp).matrix)
    d_env, d_out = comp.dim_out, ch.dim_out
    dim = d_env * d_out

    def value(x: np.ndarray) -> float:
        omega = _decode_choi_matrix(_lower_from_packed(x, dim), d_env, d_out)
        kraus_d = ch_mod._kraus_from_choi_matrix(omega, d_env, d_out)
        composed = ch_mod.compose(KrausChannel(kraus_d), ch)
        diff = np.asarray(ch_mod.choi_of(composed).matrix) - target
        return -float(np.linalg.norm(diff))

    starts = [("flat", _flat_packed(dim))]
    if d_env == d_out:
        starts.append(("ebit", _ebit_packed(d_out)))
    f, _, _, _ = _multistart(value, packed_length(dim), cfg, starts)
    return float(-f)


# ---------------------------------------------------------------------------
# argmax structure checks
# ---------------------------------------------------------------------------

_CORRELATED_ORBIT: list[np.ndarray] | None = None


def _single_qubit_cliffords() -> list[np.ndarray]:
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    s = np.array([[1, 0], [0, 1j]], dtype=complex)

    def canon(u):
        flat = u.ravel()
        pivot = flat[np.argmax(np.abs(flat) > 1e-9)]
        return np.round(u / (pivot / abs(pivot)), 9)

    group = {}
    frontier = [np.eye(2, dtype=complex)]
    while frontier:
        nxt = []
        for u in frontier:
            key = canon(u).tobytes()
            if key in group:
                continue
            group[key] = u
            nxt.extend([u @ h, u @ s])
        frontier = nxt
    return list(group.values())


def _correlated_orbit() -> list[np.ndarray]:
    """Orbit of (|00><00| + |11><11|)/2 under local Paulis and joint Cliffords."""
    global _CORRELATED_ORBIT
    if _CORRELATED_ORBIT is not None:
        return _CORRELATED_ORBIT
    ref = np.zeros((4, 4), dtype=complex)
    ref[0, 0] = ref[3, 3] = 0.5
    seen = {}
    for u in _single_qubit_cliffords():
        joint = np.kron(u, u)
        base = joint @ ref @ joint.conj().T
        for pa in ch_mod.PAULI_MATRICES:
            for pb in ch_mod.PAULI_MATRICES:
                op = np.kron(pa, pb)
                cand = op @ base @ op.conj().T
                key = np.round(cand, 9).tobytes()
                if key not in seen:
                    seen[key] = cand
    _CORRELATED_ORBIT = list(seen.values())
    return _CORRELATED_ORBIT


def maximally_correlated_distance(state: DensityMatrix) -> float:
    """Min trace distance from a two-qubit state to the rank-two maximally
    correlated family, up to local Paulis and joint single-qubit Cliffords."""
    if state.dim != 4:
        raise ValueError("expected a two-qubit state")
    mat = np.asarray(state.matrix)
    best = np.inf
    for cand in _correlated_orbit():
        w = np.linalg.eigvalsh(mat - cand)
        best = min(best, 0.5 * float(np.sum(np.abs(w))))
    return best
