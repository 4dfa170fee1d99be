"""Time evolution of the nuclear spins.

Two backends are provided:

* :func:`simulate_full` iterates the exact reset map on the joint NV + nuclei
  space: unitary evolution for one reset period, trace over the NV, re-attach
  the NV reset state.
* :func:`simulate_effective` integrates the nuclei-only Lindblad equation in
  which the reset NV appears as a collective decay channel.

Superoperators act on column-stacked density matrices, so that
``vec(A X B) = (B.T kron A) vec(X)``.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .entanglement import PairObservables, pair_populations
from .errors import IntegrationError, InvalidInputError, NonUniqueSteadyStateError
from .linalg import as_cmatrix, expm_unitary, general_eig, hermitian_part, partial_trace
from .model import (
    DriveParams,
    NoiseParams,
    SpinSystem,
    build_full_hamiltonian,
    build_jump_operators,
    build_local_hamiltonian,
    detunings_at,
    gamma_reset,
    site_operator,
    validity_time,
)

POSITIVITY_TOL = 1e-7
TRACE_TOL = 1e-8
TRACE_DRIFT_LIMIT = 1e-6
MAX_DECAY_JOINT_DIM = 32

OBSERVABLE_COLUMNS = ("pop_uu", "pop_dd", "pop_S", "pop_T", "ln_value", "singlet_fidelity")


class PerturbativeValidityWarning(UserWarning):
    """The reset period exceeds the range where the reset map is perturbative."""


@dataclass(frozen=True)
class ResetProtocol:
    """NV reset settings.

    ``polarization`` is the weight ``p`` of the reset state. With the default
    ``mixture`` channel the NV is re-prepared in ``p|-x><-x| + (1-p)|+x><+x|``;
    with ``partial`` the reset to ``|-x>`` succeeds with probability ``p`` and
    otherwise leaves the joint state untouched.
    """

    t_re: float
    polarization: float = 1.0
    t1_rho: float = math.inf
    nv_decay_in_segment: bool = False
    channel: str = "mixture"

    def __post_init__(self):
        if not self.t_re > 0:
            raise InvalidInputError("t_re must be positive")
        if not 0.5 <= self.polarization <= 1.0:
            raise InvalidInputError("polarization must lie in [0.5, 1]")
        if not self.t1_rho > 0:
            raise InvalidInputError("t1_rho must be positive")
        if self.channel not in ("mixture", "partial"):
            raise InvalidInputError(f"unknown reset channel {self.channel!r}")

    @property
    def reset_state(self) -> np.ndarray:
        """NV reset state in the ``(|+x>, |-x>)`` basis."""
        p = self.polarization if self.channel == "mixture" else 1.0
        return np.diag([1.0 - p, p]).astype(complex)

    @property
    def gamma_n(self) -> float:
        return gamma_reset(self.t_re, self.t1_rho)


@dataclass
class Trajectory:
    """Sampled reduced pair states and their observables."""

    times: np.ndarray
    pair_states: np.ndarray
    observables: list
    final_state: Optional[np.ndarray] = None
    backend: str = ""

    def __len__(self):
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(o, name) for o in self.observables])

    @property
    def ln(self) -> np.ndarray:
        return self.column("ln_value")

    def table(self) -> dict:
        """Columns in output order, time in milliseconds."""
        return {
            "t_ms": np.asarray(self.times) * 1e3,
            "pop_uu": self.column("pop_uu"),
            "pop_dd": self.column("pop_dd"),
            "pop_S": self.column("pop_S"),
            "pop_T": self.column("pop_T"),
            "LN": self.column("ln_value"),
            "fidelity_S": self.column("singlet_fidelity"),
        }


@dataclass(frozen=True)
class Liouvillian:
    dim: int
    matrix: np.ndarray = field(repr=False)

    def apply(self, rho) -> np.ndarray:
        rho = as_cmatrix(rho)
        out = self.matrix @ rho.reshape(-1, order="F")
        return out.reshape(self.dim, self.dim, order="F")


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


# ---------------------------------------------------------------------------
# helpers


def check_density_matrix(rho, dim: int = None, tol: float = 1e-8) -> np.ndarray:
    rho = as_cmatrix(rho)
    if dim is not None and rho.shape[0] != dim:
        raise InvalidInputError(f"density matrix has dimension {rho.shape[0]}, expected {dim}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise InvalidInputError("density matrix is not Hermitian")
    rho = hermitian_part(rho)
    if abs(np.trace(rho).real - 1.0) > tol:
        raise InvalidInputError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise InvalidInputError("density matrix is not positive semidefinite")
    return rho


def pair_state(rho_n: np.ndarray, system: SpinSystem) -> np.ndarray:
    """Reduced state of the target pair, ordered as ``system.pair``."""
    i, j = system.require_pair()
    if system.n_nuclei == 2:
        red = rho_n
    else:
        red = partial_trace(rho_n, system.nuclear_dims, (i, j))
    if i > j:
        swap = np.eye(4)[[0, 2, 1, 3]]
        red = swap @ red @ swap
    return hermitian_part(red)


def _observe(red: np.ndarray, t: float) -> PairObservables:
    if np.linalg.eigvalsh(red)[0] < -POSITIVITY_TOL:
        raise IntegrationError(f"reduced pair state lost positivity at t = {t:.6g} s")
    if abs(np.trace(red).real - 1.0) > TRACE_DRIFT_LIMIT:
        raise IntegrationError(f"trace drifted to {np.trace(red).real:.10f} at t = {t:.6g} s")
    return pair_populations(red / np.trace(red).real)


def _trace_out_nv(rho_joint: np.ndarray) -> np.ndarray:
    d = rho_joint.shape[0] // 2
    t = rho_joint.reshape(2, d, 2, d)
    return t[0, :, 0, :] + t[1, :, 1, :]


# ---------------------------------------------------------------------------
# exact reset map


def reset_step(rho_joint, u_segment, protocol: ResetProtocol) -> np.ndarray:
    """Evolve one reset period, trace out the NV and re-prepare it."""
    rho = np.asarray(rho_joint, dtype=complex)
    u = np.asarray(u_segment, dtype=complex)
    if rho.ndim != 2 or rho.shape != u.shape or rho.shape[0] % 2:
        raise InvalidInputError(f"incompatible joint state {rho.shape} and propagator {u.shape}")
    evolved = u @ rho @ u.conj().T
    return _reattach(evolved, protocol)


def _reattach(evolved: np.ndarray, protocol: ResetProtocol) -> np.ndarray:
    nuclear = _trace_out_nv(evolved)
    fresh = np.kron(protocol.reset_state, nuclear)
    if protocol.channel == "partial" and protocol.polarization < 1.0:
        p = protocol.polarization
        return p * fresh + (1.0 - p) * evolved
    return fresh


def _segment_map(system, drive, protocol, t):
    """Return a callable evolving the joint state over one reset period."""
    h = build_full_hamiltonian(system, drive, t)
    if not protocol.nv_decay_in_segment or math.isinf(protocol.t1_rho):
        u = expm_unitary(h, protocol.t_re)
        return lambda rho: u @ rho @ u.conj().T
    dim = h.shape[0]
    if dim > MAX_DECAY_JOINT_DIM:
        raise InvalidInputError(f"NV decay within segments supports joint dimension <= {MAX_DECAY_JOINT_DIM}")
    rate = 1.0 / protocol.t1_rho
    jumps = [math.sqrt(rate / 2) * site_operator(k, 0, system) for k in ("sigma_plus", "sigma_minus")]
    prop = expm(build_liouvillian(h, jumps).matrix * protocol.t_re)
    return lambda rho: unvec(prop @ vec(rho), dim)


def simulate_full(
    system: SpinSystem,
    drive: DriveParams,
    protocol: ResetProtocol,
    rho0_n,
    t_total: float,
    sample_every: int = 10,
) -> Trajectory:
    """Iterate the reset map from the nuclear state ``rho0_n``.

    Samples are taken at ``t = 0``, every ``sample_every`` resets and after the
    last reset. Time-dependent detunings are frozen at the start of each
    segment.
    """
    system.require_pair()
    rho0 = check_density_matrix(rho0_n, 2 ** system.n_nuclei)
    if t_total < protocol.t_re * (1 - 1e-9):
        raise InvalidInputError("t_total must be at least one reset period")
    if sample_every < 1:
        raise InvalidInputError("sample_every must be >= 1")
    if protocol.t_re >= validity_time(system):
        warnings.warn(
            f"t_re = {protocol.t_re:.3g} s exceeds the perturbative bound {validity_time(system):.3g} s",
            PerturbativeValidityWarning,
            stacklevel=2,
        )
    n_steps = int(math.floor(t_total / protocol.t_re + 1e-9))
    rho = np.kron(protocol.reset_state if protocol.channel == "mixture" else np.diag([0.0, 1.0]), rho0)

    times, states, obs = [], [], []

    def record(k, nuclear):
        red = pair_state(nuclear, system)
        times.append(k * protocol.t_re)
        states.append(red)
        obs.append(_observe(red, k * protocol.t_re))

    record(0, rho0)
    step = None
    cache_key = None
    dynamic = drive.detuning_schedule.time_dependent
    for k in range(n_steps):
        t = k * protocol.t_re
        key = tuple(detunings_at(system, drive, t)) if dynamic else None
        if step is None or key != cache_key:
            step = _segment_map(system, drive, protocol, t)
            cache_key = key
        rho = hermitian_part(_reattach(step(rho), protocol))
        if (k + 1) % sample_every == 0 or k + 1 == n_steps:
            record(k + 1, _trace_out_nv(rho))
    return Trajectory(
        times=np.array(times),
        pair_states=np.array(states),
        observables=obs,
        final_state=_trace_out_nv(rho),
        backend="full",
    )


# ---------------------------------------------------------------------------
# master equation


def build_liouvillian(h, jumps: Sequence = ()) -> Liouvillian:
    """Generator ``-i[H, .] + sum_c D[c]`` as a matrix on column-stacked states."""
    h = as_cmatrix(h)
    d = h.shape[0]
    eye = np.eye(d)
    m = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for c in jumps:
        c = as_cmatrix(c)
        if c.shape != h.shape:
            raise InvalidInputError(f"jump operator shape {c.shape} does not match Hamiltonian {h.shape}")
        cdc = c.conj().T @ c
        m += np.kron(c.conj(), c) - 0.5 * (np.kron(eye, cdc) + np.kron(cdc.T, eye))
    return Liouvillian(d, m)


def effective_liouvillian(
    system: SpinSystem,
    drive: DriveParams,
    gamma_n_reset: float,
    noise: Optional[NoiseParams] = None,
    t: float = 0.0,
    alpha_mode: str = "pair_mean",
) -> Liouvillian:
    h = build_local_hamiltonian(system, drive, t)
    jumps = build_jump_operators(system, drive, gamma_n_reset, noise, t, alpha_mode)
    return build_liouvillian(h, jumps)


def simulate_effective(
    system: SpinSystem,
    drive: DriveParams,
    gamma_n_reset: float,
    noise: Optional[NoiseParams],
    rho0_n,
    t_total: float,
    dt_max: float,
    sample_dt: float = None,
    alpha_mode: str = "pair_mean",
) -> Trajectory:
    """Integrate the nuclear master equation.

    Time-independent generators are propagated exactly with one matrix
    exponential per sampling interval. A time-dependent detuning schedule is
    applied piecewise-constant on sub-steps no longer than ``dt_max``.
    """
    system.require_pair()
    rho0 = check_density_matrix(rho0_n, 2 ** system.n_nuclei)
    if not dt_max > 0:
        raise InvalidInputError("dt_max must be positive")
    sample_dt = dt_max if sample_dt is None else sample_dt
    if not sample_dt > 0:
        raise InvalidInputError("sample_dt must be positive")
    n_samples = int(math.floor(t_total / sample_dt + 1e-9))
    d = rho0.shape[0]
    dynamic = drive.detuning_schedule.time_dependent

    if dynamic:
        n_sub = max(1, math.ceil(sample_dt / dt_max - 1e-9))
        h_sub = sample_dt / n_sub
    else:
        n_sub, h_sub = 1, sample_dt
        prop = expm(effective_liouvillian(system, drive, gamma_n_reset, noise, 0.0, alpha_mode).matrix * sample_dt)

    v = vec(rho0)
    times, states, obs = [0.0], [pair_state(rho0, system)], [_observe(pair_state(rho0, system), 0.0)]
    for k in range(n_samples):
        if dynamic:
            for s in range(n_sub):
                t = k * sample_dt + s * h_sub
                gen = effective_liouvillian(system, drive, gamma_n_reset, noise, t, alpha_mode)
                v = expm(gen.matrix * h_sub) @ v
        else:
            v = prop @ v
        rho = hermitian_part(unvec(v, d))
        t_now = (k + 1) * sample_dt
        drift = abs(np.trace(rho).real - 1.0)
        if drift > TRACE_DRIFT_LIMIT:
            raise IntegrationError(f"trace drift {drift:.3e} after step {k + 1} (t = {t_now:.6g} s, sub-step {h_sub:.3g} s)")
        v = vec(rho)
        red = pair_state(rho, system)
        times.append(t_now)
        states.append(red)
        obs.append(_observe(red, t_now))
    return Trajectory(
        times=np.array(times),
        pair_states=np.array(states),
        observables=obs,
        final_state=unvec(v, d),
        backend="effective",
    )


# ---------------------------------------------------------------------------
# stationary states


def liouvillian_spectrum(liouvillian: Liouvillian) -> np.ndarray:
    w, _ = general_eig(liouvillian.matrix)
    return w


def zero_mode_count(liouvillian: Liouvillian, tol_rel: float = 1e-8) -> int:
    w = np.abs(liouvillian_spectrum(liouvillian))
    scale = w.max()
    if scale == 0:
        return len(w)
    return int(np.sum(w <= tol_rel * scale))


def spectral_gap(liouvillian: Liouvillian) -> float:
    """Second-smallest eigenvalue magnitude of the generator."""
    w = np.sort(np.abs(liouvillian_spectrum(liouvillian)))
    return float(w[1]) if len(w) > 1 else 0.0


def steady_state(liouvillian: Liouvillian, tol_rel: float = 1e-8) -> np.ndarray:
    """Unique stationary state, from the generator with one row replaced by the trace."""
    count = zero_mode_count(liouvillian, tol_rel)
    if count != 1:
        raise NonUniqueSteadyStateError(count)
    d = liouvillian.dim
    a = liouvillian.matrix.copy()
    a[0, :] = vec(np.eye(d)).conj()
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    rho = hermitian_part(unvec(np.linalg.solve(a, b), d))
    return rho / np.trace(rho).real


def convergence_time(trajectory: Trajectory, threshold: float = 0.96, slack: float = 0.005) -> Optional[float]:
    """First sample time after which LN stays above ``threshold - slack``.

    The LN at the returned time itself must reach ``threshold``.
    """
    ln = trajectory.ln
    times = np.asarray(trajectory.times)
    if len(ln) == 0:
        return None
    # minimum over each suffix
    suffix_min = np.minimum.accumulate(ln[::-1])[::-1]
    ok = (ln >= threshold) & (suffix_min >= threshold - slack)
    idx = np.flatnonzero(ok)
    return float(times[idx[0]]) if idx.size else None
