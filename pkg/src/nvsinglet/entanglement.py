"""Two-qubit entanglement measures and the analytic driven steady state.

Pair states use the computational basis ``(|uu>, |ud>, |du>, |dd>)``.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import as_cmatrix, partial_transpose, trace_norm

UP_UP = np.array([1, 0, 0, 0], dtype=complex)
DOWN_DOWN = np.array([0, 0, 0, 1], dtype=complex)
SINGLET = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
TRIPLET0 = np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2)

_LN_CLAMP = 1e-12


@dataclass(frozen=True)
class PairObservables:
    pop_uu: float
    pop_dd: float
    pop_S: float
    pop_T: float
    ln_value: float
    singlet_fidelity: float

    def as_dict(self) -> dict:
        return asdict(self)


def projector(ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, ket.conj())


def _check_pair_state(rho, tol_trace=1e-8, tol_pos=1e-7) -> np.ndarray:
    rho = as_cmatrix(rho)
    if rho.shape != (4, 4):
        raise InvalidInputError(f"expected a 4x4 pair density matrix, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-8:
        raise InvalidInputError("pair state is not Hermitian")
    rho = 0.5 * (rho + rho.conj().T)
    if abs(np.trace(rho).real - 1.0) > tol_trace:
        raise InvalidInputError(f"pair state trace {np.trace(rho).real:.10f} differs from 1")
    if np.linalg.eigvalsh(rho)[0] < -tol_pos:
        raise InvalidInputError("pair state has a negative eigenvalue")
    return rho


def log_negativity(rho_pair) -> float:
    """``log2`` of the trace norm of the partial transpose on the second qubit."""
    rho = _check_pair_state(rho_pair)
    norm = trace_norm(partial_transpose(rho, (2, 2), 1))
    if norm <= 1.0 + _LN_CLAMP:
        return 0.0
    return math.log2(norm)


def analytic_steady_state(delta1: float, omega_rf: float) -> np.ndarray:
    """Dark state ``N (sqrt(2) D1 |dd> - Omega |S>)`` of the driven pair.

    Exact for equal transverse couplings and antisymmetric detunings
    ``D2 = -D1``; not checked here.
    """
    if delta1 == 0 and omega_rf == 0:
        raise InvalidInputError("delta1 and omega_rf cannot both vanish")
    norm = 1.0 / math.sqrt(2 * delta1 ** 2 + omega_rf ** 2)
    return norm * (math.sqrt(2) * delta1 * DOWN_DOWN - omega_rf * SINGLET)


def analytic_ln(delta1: float, omega_rf: float) -> float:
    """Logarithmic negativity of :func:`analytic_steady_state`.

    For ``a|dd> + b|S>`` the partial transpose has trace norm ``1 + |b|^2``,
    giving ``log2(1 + Omega^2 / (2 D1^2 + Omega^2))``.
    """
    if delta1 == 0 and omega_rf == 0:
        raise InvalidInputError("delta1 and omega_rf cannot both vanish")
    return math.log2(1.0 + omega_rf ** 2 / (2 * delta1 ** 2 + omega_rf ** 2))


def amplitude_ln(delta1: float, omega_rf: float) -> float:
    """``log2(1 + |Omega| / sqrt(2 D1^2 + Omega^2))``.

    This is linear rather than quadratic in the singlet amplitude and
    overestimates :func:`analytic_ln` whenever ``D1 != 0``; kept for
    comparison with published working-point values.
    """
    if delta1 == 0 and omega_rf == 0:
        raise InvalidInputError("delta1 and omega_rf cannot both vanish")
    s = 2 * delta1 ** 2 + omega_rf ** 2
    return math.log2(1.0 + abs(omega_rf) * math.sqrt(s) / s)


def pair_populations(rho_pair) -> PairObservables:
    rho = _check_pair_state(rho_pair)
    pop = lambda ket: float(np.real(ket.conj() @ rho @ ket))
    pop_s = pop(SINGLET)
    return PairObservables(
        pop_uu=pop(UP_UP),
        pop_dd=pop(DOWN_DOWN),
        pop_S=pop_s,
        pop_T=pop(TRIPLET0),
        ln_value=log_negativity(rho),
        singlet_fidelity=pop_s,
    )


def optimal_detuning_ratio(k: float) -> float:
    """Imbalance-to-drive ratio maximising LN for noise parameter ``k``."""
    if k < 0:
        raise InvalidInputError("k must be >= 0")
    return math.sqrt(k / 2.0)


def noise_parameter(gamma: float, alpha: complex) -> float:
    """``k = sqrt(Gamma) / |alpha|`` (both square-rooted rates)."""
    if gamma < 0:
        raise InvalidInputError("gamma must be >= 0")
    if alpha == 0:
        raise InvalidInputError("alpha must be nonzero")
    return math.sqrt(gamma) / abs(alpha)


def trace_distance(a, b) -> float:
    return 0.5 * trace_norm(as_cmatrix(a) - as_cmatrix(b))
