"""Spin system description and operator construction.

Conventions used throughout the package:

* Angular frequencies are in rad/s, times in seconds, fields in tesla.
* Factor 0 of the joint Hilbert space is the microwave-dressed NV qubit with
  basis ``(|+x>, |-x>)``; factors ``1..N`` are the nuclei in declaration order,
  each with basis ``(|up>, |down>)``.
* ``sigma_plus = |+x><-x|`` lifts the freshly reset NV out of ``|-x>``, so the
  flip-flop ``sigma_plus I^-`` lowers a nucleus while exciting the NV.
"""

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import InvalidInputError

TWO_PI = 2.0 * math.pi

# spin-1/2 matrices, basis (up, down) or (+x, -x)
_SZ = np.diag([0.5, -0.5]).astype(complex)
_SP = np.array([[0, 1], [0, 0]], dtype=complex)
_SM = _SP.T.copy()
_SX = 0.5 * (_SP + _SM)
_SY = (_SP - _SM) / 2j

_NUCLEAR_OPS = {"Ix": _SX, "Iy": _SY, "Iz": _SZ, "Iplus": _SP, "Iminus": _SM}
_NV_OPS = {"sigma_z": _SZ, "sigma_plus": _SP, "sigma_minus": _SM}

MAX_NUCLEI = 6


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants in SI units (gyromagnetic ratios in rad/(s T))."""

    gamma_n: float = TWO_PI * 10.7084e6
    gamma_e: float = TWO_PI * 28.024e9
    mu0_over_4pi: float = 1e-7
    hbar: float = 1.054571817e-34

    def __post_init__(self):
        for name in ("gamma_n", "gamma_e", "mu0_over_4pi", "hbar"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class NuclearSpin:
    a_par: float
    a_perp: float
    position: Optional[tuple] = None
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.a_par) and math.isfinite(self.a_perp)):
            raise InvalidInputError("hyperfine components must be finite")
        if self.a_perp < 0:
            raise InvalidInputError("a_perp must be >= 0 (its phase is absorbed into the spin basis)")
        if self.position is not None:
            pos = tuple(float(x) for x in self.position)
            if len(pos) != 3:
                raise InvalidInputError("position must be a 3-vector")
            if np.linalg.norm(pos) <= 0.3e-9:
                raise InvalidInputError("nuclear position closer than 0.3 nm to the NV")
            object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class SpinSystem:
    """NV qubit plus ``N`` nuclei; ``couplings`` maps ``(i, j)`` to g_ij in rad/s."""

    nuclei: tuple
    pair: Optional[tuple] = (0, 1)
    couplings: Mapping = field(default_factory=dict)
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        nuclei = tuple(self.nuclei)
        object.__setattr__(self, "nuclei", nuclei)
        n = len(nuclei)
        if not 1 <= n <= MAX_NUCLEI:
            raise InvalidInputError(f"nuclei count must be between 1 and {MAX_NUCLEI}, got {n}")
        if self.pair is not None:
            pair = tuple(int(i) for i in self.pair)
            if len(pair) != 2 or pair[0] == pair[1] or not all(0 <= i < n for i in pair):
                raise InvalidInputError(f"pair must be two distinct nucleus indices, got {self.pair}")
            object.__setattr__(self, "pair", pair)
        norm = {}
        for (i, j), g in dict(self.couplings).items():
            i, j = int(i), int(j)
            if i == j:
                if g != 0:
                    raise InvalidInputError("dipolar coupling map must have zero diagonal")
                continue
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidInputError(f"coupling index ({i}, {j}) out of range")
            key = (min(i, j), max(i, j))
            if key in norm and not math.isclose(norm[key], g):
                raise InvalidInputError(f"coupling map is not symmetric at {key}")
            norm[key] = float(g)
        object.__setattr__(self, "couplings", norm)

    @property
    def n_nuclei(self) -> int:
        return len(self.nuclei)

    @property
    def nuclear_dims(self) -> tuple:
        return (2,) * self.n_nuclei

    @property
    def joint_dims(self) -> tuple:
        return (2,) * (self.n_nuclei + 1)

    def coupling(self, i: int, j: int) -> float:
        return self.couplings.get((min(i, j), max(i, j)), 0.0)

    def require_pair(self) -> tuple:
        if self.pair is None:
            raise InvalidInputError("this operation needs a designated target pair")
        return self.pair


@dataclass(frozen=True)
class DetuningSchedule:
    """Time dependence of the pair's detuning imbalance.

    ``exponential`` gives ``delta_inf + delta0 * exp(-rate_lambda * t)``.
    """

    kind: str = "constant"
    delta0: float = 0.0
    rate_lambda: float = 0.0
    delta_inf: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "exponential"):
            raise InvalidInputError(f"unknown schedule kind {self.kind!r}")
        if self.rate_lambda < 0:
            raise InvalidInputError("rate_lambda must be >= 0")

    @property
    def time_dependent(self) -> bool:
        return self.kind == "exponential"

    def imbalance(self, t: float) -> Optional[float]:
        if self.kind == "constant":
            return None
        return self.delta_inf + self.delta0 * math.exp(-self.rate_lambda * t)


@dataclass(frozen=True)
class DriveParams:
    """Microwave and rf drive settings.

    ``omega_rf`` defaults to ``omega_mw`` and must equal it unless
    ``allow_mismatch`` is set. ``detuning_overrides`` replaces the derived
    static detuning of individual nuclei (``None`` keeps the derived value).
    """

    omega_mw: float
    omega_rf_rabi: float
    b0: float
    omega_rf: Optional[float] = None
    detuning_schedule: DetuningSchedule = field(default_factory=DetuningSchedule)
    detuning_overrides: Optional[tuple] = None
    allow_mismatch: bool = False

    def __post_init__(self):
        if self.omega_rf is None:
            object.__setattr__(self, "omega_rf", self.omega_mw)
        if not self.allow_mismatch and not math.isclose(self.omega_rf, self.omega_mw, rel_tol=1e-12, abs_tol=1e-9):
            raise InvalidInputError("omega_rf must equal omega_mw (set allow_mismatch to override)")
        for name in ("omega_mw", "omega_rf_rabi", "b0", "omega_rf"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")
        if self.detuning_overrides is not None:
            object.__setattr__(self, "detuning_overrides", tuple(self.detuning_overrides))

    @classmethod
    def locked(cls, omega_rf: float, omega_rf_rabi: float, b0: float, **kw) -> "DriveParams":
        """Drive with the rf carrier and MW Rabi frequency set equal."""
        return cls(omega_mw=omega_rf, omega_rf_rabi=omega_rf_rabi, b0=b0, omega_rf=omega_rf, **kw)


@dataclass(frozen=True)
class NoiseParams:
    """Per-nucleus lowering rates and optional extra pure-dephasing rates (1/s)."""

    gamma: tuple = ()
    gamma_dephasing: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        object.__setattr__(self, "gamma_dephasing", tuple(float(g) for g in self.gamma_dephasing))
        if any(g < 0 for g in self.gamma + self.gamma_dephasing):
            raise InvalidInputError("noise rates must be >= 0")

    def rate(self, i: int) -> float:
        return self.gamma[i] if i < len(self.gamma) else 0.0

    def dephasing(self, i: int) -> float:
        return self.gamma_dephasing[i] if i < len(self.gamma_dephasing) else 0.0


# ---------------------------------------------------------------------------
# detunings


def detuning_of(nucleus: NuclearSpin, drive: DriveParams, constants: PhysicalConstants) -> float:
    return constants.gamma_n * drive.b0 + nucleus.a_par / 2.0 - drive.omega_rf


def static_detunings(system: SpinSystem, drive: DriveParams) -> np.ndarray:
    det = np.array([detuning_of(n, drive, system.constants) for n in system.nuclei])
    if drive.detuning_overrides is not None:
        for i, v in enumerate(drive.detuning_overrides):
            if v is not None and i < len(det):
                det[i] = v
    if not np.all(np.isfinite(det)):
        raise InvalidInputError("derived detunings are not finite")
    return det


def detunings_at(system: SpinSystem, drive: DriveParams, t: float = 0.0) -> np.ndarray:
    """Per-nucleus detunings at time ``t``.

    A time-dependent schedule replaces the pair's imbalance symmetrically about
    its static mean; all other nuclei keep their static values.
    """
    det = static_detunings(system, drive)
    imb = drive.detuning_schedule.imbalance(t)
    if imb is not None:
        i, j = system.require_pair()
        base = 0.5 * (det[i] + det[j])
        det[i] = base + imb
        det[j] = base - imb
    return det


def pair_imbalance(system: SpinSystem, drive: DriveParams, t: float = 0.0) -> float:
    """Half-difference ``|D1 - D2| / 2`` of the pair detunings."""
    i, j = system.require_pair()
    det = detunings_at(system, drive, t)
    return abs(det[i] - det[j]) / 2.0


# ---------------------------------------------------------------------------
# operators


def embed(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Place a 2x2 operator on ``site`` of ``n_sites`` qubit factors."""
    left = np.eye(2 ** site)
    right = np.eye(2 ** (n_sites - site - 1))
    return np.kron(np.kron(left, op), right)


def nuclear_operator(kind: str, index: int, n_nuclei: int) -> np.ndarray:
    """Spin operator of nucleus ``index`` on the nuclei-only space."""
    if kind not in _NUCLEAR_OPS:
        raise InvalidInputError(f"{kind!r} is not a nuclear operator")
    if not 0 <= index < n_nuclei:
        raise InvalidInputError(f"nucleus index {index} out of range")
    return embed(_NUCLEAR_OPS[kind], index, n_nuclei)


def site_operator(op_kind: str, site: int, system: SpinSystem) -> np.ndarray:
    """Operator on the joint space; site 0 is the NV, sites 1..N the nuclei."""
    n_sites = system.n_nuclei + 1
    if not 0 <= site < n_sites:
        raise InvalidInputError(f"site {site} out of range for {n_sites} factors")
    if site == 0:
        if op_kind not in _NV_OPS:
            raise InvalidInputError(f"{op_kind!r} cannot act on the NV site")
        return embed(_NV_OPS[op_kind], 0, n_sites)
    if op_kind not in _NUCLEAR_OPS:
        raise InvalidInputError(f"{op_kind!r} cannot act on a nuclear site")
    return embed(_NUCLEAR_OPS[op_kind], site, n_sites)


def dipolar_term(i: int, j: int, n_nuclei: int) -> np.ndarray:
    """``IzIz - (IxIx + IyIy)/2`` between nuclei ``i`` and ``j``."""
    op = lambda k, s: nuclear_operator(k, s, n_nuclei)
    return op("Iz", i) @ op("Iz", j) - 0.5 * (op("Ix", i) @ op("Ix", j) + op("Iy", i) @ op("Iy", j))


def _nuclear_part(system: SpinSystem, drive: DriveParams, t: float) -> np.ndarray:
    n = system.n_nuclei
    det = detunings_at(system, drive, t)
    h = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i in range(n):
        h += det[i] * nuclear_operator("Iz", i, n) + drive.omega_rf_rabi * nuclear_operator("Ix", i, n)
    for (i, j), g in system.couplings.items():
        if g:
            h += g * dipolar_term(i, j, n)
    return h


def build_local_hamiltonian(system: SpinSystem, drive: DriveParams, t: float = 0.0) -> np.ndarray:
    """Nuclear Hamiltonian: rf drive, detunings and internuclear dipolar terms."""
    h = _nuclear_part(system, drive, t)
    return 0.5 * (h + h.conj().T)


def build_full_hamiltonian(system: SpinSystem, drive: DriveParams, t: float = 0.0) -> np.ndarray:
    """Joint NV + nuclei Hamiltonian in the doubly rotating frame."""
    h = np.kron(np.eye(2), _nuclear_part(system, drive, t))
    sp = site_operator("sigma_plus", 0, system)
    for i, nuc in enumerate(system.nuclei):
        flip = sp @ site_operator("Iminus", i + 1, system)
        h += (nuc.a_perp / 4.0) * (flip + flip.conj().T)
    return 0.5 * (h + h.conj().T)


# ---------------------------------------------------------------------------
# effective dissipation


def gamma_reset(t_re: float, t1_rho: float = math.inf) -> float:
    """Effective NV relaxation rate from the reset period and dressed-state lifetime."""
    if not t_re > 0 or not t1_rho > 0:
        raise InvalidInputError("t_re and t1_rho must be positive")
    return 1.0 / t1_rho + 1.0 / t_re


def alpha_coefficient(a_perp: float, delta: float, gamma_n_reset: float) -> complex:
    """Amplitude of one nucleus in the collective jump operator, in s^-1/2."""
    if not gamma_n_reset > 0:
        raise InvalidInputError("gamma_n_reset must be positive")
    return math.sqrt(gamma_n_reset) * (a_perp / 4.0) / complex(-delta, gamma_n_reset / 2.0)


def jump_detunings(system: SpinSystem, drive: DriveParams, t: float = 0.0, mode: str = "pair_mean") -> np.ndarray:
    """Detunings entering the jump amplitudes.

    In ``pair_mean`` mode both pair nuclei use the pair's mean detuning, so the
    imbalance only acts through the Hamiltonian and equally coupled nuclei keep
    identical amplitudes; ``individual`` uses each nucleus' own detuning.
    """
    det = detunings_at(system, drive, t)
    if mode == "individual" or system.pair is None:
        return det
    if mode != "pair_mean":
        raise InvalidInputError(f"unknown alpha detuning mode {mode!r}")
    i, j = system.pair
    det = det.copy()
    det[i] = det[j] = 0.5 * (det[i] + det[j])
    return det


def alphas(system: SpinSystem, drive: DriveParams, gamma_n_reset: float, t: float = 0.0, mode: str = "pair_mean") -> np.ndarray:
    det = jump_detunings(system, drive, t, mode)
    return np.array([alpha_coefficient(n.a_perp, d, gamma_n_reset) for n, d in zip(system.nuclei, det)])


def build_jump_operators(
    system: SpinSystem,
    drive: DriveParams,
    gamma_n_reset: float,
    noise: Optional[NoiseParams] = None,
    t: float = 0.0,
    alpha_mode: str = "pair_mean",
) -> list:
    """Jump operators of the nuclear master equation, rates folded in.

    Returns ``[L, M_1, ...]`` where ``L = sum_i alpha_i I^-_i`` and each
    ``M_i = sqrt(Gamma_i) I^-_i`` is included only for nonzero rates, followed
    by any optional pure-dephasing channels.
    """
    noise = noise or NoiseParams()
    n = system.n_nuclei
    amps = alphas(system, drive, gamma_n_reset, t, alpha_mode)
    lower = [nuclear_operator("Iminus", i, n) for i in range(n)]
    ops = [sum(a * m for a, m in zip(amps, lower))]
    for i in range(n):
        if noise.rate(i) > 0:
            ops.append(math.sqrt(noise.rate(i)) * lower[i])
    for i in range(n):
        if noise.dephasing(i) > 0:
            ops.append(math.sqrt(2.0 * noise.dephasing(i)) * nuclear_operator("Iz", i, n))
    return ops


def validity_time(system: SpinSystem) -> float:
    """Reset period below which the second-order expansion is trusted."""
    s = sum(n.a_perp ** 2 for n in system.nuclei)
    return math.inf if s == 0 else 1.0 / math.sqrt(s)
