"""Couplings from spatial positions and dimer statistics in the diamond lattice."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError
from .model import PhysicalConstants

NM = 1e-9
DEFAULT_NV_AXIS = tuple(np.ones(3) / math.sqrt(3))
RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence.spawn"
BLOCK_TRIALS = 10_000
_CHUNK_TRIALS = 1_000


@dataclass(frozen=True)
class LatticeSpec:
    lattice_constant: float = 0.357 * NM
    cc_bond: float = 0.154 * NM
    nv_axis: tuple = DEFAULT_NV_AXIS
    abundance: float = 0.0055

    def __post_init__(self):
        if not 0 <= self.abundance <= 1:
            raise InvalidInputError("abundance must lie in [0, 1]")
        axis = np.asarray(self.nv_axis, dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1) > 1e-12:
            raise InvalidInputError("nv_axis must be a unit 3-vector")
        ideal = self.lattice_constant * math.sqrt(3) / 4
        if abs(self.cc_bond - ideal) > 0.01 * ideal:
            raise InvalidInputError("cc_bond inconsistent with lattice_constant * sqrt(3) / 4")
        object.__setattr__(self, "nv_axis", tuple(float(x) for x in axis))

    @property
    def bond_length(self) -> float:
        """Nearest-neighbour distance of the generated lattice."""
        return self.lattice_constant * math.sqrt(3) / 4

    def as_dict(self) -> dict:
        return asdict(self)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if v.shape != (3,) or n == 0:
        raise InvalidInputError("expected a nonzero 3-vector")
    return v / n


def dipolar_coupling(r_vec, b_dir, constants: PhysicalConstants = PhysicalConstants()) -> float:
    """Secular dipolar coupling between two like nuclei, rad/s (signed)."""
    r_vec = np.asarray(r_vec, dtype=float)
    r = np.linalg.norm(r_vec)
    if r_vec.shape != (3,) or not r > 0.05 * NM:
        raise InvalidInputError("separation must be a 3-vector longer than 0.05 nm")
    cos = float(r_vec @ _unit(b_dir)) / r
    return constants.mu0_over_4pi * constants.hbar * constants.gamma_n ** 2 / r ** 3 * (1 - 3 * cos ** 2)


def hyperfine_from_position(pos, nv_axis=DEFAULT_NV_AXIS, constants: PhysicalConstants = PhysicalConstants()):
    """Point-dipole ``(a_par, a_perp)`` in rad/s for a nucleus at ``pos`` (m) from the NV."""
    pos = np.asarray(pos, dtype=float)
    r = np.linalg.norm(pos)
    if pos.shape != (3,) or not r > 0.3 * NM:
        raise InvalidInputError("position must be a 3-vector farther than 0.3 nm from the NV")
    prefactor = constants.mu0_over_4pi * constants.hbar * constants.gamma_e * constants.gamma_n / r ** 3
    cos = float(pos @ _unit(nv_axis)) / r
    sin = math.sqrt(max(0.0, 1 - cos ** 2))
    return prefactor * (3 * cos ** 2 - 1), 3 * prefactor * abs(cos * sin)


# ---------------------------------------------------------------------------
# lattice


def diamond_sites(lattice_constant: float, radius: float) -> np.ndarray:
    """All diamond lattice sites within ``radius`` of the origin site, origin excluded."""
    fcc = np.array([[0, 0, 0], [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
    basis = np.vstack([fcc, fcc + 0.25])
    n = int(math.ceil(radius / lattice_constant)) + 1
    r = np.arange(-n, n + 1)
    cells = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 1, 3)
    sites = ((cells + basis[None]) * lattice_constant).reshape(-1, 3)
    d = np.linalg.norm(sites, axis=1)
    keep = (d <= radius) & (d > 1e-3 * lattice_constant)
    return sites[keep]


@lru_cache(maxsize=32)
def _candidates(spec: LatticeSpec, r_min: float, r_max: float, angle_tol_deg: float, distance: str):
    sites = diamond_sites(spec.lattice_constant, r_max + 2 * spec.cc_bond)
    bond = spec.bond_length
    pairs = np.array(sorted(cKDTree(sites).query_pairs(bond * 1.01)), dtype=int).reshape(-1, 2)
    vec = sites[pairs[:, 1]] - sites[pairs[:, 0]]
    length = np.linalg.norm(vec, axis=1)
    cos = np.abs(vec @ np.asarray(spec.nv_axis)) / length
    along = cos >= math.cos(math.radians(angle_tol_deg))
    if distance == "midpoint":
        dist = np.linalg.norm(0.5 * (sites[pairs[:, 0]] + sites[pairs[:, 1]]), axis=1)
    elif distance == "nearer":
        dist = np.minimum(np.linalg.norm(sites[pairs[:, 0]], axis=1), np.linalg.norm(sites[pairs[:, 1]], axis=1))
    else:
        raise InvalidInputError(f"unknown distance convention {distance!r}")
    sel = along & (dist >= r_min) & (dist <= r_max)
    return sites, pairs[sel]


def dimer_candidates(spec: LatticeSpec, r_min: float, r_max: float, angle_tol_deg: float = 1.0, distance: str = "midpoint"):
    """Lattice sites and the index pairs of qualifying axis-parallel bonds."""
    return _candidates(spec, float(r_min), float(r_max), float(angle_tol_deg), distance)


@dataclass(frozen=True)
class AbundanceResult:
    probability: float
    stderr: float
    successes: int
    trials: int
    seed: int
    n_sites: int
    n_candidate_bonds: int
    rng: str = RNG_ALGORITHM
    lattice: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _run_block(seed_seq, n_trials, n_sites, bonds, abundance) -> int:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    hits = 0
    for start in range(0, n_trials, _CHUNK_TRIALS):
        m = min(_CHUNK_TRIALS, n_trials - start)
        occupied = rng.random((m, n_sites)) < abundance
        if len(bonds):
            hits += int(np.count_nonzero((occupied[:, bonds[:, 0]] & occupied[:, bonds[:, 1]]).any(axis=1)))
    return hits


def dimer_abundance(
    spec: LatticeSpec = LatticeSpec(),
    r_min: float = 1.0 * NM,
    r_max: float = 1.5 * NM,
    trials: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    angle_tol_deg: float = 1.0,
    distance: str = "midpoint",
) -> AbundanceResult:
    """Probability that a random isotope configuration holds an axis-parallel 13C dimer.

    Every carbon site within ``r_max + 2 cc_bond`` of the NV is occupied by 13C
    independently with probability ``spec.abundance``. A trial succeeds when a
    nearest-neighbour pair parallel to the NV axis (within ``angle_tol_deg``)
    is fully occupied and its distance from the NV (bond midpoint, or nearer
    atom with ``distance="nearer"``) lies in ``[r_min, r_max]``.

    Trials are split into fixed blocks of ``BLOCK_TRIALS`` with independent
    child seeds, so the result does not depend on ``workers``.
    """
    if not 0 <= r_min < r_max:
        raise InvalidInputError("need 0 <= r_min < r_max")
    if trials < 10_000:
        raise InvalidInputError("trials must be >= 10^4")
    if workers < 1:
        raise InvalidInputError("workers must be >= 1")
    sites, bonds = dimer_candidates(spec, r_min, r_max, angle_tol_deg, distance)
    sizes = [BLOCK_TRIALS] * (trials // BLOCK_TRIALS)
    if trials % BLOCK_TRIALS:
        sizes.append(trials % BLOCK_TRIALS)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    args = [(c, n, len(sites), bonds, spec.abundance) for c, n in zip(children, sizes)]
    if workers == 1:
        counts = [_run_block(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(lambda a: _run_block(*a), args))
    successes = int(sum(counts))
    p = successes / trials
    return AbundanceResult(
        probability=p,
        stderr=math.sqrt(p * (1 - p) / trials),
        successes=successes,
        trials=trials,
        seed=seed,
        n_sites=len(sites),
        n_candidate_bonds=len(bonds),
        lattice=spec.as_dict(),
    )
