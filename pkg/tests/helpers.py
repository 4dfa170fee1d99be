"""Shared builders and random-matrix generators for the test suite."""

import numpy as np

from nvsinglet.model import TWO_PI, DriveParams, NuclearSpin, PhysicalConstants, SpinSystem

KHZ = TWO_PI * 1e3
B0 = 0.01


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def pair_system(a_par=(2.0, 4.0), a_perp=(16.0, 16.0), couplings=None):
    nuclei = tuple(NuclearSpin(p * KHZ, q * KHZ) for p, q in zip(a_par, a_perp))
    return SpinSystem(nuclei, couplings=couplings or {})


def midway_drive(system, rabi_khz, b0=B0, **kw):
    c = PhysicalConstants()
    i, j = system.pair
    w = c.gamma_n * b0 + (system.nuclei[i].a_par + system.nuclei[j].a_par) / 4
    return DriveParams.locked(w, rabi_khz * KHZ, b0, **kw)


def symmetric_drive(delta1, rabi, n=2):
    """Drive with detunings overridden to (delta1, -delta1); rad/s inputs."""
    c = PhysicalConstants()
    w = c.gamma_n * B0
    return DriveParams.locked(w, rabi, B0, detuning_overrides=(delta1, -delta1) + (None,) * (n - 2))
