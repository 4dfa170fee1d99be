"""
Nuclear decoherence and the best imbalance
==========================================

Extra nuclear lowering at rate G spoils the dark state. With
k = sqrt(G) / |alpha| the perturbative optimum is D/W = sqrt(k/2). This script
scans D/W at fixed W and compares the best point with that rule.
"""

import numpy as np

from nvsinglet import (
    DriveParams,
    NoiseParams,
    NuclearSpin,
    PhysicalConstants,
    SpinSystem,
    alphas,
    effective_liouvillian,
    gamma_reset,
    optimal_detuning_ratio,
    pair_populations,
    steady_state,
)

KHZ = 2 * np.pi * 1e3
B0 = 0.01
system = SpinSystem((NuclearSpin(2 * KHZ, 16 * KHZ), NuclearSpin(4 * KHZ, 16 * KHZ)))
carrier = PhysicalConstants().gamma_n * B0
g_n = gamma_reset(40e-6, 2e-3)


def drive(delta, rabi):
    return DriveParams.locked(carrier, rabi, B0, detuning_overrides=(delta, -delta))


amp = abs(alphas(system, drive(0.0, 1.0), g_n)[0])
rabi = amp ** 2 / 2  # the working point |alpha|^2 / W = 2

for k in (0.005, 0.02, 0.05):
    rate = (k * amp) ** 2
    noise = NoiseParams((rate, rate))
    ratios = np.geomspace(0.01, 1.0, 41)
    lns = [pair_populations(steady_state(effective_liouvillian(system, drive(r * rabi, rabi), g_n, noise))).ln_value for r in ratios]
    best = ratios[int(np.argmax(lns))]
    print(f"k = {k:<6} scan optimum D/W = {best:.3f}  rule sqrt(k/2) = {optimal_detuning_ratio(k):.3f}  LN max = {max(lns):.3f}")
