"""Physical parameters in reduced units and the truncated banded state space.

The system is a superconducting single-electron transistor (SSET) whose
charge couples linearly to the position of a harmonic resonator.  Everything
downstream works in reduced units hbar = 1, Gamma = 1, where Gamma is the
quasiparticle decay rate.  Energies expressed as fractions of the drain-source
energy eV_ds convert with a factor 2*pi because hbar*Gamma = eV_ds / (2*pi).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

# The five retained charge blocks of the SSET density matrix, in storage
# order.  Blocks (0,1), (1,0), (1,2), (2,1) decouple from these and from the
# trace, so they are dropped.
CHARGE_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 2), (2, 0))


@dataclass(frozen=True)
class PaperParams:
    """Raw dimensionless parameters in experiment-style units.

    ej_ratio:        E_J / eV_ds
    de_ratio:        Delta_E / eV_ds
    omega_ratio:     omega / Gamma
    gamma_ext_ratio: gamma_ext / Gamma
    lam:             coupling lambda, lambda^2 = m omega^2 x_s^2 / eV_ds
    """

    ej_ratio: float
    de_ratio: float
    omega_ratio: float
    gamma_ext_ratio: float
    lam: float

    def __post_init__(self):
        if self.omega_ratio <= 0:
            raise ValueError("omega_ratio must be positive")
        if self.gamma_ext_ratio <= 0:
            raise ValueError("gamma_ext_ratio must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.lam >= 0.5:
            raise ValueError("lam >= 0.5 violates the weak-coupling assumption")


@dataclass(frozen=True)
class ModelParams:
    """Reduced-unit parameters (hbar = 1, Gamma = 1).

    e_j, delta_e are energies in units of hbar*Gamma; omega and gamma_ext are
    rates in units of Gamma; c1 is the single-charge coupling matrix element
    C*x_s in units of hbar*Gamma.  lam is retained for the mean-field theory.
    """

    e_j: float
    delta_e: float
    omega: float
    gamma_ext: float
    c1: float
    lam: float

    def fingerprint(self) -> str:
        key = "|".join(
            f"{v:.17g}"
            for v in (self.e_j, self.delta_e, self.omega, self.gamma_ext, self.c1, self.lam)
        )
        return hashlib.sha256(key.encode()).hexdigest()[:16]


def reduce(raw: PaperParams) -> ModelParams:
    """Convert raw drain-source ratios to reduced units.

    eV_ds = 2*pi*hbar*Gamma fixes e_j = 2*pi*ej_ratio and
    delta_e = 2*pi*de_ratio.  Eliminating the mass and zero-point length from
    C = sqrt(hbar omega^3 m / 2) and lambda^2 = m omega^2 x_s^2 / eV_ds gives
    c1 = C*x_s = lam * sqrt(pi * omega) in these units.
    """
    return ModelParams(
        e_j=2 * np.pi * raw.ej_ratio,
        delta_e=2 * np.pi * raw.de_ratio,
        omega=raw.omega_ratio,
        gamma_ext=raw.gamma_ext_ratio,
        c1=raw.lam * np.sqrt(np.pi * raw.omega_ratio),
        lam=raw.lam,
    )


class StateSpace:
    """Banded five-block density-matrix basis with a flat index map.

    Retains, for each charge block, the Fock coherences |n - n'| <= m_max
    with 0 <= n, n' <= n_max.  The flat index runs over blocks first, then n,
    then n' within the band.
    """

    def __init__(self, n_max: int, m_max: int):
        if n_max < 1:
            raise ValueError("n_max must be at least 1")
        if not 0 <= m_max <= n_max:
            raise ValueError("m_max must satisfy 0 <= m_max <= n_max")
        self.n_max = n_max
        self.m_max = m_max
        self.charge_pairs = CHARGE_PAIRS

        index_map = -np.ones((5, n_max + 1, n_max + 1), dtype=np.int64)
        blocks, ns, nps = [], [], []
        k = 0
        for b in range(5):
            for n in range(n_max + 1):
                lo, hi = max(0, n - m_max), min(n_max, n + m_max)
                for npr in range(lo, hi + 1):
                    index_map[b, n, npr] = k
                    blocks.append(b)
                    ns.append(n)
                    nps.append(npr)
                    k += 1
        self.index_map = index_map
        self.block = np.array(blocks, dtype=np.int64)
        self.n = np.array(ns, dtype=np.int64)
        self.n_prime = np.array(nps, dtype=np.int64)
        self.dim = k

    def flat_index(self, block: int, n: int, n_prime: int) -> int:
        """Flat index of (block, n, n'), or -1 if outside the band."""
        return int(self.index_map[block, n, n_prime])

    def unmap(self, flat: int) -> tuple[int, int, int]:
        return int(self.block[flat]), int(self.n[flat]), int(self.n_prime[flat])

    def fingerprint(self) -> str:
        return hashlib.sha256(f"{self.n_max}|{self.m_max}".encode()).hexdigest()[:16]


def build_basis(n_max: int, m_max: int) -> StateSpace:
    """Construct the banded basis; D = 5*((n_max+1)(2 m_max+1) - m_max(m_max+1))."""
    return StateSpace(n_max, m_max)


@dataclass(frozen=True)
class TruncationReport:
    tail_mass: float
    tail_ok: bool
    theta_probe: float
    theta_shift: float
    band_ok: bool
    passed: bool


def validate_truncation(
    params: ModelParams,
    space: StateSpace,
    probe_s: float = 0.05,
    tail_threshold: float = 1e-6,
    band_tolerance: float = 1e-6,
) -> TruncationReport:
    """Diagnose whether (n_max, m_max) are adequate for these parameters.

    Reports the steady-state mass in the top five Fock levels and the change
    in theta(probe_s) when the coherence band is widened by four.
    """
    # imported here: spectral depends on model for its types
    from . import liouvillian, spectral

    op0 = liouvillian.assemble(params, space, 0.0, liouvillian.CountingChannel.PHOTON_EMISSION)
    res0 = spectral.leading_eigenpair(op0)
    dist = spectral.number_distribution(res0)
    tail_mass = float(np.sum(dist.p[-5:]))
    tail_ok = tail_mass < tail_threshold

    op_probe = liouvillian.assemble(
        params, space, probe_s, liouvillian.CountingChannel.PHOTON_EMISSION
    )
    theta_probe = spectral.leading_eigenpair(op_probe).theta

    wide = build_basis(space.n_max, min(space.m_max + 4, space.n_max))
    op_wide = liouvillian.assemble(
        params, wide, probe_s, liouvillian.CountingChannel.PHOTON_EMISSION
    )
    theta_wide = spectral.leading_eigenpair(op_wide).theta
    theta_shift = abs(theta_wide - theta_probe)
    band_ok = theta_shift < band_tolerance

    return TruncationReport(
        tail_mass=tail_mass,
        tail_ok=tail_ok,
        theta_probe=theta_probe,
        theta_shift=theta_shift,
        band_ok=band_ok,
        passed=tail_ok and band_ok,
    )
