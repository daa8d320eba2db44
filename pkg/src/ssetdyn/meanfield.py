"""Mean-field theory of the resonator amplitude.

The SSET charge responds to a harmonically oscillating resonator with a
coherence that is a Bessel-function series in the drive amplitude.  Feeding
that response back onto the resonator yields an amplitude-dependent
effective damping gamma_sset(n) (negative = pumping).  Limit cycles sit
where the SSET pumping balances the external loss, and a coherent-state
variational ansatz over an effective birth-death master equation extends the
theory to s != 0.

Reduced-unit dictionary used throughout (hbar = Gamma = 1):
    u = lam * A / x_s = sqrt(n * omega / pi)   amplitude coordinate
    z = 4 * lam * sqrt(pi * n / omega)         Bessel argument
    detuning shift: delta_e_eff = delta_e + 4*pi*lam^2*(x_fp/x_s)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import jv

from .model import ModelParams

BESSEL_MARGIN = 25  # truncation M = ceil(z) + margin keeps |J_M(z)| < 1e-12
ROOT_GRID = 2000
Z_SCAN_MAX = 40.0   # damping oscillations are negligible beyond this argument


@dataclass(frozen=True)
class DampingCurve:
    u: np.ndarray
    gamma_sset: np.ndarray
    params: ModelParams
    x_fp_ratio: float


@dataclass(frozen=True)
class LimitCycleSet:
    roots: tuple  # of (n, stable) pairs, ascending in n
    includes_fixed_point: bool

    def stable_attractors(self) -> list:
        """Occupations of all stable states, counting n = 0 when attracting."""
        out = [0.0] if self.includes_fixed_point else []
        out.extend(n for n, stable in self.roots if stable)
        return out


@dataclass(frozen=True)
class VariationalResult:
    theta_mf: float
    n_star: float
    candidates: tuple  # of (n, value) local maxima
    s: float


def fixed_point_displacement(params: ModelParams) -> float:
    """Static displacement ratio x_fp/x_s from the mean SSET charge.

    The three-level Bloch steady state gives <n1 + 2 n2> = 3 p22 with
    p22 = E_J^2 / (4 dE^2 + 3 E_J^2 + 1), and x_fp = -x_s <n1 + 2 n2>.
    """
    ej, de = params.e_j, params.delta_e
    return -3 * ej**2 / (4 * de**2 + 3 * ej**2 + 1)


def effective_detuning(params: ModelParams, x_fp_ratio: float) -> float:
    """Detuning shifted by the coupling to the displaced fixed point."""
    return params.delta_e + 4 * np.pi * params.lam**2 * x_fp_ratio


def psi_coefficients(params: ModelParams, x_fp_ratio: float, m_cap: int) -> np.ndarray:
    """Rotating-frame response coefficients psi^m for m = -m_cap..m_cap.

    psi^m = (-i E_J/2) / (i (omega m - detuning) + 1/2); the 1/2 is the
    real damping of the charge coherence at rate Gamma/2.
    """
    det = effective_detuning(params, x_fp_ratio)
    m = np.arange(-m_cap, m_cap + 1)
    return (-1j * params.e_j / 2) / (1j * (params.omega * m - det) + 0.5)


def _response_prefactor(omega: float) -> complex:
    return 2 / (1 + 1j * omega) + 1 / (1 + 1j * omega) ** 2


def n_from_u(params: ModelParams, u: float) -> float:
    return np.pi * u**2 / params.omega


def u_from_n(params: ModelParams, n: float) -> float:
    return np.sqrt(n * params.omega / np.pi)


def gamma_sset(params: ModelParams, n: float, x_fp_ratio: float | None = None) -> float:
    """Effective per-amplitude damping rate of the resonator at occupation n.

    Negative values mean the SSET pumps the resonator.  The n -> 0 limit is
    evaluated analytically from the linear term of the Bessel series.
    """
    if n < 0:
        raise ValueError("occupation n must be non-negative")
    if params.lam == 0 or params.e_j == 0:
        return 0.0
    if x_fp_ratio is None:
        x_fp_ratio = fixed_point_displacement(params)
    om, ej, lam = params.omega, params.e_j, params.lam
    prefactor = _response_prefactor(om)

    if n == 0:
        # beta ~ (z/4i) * (2 Re psi^0 - psi^1 - conj(psi^-1)) as z -> 0 and
        # z/u = 4 pi lam / omega, so the lam/u prefactor stays finite
        psi = psi_coefficients(params, x_fp_ratio, 1)
        linear = (1 / 4j) * (2 * psi[1].real - psi[2] - np.conj(psi[0]))
        return -om * ej * lam * (4 * np.pi * lam / om) * float(np.imag(prefactor * linear))

    u = u_from_n(params, n)
    z = 4 * lam * np.sqrt(np.pi * n / om)
    m_cap = int(np.ceil(z)) + BESSEL_MARGIN
    # the decay transition widens like z^(1/3); grow the margin until the
    # first dropped order is negligible
    while abs(jv(m_cap, z)) > 1e-12 and m_cap < np.ceil(z) + 8 * BESSEL_MARGIN:
        m_cap += 5
    if abs(jv(m_cap, z)) > 1e-12:
        warnings.warn(f"Bessel truncation M={m_cap} marginal at z={z}")
    psi_neg = psi_coefficients(params, x_fp_ratio, m_cap)[::-1]  # psi^{-m}
    m = np.arange(-m_cap, m_cap + 1)
    beta = (1 / 2j) * np.sum(
        (psi_neg * jv(m + 1, z) - np.conj(psi_neg) * jv(m - 1, z)) * jv(m, z)
    )
    return -om * ej * (lam / u) * float(np.imag(prefactor * beta))


def damping_curve(params: ModelParams, u_grid: np.ndarray) -> DampingCurve:
    x_fp = fixed_point_displacement(params)
    gamma = np.array([gamma_sset(params, n_from_u(params, u), x_fp) for u in u_grid])
    return DampingCurve(u=u_grid, gamma_sset=gamma, params=params, x_fp_ratio=x_fp)


def _scan_u_max(params: ModelParams) -> float:
    """Upper end of the root scan: last sign change of the damping, +20%."""
    if params.lam == 0:
        return 1.0
    z_to_u = params.omega / (4 * np.pi * params.lam)
    u_cap = Z_SCAN_MAX * z_to_u
    x_fp = fixed_point_displacement(params)
    u = np.linspace(u_cap / 400, u_cap, 400)
    g = np.array([gamma_sset(params, n_from_u(params, uu), x_fp) for uu in u])
    signs = np.sign(g)
    flips = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    last = u[flips[-1] + 1] if len(flips) else u_cap / 4
    return 1.2 * last


def limit_cycles(params: ModelParams) -> LimitCycleSet:
    """All amplitude steady states: n > 0 roots of gamma_ext + gamma_sset(n).

    Stability follows the slope of the total per-amplitude damping force
    (gamma_ext + gamma_sset(n(A))) * A: positive slope at the root restores
    perturbations.  n = 0 is an attractor when the net damping at vanishing
    amplitude is positive.
    """
    x_fp = fixed_point_displacement(params)

    def total(u):
        return params.gamma_ext + gamma_sset(params, n_from_u(params, u), x_fp)

    u_max = _scan_u_max(params)
    u = np.linspace(0.0, u_max, ROOT_GRID)
    f = np.array([total(uu) for uu in u])
    roots = []
    for i in np.nonzero(f[:-1] * f[1:] < 0)[0]:
        u_root = brentq(total, u[i], u[i + 1], xtol=1e-12)
        # force slope d[(total) * A]/dA ~ d[total(u) * u]/du at the root;
        # total = 0 there, so the sign is that of total'(u)
        stable = f[i + 1] > f[i]
        roots.append((n_from_u(params, u_root), bool(stable)))
    roots.sort()
    return LimitCycleSet(
        roots=tuple(roots),
        includes_fixed_point=bool(total(1e-9) > 0),
    )


def pumping_rate(params: ModelParams, n: float, x_fp_ratio: float | None = None) -> float:
    """Clamped gain g(n) = max(-gamma_sset(n), 0) of the effective model."""
    return max(-gamma_sset(params, n, x_fp_ratio), 0.0)


def trial_rate(n: float, s: float, g_n: float, gamma_ext: float) -> float:
    """Coherent-state value of the effective tilted generator at occupation n."""
    return (
        2 * np.exp(-s / 2) * np.sqrt(n * (n + 1) * gamma_ext * g_n)
        - gamma_ext * n
        - g_n * (n + 1)
    )


def trial_rate_square_form(n: float, s: float, g_n: float, gamma_ext: float) -> float:
    """Algebraically identical completed-square form of trial_rate."""
    cross = np.sqrt(n * (n + 1) * gamma_ext * g_n)
    return -((np.sqrt(gamma_ext * n) - np.sqrt(g_n * (n + 1))) ** 2) + 2 * (
        np.exp(-s / 2) - 1
    ) * cross


def variational_theta(
    params: ModelParams, s: float, grid_points: int = 2000
) -> VariationalResult:
    """Mean-field theta(s): maximum of the coherent-state trial rate over n."""
    x_fp = fixed_point_displacement(params)

    def value(n):
        return trial_rate(n, s, pumping_rate(params, n, x_fp), params.gamma_ext)

    n_cap = max(n_from_u(params, _scan_u_max(params)), 1.0)
    grid = np.linspace(0.0, n_cap, grid_points)
    vals = np.array([value(n) for n in grid])

    candidates = []
    interior = np.nonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:]))[0] + 1
    brackets = [(grid[i - 1], grid[i + 1]) for i in interior]
    if vals[0] >= vals[1]:
        brackets.append((grid[0], grid[1]))
    if vals[-1] >= vals[-2]:
        brackets.append((grid[-2], grid[-1]))
    for lo, hi in brackets:
        opt = minimize_scalar(lambda n: -value(n), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        candidates.append((float(opt.x), float(-opt.fun)))
    candidates.sort()
    # ties between equal-height maxima break toward smaller n
    best_n, best_v = min(candidates, key=lambda c: (-c[1], c[0]))
    return VariationalResult(theta_mf=best_v, n_star=best_n, candidates=tuple(candidates), s=s)


def branch_selection(params: ModelParams, cycles: LimitCycleSet, ds: float) -> float:
    """Stable cycle selected by an infinitesimal tilt: smallest n for ds > 0,
    largest for ds < 0."""
    if ds == 0:
        raise ValueError("ds must be non-zero")
    stable = [n for n, ok in cycles.roots if ok]
    if not stable:
        raise ValueError("no stable cycles to select between")
    return min(stable) if ds > 0 else max(stable)
