"""Quantum-jump (waiting-time) sampling of the physical s = 0 dynamics.

A pure state on the 3 x (n_max+1) SSET-resonator Hilbert space evolves under
the non-Hermitian effective Hamiltonian

    H_eff = H - (i/2) (gamma_ext a^dag a + |1><1| + |2><2|)

(quasiparticle rate Gamma = 1).  Jumps fire when the decaying squared norm
crosses a pre-drawn uniform threshold; the crossing time is located exactly
because the segment propagator is applied through the eigendecomposition of
H_eff rather than by timestepping.  The jump channel is drawn proportionally
to the instantaneous rates.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .liouvillian import _full_operators
from .model import ModelParams

PHOTON = "photon"
QP_21 = "qp_2to1"
QP_10 = "qp_1to0"

OVERFLOW_THRESHOLD = 1e-6
NORM_TOL = 1e-10
ESS_FLOOR = 10.0


class BasisOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class TrajectoryRecord:
    seed: int
    index: int
    t_max: float
    photon_jumps: np.ndarray           # sorted times
    qp_jumps: tuple                    # of (time, channel) sorted by time
    params_hash: str

    def counts(self, channel: str, burn_in: float = 0.0) -> int:
        if channel == PHOTON:
            return int(np.sum(self.photon_jumps > burn_in))
        return sum(1 for t, c in self.qp_jumps if t > burn_in)


@dataclass(frozen=True)
class CountingStats:
    k_hat: float
    k_stderr: float
    variance_rate: float
    fano: float
    s_grid: np.ndarray
    theta_hat: np.ndarray       # NaN where masked
    theta_stderr: np.ndarray
    ess: np.ndarray
    mask: np.ndarray            # True where reliable
    window: float


class _Propagator:
    """Eigendecomposition of H_eff for exact segment evolution."""

    def __init__(self, params: ModelParams, n_max: int):
        h, jump_qp, jump_ph = _full_operators(params, n_max)
        decay = jump_ph.conj().T @ jump_ph
        for j in jump_qp:
            decay = decay + j.conj().T @ j
        h_eff = h - 0.5j * decay
        self.eigvals, self.modes = np.linalg.eig(h_eff)
        self.modes_inv = np.linalg.inv(self.modes)
        self.n_max = n_max
        self.dim = h.shape[0]
        fock = n_max + 1
        self.number = np.tile(np.arange(fock), 3).astype(float)
        charge = np.repeat(np.arange(3), fock)
        self.proj1 = (charge == 1).astype(float)
        self.proj2 = (charge == 2).astype(float)
        self.top_level = np.zeros(self.dim)
        self.top_level[np.arange(3) * fock + n_max] = 1.0
        self.gamma_ext = params.gamma_ext
        # jump actions in the state basis
        a_low = np.zeros((fock, fock))
        a_low[np.arange(fock - 1), np.arange(1, fock)] = np.sqrt(np.arange(1, fock))
        self.a_full = np.kron(np.eye(3), a_low)

    def state_coeffs(self, psi: np.ndarray) -> np.ndarray:
        return self.modes_inv @ psi

    def evolve(self, coeffs: np.ndarray, tau: float) -> np.ndarray:
        return self.modes @ (np.exp(-1j * self.eigvals * tau) * coeffs)

    def rates(self, psi: np.ndarray) -> tuple[float, float, float]:
        """Instantaneous (photon, 2->1, 1->0) jump rates of a unit-norm state."""
        density = np.abs(psi) ** 2
        return (
            self.gamma_ext * float(density @ self.number),
            float(density @ self.proj2),
            float(density @ self.proj1),
        )


def _next_jump(prop: _Propagator, psi: np.ndarray, threshold: float) -> tuple[float, np.ndarray]:
    """Time and state at which the squared norm decays to the threshold."""
    coeffs = prop.state_coeffs(psi)
    log_target = np.log(threshold)

    def log_norm2(tau):
        state = prop.evolve(coeffs, tau)
        norm2 = float(np.vdot(state, state).real)
        # norm2 underflows to 0 far beyond the crossing; -inf steers the
        # bracket back without raising
        return (np.log(norm2) if norm2 > 0 else -np.inf), state, norm2

    # initial scale from the instantaneous rate; dark states (e.g. the
    # vacuum) have zero rate and only pick one up through E_J mixing, so fall
    # back to an O(1) time and rely on bracket growth
    rate0 = sum(prop.rates(psi))
    tau = -log_target / rate0 if rate0 > 1e-9 else 1.0
    lo, hi = 0.0, None
    best = (np.inf, tau, None, 0.0)  # |err|, tau, state, norm2
    for it in range(400):
        f, state, norm2 = log_norm2(tau)
        err = f - log_target
        if abs(err) < NORM_TOL:
            return tau, state / np.sqrt(norm2)
        if norm2 > 0 and abs(err) < best[0]:
            best = (abs(err), tau, state, norm2)
        if err > 0:
            lo = tau
        else:
            hi = tau
        if hi is None:
            tau = 2 * tau
            continue
        if hi - lo <= 1e-12 * hi:
            # the bracket has collapsed to floating-point resolution; the
            # evaluation noise of the non-normal eigenbasis can sit above
            # NORM_TOL, so accept the best bracketed point instead
            break
        # alternate Newton with plain bisection: a Newton step from either
        # end can land just inside the opposite end and ping-pong without
        # contracting the bracket, so every other step halves it outright
        tau_new = (lo + hi) / 2
        if it % 2 == 0 and np.isfinite(err) and norm2 > 0:
            rate = sum(prop.rates(state / np.sqrt(norm2)))
            newton = tau + err / max(rate, 1e-12)
            if lo < newton < hi:
                tau_new = newton
        tau = tau_new
    if best[2] is not None and best[0] < 1e-6:
        _, tau, state, norm2 = best
        return tau, state / np.sqrt(norm2)
    raise RuntimeError("norm-threshold search did not converge")


def sample_trajectory(
    params: ModelParams, n_max: int, t_max: float, seed: int, index: int = 0
) -> TrajectoryRecord:
    """One quantum-jump trajectory from vacuum x charge |0>.

    Deterministic for fixed (seed, index); the counter-based generator makes
    ensembles independent of sampling order.
    """
    import warnings

    if t_max < 100 / params.gamma_ext:
        warnings.warn("t_max below 100/gamma_ext gives weak statistics")
    rng = np.random.Generator(
        np.random.Philox(key=np.array([seed, index], dtype=np.uint64))
    )
    prop = _Propagator(params, n_max)

    psi = np.zeros(prop.dim, complex)
    psi[0] = 1.0
    t = 0.0
    photon_times = []
    qp_jumps = []
    while t < t_max:
        tau, psi = _next_jump(prop, psi, rng.random())
        t += tau
        if t >= t_max:
            break
        if float(np.sum(np.abs(psi) ** 2 * prop.top_level)) > OVERFLOW_THRESHOLD:
            raise BasisOverflow(
                f"population at n_max={prop.n_max} exceeded {OVERFLOW_THRESHOLD} at t={t:.1f}"
            )
        r_ph, r_21, r_10 = prop.rates(psi)
        total = r_ph + r_21 + r_10
        draw = rng.random() * total
        if draw < r_ph:
            psi = prop.a_full @ psi
            photon_times.append(t)
        elif draw < r_ph + r_21:
            # |2> -> |1>: move the charge-2 amplitude block to charge 1
            fock = prop.n_max + 1
            new = np.zeros_like(psi)
            new[fock:2 * fock] = psi[2 * fock:]
            psi = new
            qp_jumps.append((t, QP_21))
        else:
            fock = prop.n_max + 1
            new = np.zeros_like(psi)
            new[:fock] = psi[fock:2 * fock]
            psi = new
            qp_jumps.append((t, QP_10))
        psi = psi / np.linalg.norm(psi)
    return TrajectoryRecord(
        seed=seed,
        index=index,
        t_max=t_max,
        photon_jumps=np.array(photon_times),
        qp_jumps=tuple(qp_jumps),
        params_hash=params.fingerprint(),
    )


def _sample_worker(args):
    params, n_max, t_max, seed, index = args
    return sample_trajectory(params, n_max, t_max, seed, index)


def sample_ensemble(
    params: ModelParams,
    n_max: int,
    t_max: float,
    n_traj: int,
    seed: int,
    workers: int | None = None,
) -> list[TrajectoryRecord]:
    """Independent trajectories indexed 0..n_traj-1 under one master seed."""
    if workers is None:
        workers = int(os.environ.get("SSETDYN_WORKERS", "1"))
    jobs = [(params, n_max, t_max, seed, i) for i in range(n_traj)]
    if workers <= 1:
        return [_sample_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sample_worker, jobs))


def counting_statistics(
    records: list[TrajectoryRecord],
    channel: str,
    burn_in: float,
    s_grid: np.ndarray | None = None,
) -> CountingStats:
    """Empirical activity and generating function over an ensemble.

    theta_hat(s) = (1/T) ln< exp(-s K) > with jackknife error bands; grid
    points whose effective sample size drops below 10 are masked.
    """
    if len(records) < 10:
        raise ValueError("at least 10 trajectory records required")
    t_max = records[0].t_max
    if not burn_in < t_max / 2:
        raise ValueError("burn_in must be below t_max/2")
    window = t_max - burn_in
    counts = np.array([r.counts(channel, burn_in) for r in records], dtype=float)
    n = len(counts)

    k_hat = counts.mean() / window
    k_stderr = counts.std(ddof=1) / np.sqrt(n) / window
    variance_rate = counts.var(ddof=1) / window
    fano = variance_rate / k_hat if k_hat > 0 else float("nan")

    if s_grid is None:
        s_grid = np.linspace(-0.05, 0.05, 21)
    s_grid = np.asarray(s_grid, float)
    theta = np.full(s_grid.shape, np.nan)
    stderr = np.full(s_grid.shape, np.nan)
    ess = np.zeros(s_grid.shape)
    mask = np.zeros(s_grid.shape, bool)
    for i, s in enumerate(s_grid):
        logw = -s * counts
        log_mean = logsumexp(logw) - np.log(n)
        ess[i] = float(np.exp(2 * logsumexp(logw) - logsumexp(2 * logw)))
        if ess[i] < ESS_FLOOR and s != 0.0:
            continue
        mask[i] = True
        theta[i] = log_mean / window
        # jackknife over leave-one-out generating functions
        loo = np.empty(n)
        for j in range(n):
            keep = np.concatenate([logw[:j], logw[j + 1:]])
            loo[j] = (logsumexp(keep) - np.log(n - 1)) / window
        stderr[i] = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return CountingStats(
        k_hat=float(k_hat),
        k_stderr=float(k_stderr),
        variance_rate=float(variance_rate),
        fano=float(fano),
        s_grid=s_grid,
        theta_hat=theta,
        theta_stderr=stderr,
        ess=ess,
        mask=mask,
        window=window,
    )


@dataclass(frozen=True)
class LegendreReport:
    convex_ok: bool
    max_deviation: float
    checked_points: int


def legendre_check(
    stats: CountingStats,
    records: list[TrajectoryRecord],
    channel: str,
    burn_in: float,
    bins: int = 30,
) -> LegendreReport:
    """Consistency of theta_hat with the histogrammed rate function.

    The empirical rate function phi(k) = -(1/T) ln P(K = kT) (shifted so its
    minimum is zero) must reproduce theta_hat through
    theta(s) = -min_k [phi(k) + k s].
    """
    window = stats.window
    counts = np.array([r.counts(channel, burn_in) for r in records], dtype=float)
    hist, edges = np.histogram(counts, bins=bins)
    centers = (edges[:-1] + edges[1:]) / 2 / window
    occupied = hist > 0
    phi = -np.log(hist[occupied] / hist.sum()) / window
    phi = phi - phi.min()
    k_vals = centers[occupied]

    good = stats.mask & ~np.isnan(stats.theta_hat)
    theta_emp = stats.theta_hat[good]
    s_vals = stats.s_grid[good]
    theta_legendre = np.array([-np.min(phi + k_vals * s) for s in s_vals])
    max_dev = float(np.max(np.abs(theta_legendre - theta_emp))) if len(s_vals) else float("nan")

    second_diff = np.diff(theta_emp, 2) if len(theta_emp) >= 3 else np.array([])
    convex_ok = bool(np.all(second_diff > -1e-9)) if len(second_diff) else True
    return LegendreReport(convex_ok=convex_ok, max_deviation=max_dev,
                          checked_points=int(len(s_vals)))


def export_records(records: list[TrajectoryRecord], path: str) -> None:
    """One ensemble per file: `channel,time` lines sorted by time."""
    events = []
    for r in records:
        events.extend((t, PHOTON) for t in r.photon_jumps)
        events.extend((t, c) for t, c in r.qp_jumps)
    events.sort()
    with open(path, "w") as fh:
        fh.write(f"# params_hash={records[0].params_hash} seed={records[0].seed} "
                 f"n_traj={len(records)} t_max={records[0].t_max}\n")
        for t, channel in events:
            fh.write(f"{channel},{t:.9f}\n")


def load_records_header(path: str) -> dict:
    with open(path) as fh:
        header = fh.readline().lstrip("# ").split()
    return dict(item.split("=") for item in header)
