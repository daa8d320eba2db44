"""Assembly of the s-tilted Lindblad generator on the banded five-block basis.

The generator acts on density matrices written in the basis of SSET charge
states |0>, |1>, |2> and resonator Fock states.  Only the five charge blocks
(0,0), (1,1), (2,2), (0,2), (2,0) are kept; the remaining four decouple.  The
counted jump term (photon emission or quasiparticle decay) is multiplied by
exp(-s), which breaks trace preservation for s != 0 and turns the leading
eigenvalue into the scaled cumulant generating function of the jump count.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import ModelParams, StateSpace

S_GUARD = 5.0  # exp(-s) beyond |s| = 5 destabilizes the eigensolver

# Per-block constants, indexed by block 0..4 = (0,0),(1,1),(2,2),(0,2),(2,0):
# left/right charge weights of the coupling operator n1 + 2*n2, the
# commutator weight of delta_e, and the quasiparticle anticommutator factor.
_W_LEFT = np.array([0, 1, 2, 0, 2])
_W_RIGHT = np.array([0, 1, 2, 2, 0])
_DE_WEIGHT = np.array([0, 0, 0, -1, 1])
_QP_DECAY = np.array([0.0, -1.0, -1.0, -0.5, -0.5])

# Josephson couplings i*e_j/2 * sign between blocks, as
# (target_block, source_block, sign) triples.
_EJ_LINKS = (
    (0, 4, +1), (0, 3, -1),
    (2, 3, +1), (2, 4, -1),
    (3, 2, +1), (3, 0, -1),
    (4, 0, +1), (4, 2, -1),
)


class CountingChannel(enum.Enum):
    PHOTON_EMISSION = "photon"
    QUASIPARTICLE_DECAY = "quasiparticle"


@dataclass(frozen=True)
class SparseSuperoperator:
    """Tilted generator W_s as a CSR matrix over the banded basis."""

    matrix: sp.csr_matrix
    space: StateSpace
    channel: CountingChannel
    s: float
    params_hash: str

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _shifted_index(space: StateSpace, block, n, n_prime):
    """Flat indices of (block, n, n'), -1 where outside basis or band."""
    n_max = space.n_max
    ok = (n >= 0) & (n <= n_max) & (n_prime >= 0) & (n_prime <= n_max)
    ok &= np.abs(n - n_prime) <= space.m_max
    return np.where(
        ok, space.index_map[block, np.clip(n, 0, n_max), np.clip(n_prime, 0, n_max)], -1
    )


def assemble(
    params: ModelParams,
    space: StateSpace,
    s: float,
    channel: CountingChannel,
    counted_only: bool = False,
) -> SparseSuperoperator:
    """Build the tilted generator.

    With counted_only=True only the counted jump term (at unit tilt) is
    assembled; this is the perturbation whose expectation gives the activity.
    """
    if abs(s) > S_GUARD:
        raise ValueError(f"|s| <= {S_GUARD} required, got {s}")

    b, n, npr = space.block, space.n, space.n_prime
    dim = space.dim
    rows, cols, vals = [], [], []

    def add(target, source, value, mask):
        keep = mask & (source >= 0)
        rows.append(target[keep])
        cols.append(source[keep])
        vals.append(value[keep] if np.ndim(value) else np.full(keep.sum(), value))

    target = np.arange(dim)
    everywhere = np.ones(dim, bool)
    tilt_qp = np.exp(-s) if channel is CountingChannel.QUASIPARTICLE_DECAY else 1.0
    tilt_ph = np.exp(-s) if channel is CountingChannel.PHOTON_EMISSION else 1.0

    if not counted_only:
        # diagonal: free resonator rotation, detuning commutator, and the
        # anticommutator halves of both dissipators
        diag = (
            -1j * params.omega * (n - npr)
            - 1j * params.delta_e * _DE_WEIGHT[b]
            + _QP_DECAY[b]
            - params.gamma_ext / 2 * (n + npr)
        ).astype(complex)
        add(target, target, diag, everywhere)

        # position coupling -i*c1*[x (n1+2*n2), rho]; x acts as a ladder on
        # the left (weight w_left) and on the right (weight w_right)
        wl, wr = _W_LEFT[b].astype(float), _W_RIGHT[b].astype(float)
        add(target, _shifted_index(space, b, n - 1, npr),
            (-1j * params.c1 * wl * np.sqrt(n)).astype(complex), wl != 0)
        add(target, _shifted_index(space, b, n + 1, npr),
            (-1j * params.c1 * wl * np.sqrt(n + 1)).astype(complex), wl != 0)
        add(target, _shifted_index(space, b, n, npr - 1),
            (1j * params.c1 * wr * np.sqrt(npr)).astype(complex), wr != 0)
        add(target, _shifted_index(space, b, n, npr + 1),
            (1j * params.c1 * wr * np.sqrt(npr + 1)).astype(complex), wr != 0)

        # Josephson term couples blocks 00 <-> 02/20 <-> 22 at fixed (n, n')
        for b_target, b_source, sign in _EJ_LINKS:
            add(target, _shifted_index(space, np.full(dim, b_source), n, npr),
                np.full(dim, 1j * params.e_j / 2 * sign), b == b_target)

    count_qp = channel is CountingChannel.QUASIPARTICLE_DECAY
    count_ph = channel is CountingChannel.PHOTON_EMISSION
    if not counted_only or count_qp:
        # quasiparticle jumps feed rho_11 <- rho_22 and rho_00 <- rho_11
        weight = 1.0 if counted_only else tilt_qp
        add(target, _shifted_index(space, np.full(dim, 2), n, npr),
            np.full(dim, weight, complex), b == 1)
        add(target, _shifted_index(space, np.full(dim, 1), n, npr),
            np.full(dim, weight, complex), b == 0)
    if not counted_only or count_ph:
        # photon jump gamma_ext * a rho a^dag on every block
        weight = params.gamma_ext * (1.0 if counted_only else tilt_ph)
        add(target, _shifted_index(space, b, n + 1, npr + 1),
            (weight * np.sqrt((n + 1.0) * (npr + 1.0))).astype(complex), everywhere)

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsr()
    return SparseSuperoperator(
        matrix=matrix,
        space=space,
        channel=channel,
        s=s,
        params_hash=params.fingerprint() + space.fingerprint(),
    )


def apply(op: SparseSuperoperator, rho_vec: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product W_s @ rho_vec."""
    if rho_vec.shape[0] != op.dim:
        raise ValueError(f"vector length {rho_vec.shape[0]} != dim {op.dim}")
    return op.matrix @ rho_vec


def _full_operators(params: ModelParams, n_max: int):
    """Hamiltonian and jump operators on the full 3 x (n_max+1) Hilbert space."""
    fock = n_max + 1
    a_osc = np.diag(np.sqrt(np.arange(1, fock)), 1)
    id_osc = np.eye(fock)
    id_ch = np.eye(3)

    proj = [np.zeros((3, 3)) for _ in range(3)]
    for c in range(3):
        proj[c][c, c] = 1.0
    lower_21 = np.zeros((3, 3))
    lower_21[1, 2] = 1.0
    lower_10 = np.zeros((3, 3))
    lower_10[0, 1] = 1.0
    josephson = np.zeros((3, 3))
    josephson[0, 2] = josephson[2, 0] = 1.0

    x_op = a_osc + a_osc.T
    h = (
        params.delta_e * np.kron(proj[2], id_osc)
        - params.e_j / 2 * np.kron(josephson, id_osc)
        + params.omega * np.kron(id_ch, a_osc.T @ a_osc)
        + params.c1 * np.kron(proj[1] + 2 * proj[2], x_op)
    )
    jump_qp = [np.kron(lower_21, id_osc), np.kron(lower_10, id_osc)]  # rate Gamma = 1
    jump_ph = np.sqrt(params.gamma_ext) * np.kron(id_ch, a_osc)
    return h, jump_qp, jump_ph


def assemble_dense_reference(
    params: ModelParams, n_max: int, s: float, channel: CountingChannel
) -> np.ndarray:
    """Dense tilted generator over all nine charge blocks, no coherence band.

    Oracle for the banded builder; uses row-major vectorization, so
    A rho B -> kron(A, B.T).  Limited to small n_max.
    """
    if n_max > 12:
        raise ValueError("dense reference limited to n_max <= 12")
    h, jump_qp, jump_ph = _full_operators(params, n_max)
    dim = h.shape[0]
    eye = np.eye(dim)

    w = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    tilt_qp = np.exp(-s) if channel is CountingChannel.QUASIPARTICLE_DECAY else 1.0
    tilt_ph = np.exp(-s) if channel is CountingChannel.PHOTON_EMISSION else 1.0
    for jump, tilt in [(jump_qp[0], tilt_qp), (jump_qp[1], tilt_qp), (jump_ph, tilt_ph)]:
        jdj = jump.conj().T @ jump
        w += tilt * np.kron(jump, jump.conj())
        w -= 0.5 * (np.kron(jdj, eye) + np.kron(eye, jdj.T))
    return w
