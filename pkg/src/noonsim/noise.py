"""Markovian decoherence channels applied between protocol steps.

Each subsystem gets an independent Lindblad semigroup: qubits damp
(|1>->|0> at 1/T1, |2>->|1> at 2/T1) and dephase uniformly so that every
off-diagonal element carries the full 1/T2 coherence decay, cavities lose
photons at a configurable rate.  Channels act on density matrices; pure
states are promoted internally by the fidelity helper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .hilbert import QuantumState, fidelity_with_pure, lowering_operator
from .model import SystemParams
from .protocol import (
    PulseSchedule,
    apply_event,
    noon_schedule,
    noon_target_state,
    reported_noon_phase,
    simulate,
)

CAVITY_LABELS = ("C1", "C2", "CC")


class NoiseError(ValueError):
    """Raised for unphysical noise parameters."""


@dataclass(frozen=True)
class NoiseParams:
    """Decoherence timescales: qubit T1/T2 in ns, cavity photon-loss rate in 1/ns."""

    t1: float = math.inf
    t2: float = math.inf
    cavity_loss: float = 0.0

    def __post_init__(self):
        if self.t1 <= 0 or self.t2 <= 0 or self.cavity_loss < 0:
            raise NoiseError("noise timescales must be positive, rates nonnegative")
        if math.isfinite(self.t1) and math.isfinite(self.t2) and self.t2 > 2.0 * self.t1:
            raise NoiseError("T2 cannot exceed 2*T1")

    @property
    def enabled(self) -> bool:
        return math.isfinite(self.t1) or math.isfinite(self.t2) or self.cavity_loss > 0


def _dissipator(L: np.ndarray) -> np.ndarray:
    """Superoperator of D[L] in column-stacking convention."""
    d = L.shape[0]
    eye = np.eye(d)
    LdL = L.conj().T @ L
    return (np.kron(L.conj(), L)
            - 0.5 * np.kron(eye, LdL)
            - 0.5 * np.kron(LdL.T, eye))


def qubit_generator(params: NoiseParams) -> np.ndarray:
    """Lindblad generator of the three-level qubit channel (9x9 superoperator)."""
    d = 3
    G = np.zeros((d * d, d * d), dtype=complex)
    if math.isfinite(params.t1):
        gamma = 1.0 / params.t1
        L10 = np.zeros((d, d)); L10[0, 1] = 1.0
        L21 = np.zeros((d, d)); L21[1, 2] = 1.0
        G += gamma * _dissipator(L10)
        G += 2.0 * gamma * _dissipator(L21)
    # uniform dephasing: every off-diagonal pair decays at the same extra
    # rate, chosen so the total 0-1 coherence decay is exactly 1/T2
    gphi = 0.0
    if math.isfinite(params.t2):
        gphi = 1.0 / params.t2
        if math.isfinite(params.t1):
            gphi -= 0.5 / params.t1
    if gphi > 0:
        pinch = np.zeros((d * d, d * d))
        for k in range(d):
            pinch[k * d + k, k * d + k] = 1.0
        G += gphi * (pinch - np.eye(d * d))
    return G


def cavity_generator(dim: int, rate: float) -> np.ndarray:
    """Photon-loss generator for one cavity mode."""
    G = np.zeros((dim * dim, dim * dim), dtype=complex)
    if rate > 0:
        G += rate * _dissipator(lowering_operator(dim))
    return G


def _factor_channels(layout, params: NoiseParams, dt: float) -> list[np.ndarray]:
    chans = []
    for lab, dim in layout.factors:
        if lab in CAVITY_LABELS:
            G = cavity_generator(dim, params.cavity_loss)
        else:
            G = qubit_generator(params)
        chans.append(expm(G * dt))
    return chans


def apply_channel(state: QuantumState, dt: float, params: NoiseParams) -> QuantumState:
    """Evolve a density matrix under the local decoherence channels for time dt."""
    if dt < 0:
        raise NoiseError("channel duration must be nonnegative")
    if state.is_vector:
        raise NoiseError("apply_channel requires a density matrix; use state.to_matrix()")
    if dt == 0.0 or not params.enabled:
        return state
    layout = state.layout
    dims = layout.dims
    k = len(dims)
    arr = state.data.reshape(dims + dims)
    for ax, chan in enumerate(_factor_channels(layout, params, dt)):
        d = dims[ax]
        # column-stacking superoperator: vec index is col*d + row, so the
        # reshaped tensor reads [col', row', col, row]
        S = chan.reshape(d, d, d, d)
        in_idx = (list(range(4, 4 + ax)) + [3] + list(range(5 + ax, 4 + k)) +
                  list(range(4 + k, 4 + k + ax)) + [2] + list(range(5 + k + ax, 4 + 2 * k)))
        out_idx = (list(range(4, 4 + ax)) + [1] + list(range(5 + ax, 4 + k)) +
                   list(range(4 + k, 4 + k + ax)) + [0] + list(range(5 + k + ax, 4 + 2 * k)))
        arr = np.einsum(S, [0, 1, 2, 3], arr, in_idx, out_idx)
    D = layout.dim
    return QuantumState(layout, arr.reshape(D, D), validate=False)


def decohered_fidelity(N: int, params: SystemParams, noise: NoiseParams,
                       variant: str = "sequential") -> float:
    """Fidelity of the noisy preparation with the two-cavity target state.

    Runs the exact-unitary backend event by event on a density matrix,
    applying the decoherence channel after each event for its duration
    (events that overlap in time are decohered once per elapsed interval).
    """
    schedule = noon_schedule(N, params, variant=variant)
    layout = params.layout()
    # reported phase from a noiseless run fixes the target's phase convention
    pure = simulate(schedule, "ideal", params)
    phi = reported_noon_phase(pure, N)
    target = noon_target_state(layout, N, phi)

    vec = np.zeros(layout.dim, dtype=complex)
    vec[0] = 1.0
    state = QuantumState(layout, vec, validate=False).to_matrix()
    t_done = 0.0
    for ev in sorted(schedule.events, key=lambda e: e.start):
        state = apply_event(state, ev, params)
        t_end = ev.start + ev.duration
        if t_end > t_done:
            state = apply_channel(state, t_end - t_done, noise)
            t_done = t_end
    return float(fidelity_with_pure(state, target))
