"""System parameters and Hamiltonian construction.

Units: angular frequencies in rad/ns (configuration files use GHz*2pi),
times in ns, hbar = 1.  Qubits are three-level systems; level energies
E1 (|1>) and E2 (|2>), with the anharmonicity convention E1 = p*E2 for
fixed p < 2.  Couplings follow the excitation-conserving (RWA) form
(g1 |1><0| + g2 |2><1|) a + h.c.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .hilbert import (
    CAVITY_LABELS,
    HermitianOperator,
    HilbertLayout,
    LayoutError,
    lowering_operator,
    number_operator,
)

TWO_PI = 2.0 * math.pi
RWA_RATIO_WARN = 0.05


class ConfigError(ValueError):
    """Raised for invalid physical parameters or malformed config files."""


@dataclass(frozen=True)
class QubitParams:
    """Three-level qubit: energies of |1> and |2>, drive ladder ratio."""

    E1: float
    E2: float
    lam: float = math.sqrt(2.0)

    def __post_init__(self):
        if not (self.E2 > self.E1 > 0):
            raise ConfigError("qubit energies must satisfy E2 > E1 > 0")
        if self.p >= 2:
            raise ConfigError("anharmonicity ratio p = E1/E2 must be < 2")
        if self.lam <= 0:
            raise ConfigError("ladder ratio lambda must be positive")

    @property
    def p(self) -> float:
        return self.E1 / self.E2


@dataclass(frozen=True)
class CavityParams:
    omega: float
    truncation: int

    def __post_init__(self):
        if self.omega <= 0:
            raise ConfigError("cavity frequency must be positive")
        if self.truncation < 2:
            raise ConfigError("cavity truncation must be >= 2")


@dataclass(frozen=True)
class CouplingParams:
    """Qubit-cavity coupling rates for the 0-1 and 1-2 transitions."""

    g1: float
    g2: float | None = None

    def __post_init__(self):
        if self.g1 <= 0:
            raise ConfigError("coupling g1 must be positive")

    def g2_or_default(self, lam: float) -> float:
        return self.g2 if self.g2 is not None else lam * self.g1


@dataclass(frozen=True)
class SystemParams:
    """All physical constants of the two-qubit/three-cavity circuit."""

    qubits: tuple[QubitParams, QubitParams]
    cavities: dict[str, CavityParams]
    couplings: dict[tuple[int, str], CouplingParams]
    rabi_amplitude: float
    t_rabi: float
    t2: float
    drive_frequency: float = 0.0

    def __post_init__(self):
        if set(self.cavities) - set(CAVITY_LABELS):
            raise ConfigError(f"cavity labels must be among {CAVITY_LABELS}")
        for (i, j), cp in self.couplings.items():
            if i not in (1, 2):
                raise ConfigError(f"coupling references unknown qubit {i}")
            if j not in self.cavities:
                raise ConfigError(f"coupling references unknown cavity {j!r}")
            q = self.qubits[i - 1]
            w = self.cavities[j].omega
            g2 = cp.g2_or_default(q.lam)
            for g in (cp.g1, g2):
                if g / w > RWA_RATIO_WARN or g / q.E1 > RWA_RATIO_WARN:
                    warnings.warn(
                        f"coupling g={g:.4g} is more than {RWA_RATIO_WARN:.0%} of the "
                        f"qubit/cavity frequency for (Q{i},{j}); RWA accuracy degrades",
                        stacklevel=2,
                    )
        for name, val in (("rabi_amplitude", self.rabi_amplitude), ("t_rabi", self.t_rabi), ("t2", self.t2)):
            if val <= 0:
                raise ConfigError(f"{name} must be positive")

    def layout(self) -> HilbertLayout:
        factors = [("Q1", 3), ("Q2", 3)]
        for lab in ("C1", "C2", "CC"):
            if lab in self.cavities:
                factors.append((lab, self.cavities[lab].truncation))
        return HilbertLayout(tuple(factors))

    def coupling(self, i: int, j: str) -> CouplingParams:
        try:
            return self.couplings[(i, j)]
        except KeyError:
            raise ConfigError(f"no declared coupling between Q{i} and {j}") from None

    def g1(self, i: int, j: str) -> float:
        return self.coupling(i, j).g1

    def g2(self, i: int, j: str) -> float:
        return self.coupling(i, j).g2_or_default(self.qubits[i - 1].lam)

    def detuning(self, i: int, j: str, k: int, E1_override: float | None = None) -> float:
        """Delta^(k)_{ij} = E_k - E_{k-1} - omega_j for the current bias point.

        When the qubit is retuned (E1_override), E2 follows the fixed
        ratio p so that E1 = p*E2 continues to hold.
        """
        q = self.qubits[i - 1]
        E1 = q.E1 if E1_override is None else E1_override
        E2 = E1 / q.p
        w = self.cavities[j].omega
        if k == 1:
            return E1 - w
        if k == 2:
            return E2 - E1 - w
        raise ConfigError(f"transition index k must be 1 or 2, got {k}")


def _embed(layout: HilbertLayout, ops: dict[str, np.ndarray]) -> np.ndarray:
    """Kronecker-embed per-factor matrices (identity on unnamed factors)."""
    mat = np.array([[1.0 + 0j]])
    for label, dim in layout.factors:
        mat = np.kron(mat, ops.get(label, np.eye(dim, dtype=complex)))
    return mat


def qubit_level_projector(level: int) -> np.ndarray:
    P = np.zeros((3, 3), dtype=complex)
    P[level, level] = 1.0
    return P


def qubit_raising(transition: tuple[int, int]) -> np.ndarray:
    """|b><a| for the qubit transition a->b."""
    a, b = transition
    M = np.zeros((3, 3), dtype=complex)
    M[b, a] = 1.0
    return M


def _require_factors(layout: HilbertLayout, labels) -> None:
    missing = [lab for lab in labels if lab not in layout.labels]
    if missing:
        raise LayoutError(f"layout is missing factors {missing}")


def coupling_term(params: SystemParams, i: int, j: str, layout: HilbertLayout,
                  phase1: complex = 1.0, phase2: complex = 1.0) -> np.ndarray:
    """One qubit-cavity coupling, with optional phases on the two rungs.

    Returns (g1*phase1 |1><0| + g2*phase2 |2><1|) a_j + h.c. embedded in
    the full space.
    """
    _require_factors(layout, (f"Q{i}", j))
    g1 = params.g1(i, j)
    g2 = params.g2(i, j)
    qop = g1 * phase1 * qubit_raising((0, 1)) + g2 * phase2 * qubit_raising((1, 2))
    half = _embed(layout, {f"Q{i}": qop, j: lowering_operator(layout.dim_of(j))})
    return half + half.conj().T


def build_drift(params: SystemParams, layout: HilbertLayout) -> HermitianOperator:
    """Static Hamiltonian: qubit levels, cavity photons, all couplings."""
    _require_factors(layout, ("Q1", "Q2"))
    H = np.zeros((layout.dim, layout.dim), dtype=complex)
    for i, q in enumerate(params.qubits, start=1):
        H += _embed(layout, {f"Q{i}": q.E1 * qubit_level_projector(1) + q.E2 * qubit_level_projector(2)})
    for lab, cav in params.cavities.items():
        if lab in layout.labels:
            H += cav.omega * _embed(layout, {lab: number_operator(layout.dim_of(lab))})
    for (i, j) in params.couplings:
        if j in layout.labels:
            H += coupling_term(params, i, j, layout)
    return HermitianOperator(layout, H)


def interaction_coupling(params: SystemParams, i: int, j: str, t: float,
                         layout: HilbertLayout | None = None,
                         E1_override: float | None = None) -> HermitianOperator:
    """Interaction-frame coupling with phases e^{i Delta^(k) t}.

    At t = 0 (or zero detunings) this reduces to the lab-frame coupling.
    """
    if layout is None:
        layout = params.layout()
    d1 = params.detuning(i, j, 1, E1_override)
    d2 = params.detuning(i, j, 2, E1_override)
    mat = coupling_term(params, i, j, layout,
                        phase1=np.exp(1j * d1 * t), phase2=np.exp(1j * d2 * t))
    return HermitianOperator(layout, mat)


def resonant_jc(params: SystemParams, i: int, j: str, layout: HilbertLayout | None = None,
                phase: float = 0.0) -> HermitianOperator:
    """Resonant two-level JC exchange g1 (e^{i phase}|1><0| a + h.c.).

    Acts only on qubit levels {0,1}; the |2> row and column are zero, so
    shelved amplitude is exactly invariant.
    """
    if layout is None:
        layout = params.layout()
    _require_factors(layout, (f"Q{i}", j))
    g1 = params.g1(i, j)
    qop = g1 * np.exp(1j * phase) * qubit_raising((0, 1))
    half = _embed(layout, {f"Q{i}": qop, j: lowering_operator(layout.dim_of(j))})
    return HermitianOperator(layout, half + half.conj().T)


def drive_term(amplitude: float, lam: float, target: int,
               layout: HilbertLayout) -> HermitianOperator:
    """Three-level drive (amplitude/2)(|0><1| + lambda |1><2| + h.c.)."""
    _require_factors(layout, (f"Q{target}",))
    qop = (amplitude / 2.0) * (qubit_raising((1, 0)) + lam * qubit_raising((2, 1)))
    half = _embed(layout, {f"Q{target}": qop})
    return HermitianOperator(layout, half + half.conj().T)


def excitation_number(layout: HilbertLayout) -> HermitianOperator:
    """Total excitation count: qubit level index plus photon numbers."""
    H = np.zeros((layout.dim, layout.dim), dtype=complex)
    for label, dim in layout.factors:
        H += _embed(layout, {label: number_operator(dim)})
    return HermitianOperator(layout, H)


# --- configuration files ------------------------------------------------
#
# JSON schema (rates in GHz*2pi, times in ns):
# {
#   "qubits":    [{"E1_ghz": 6.5, "E2_ghz": 12.82, "lambda": 1.414}, {...}],
#   "cavities":  {"C1": {"omega_ghz": 6.0, "truncation": 8}, ...},
#   "couplings": {"Q1-C1": {"g1_ghz": 0.00796}, "Q1-CC": {...}, ...},
#   "rabi_amplitude_ghz": 0.05, "t_rabi_ns": 10.0, "t2_ns": 200.0,
#   "drive_frequency_ghz": 6.5,
#   "noise": { ... optional, see noise.py ... }
# }


def system_from_dict(cfg: dict) -> SystemParams:
    try:
        qubits = tuple(
            QubitParams(E1=TWO_PI * q["E1_ghz"], E2=TWO_PI * q["E2_ghz"],
                        lam=q.get("lambda", math.sqrt(2.0)))
            for q in cfg["qubits"]
        )
        if len(qubits) != 2:
            raise ConfigError("exactly two qubits required")
        cavities = {
            lab: CavityParams(omega=TWO_PI * c["omega_ghz"], truncation=int(c["truncation"]))
            for lab, c in cfg["cavities"].items()
        }
        couplings = {}
        for key, c in cfg["couplings"].items():
            qlab, cavlab = key.split("-")
            g2 = c.get("g2_ghz")
            couplings[(int(qlab[1]), cavlab)] = CouplingParams(
                g1=TWO_PI * c["g1_ghz"], g2=TWO_PI * g2 if g2 is not None else None)
        return SystemParams(
            qubits=qubits,
            cavities=cavities,
            couplings=couplings,
            rabi_amplitude=TWO_PI * cfg["rabi_amplitude_ghz"],
            t_rabi=cfg["t_rabi_ns"],
            t2=cfg["t2_ns"],
            drive_frequency=TWO_PI * cfg.get("drive_frequency_ghz", 0.0),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed system configuration: {exc}") from exc


def load_system(path) -> SystemParams:
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def default_system(N: int, delta2_over_g: float = 40.0, g_inv_ns: float = 20.0,
                   t_rabi: float = 10.0, t2: float = 200.0,
                   buffer_levels: int = 2) -> SystemParams:
    """Symmetric reference circuit sized for a target photon number N.

    Data cavities sit at a common frequency; the coupling cavity is
    offset so that tuning a qubit onto its data cavity leaves the
    coupling cavity far detuned.  delta2_over_g fixes the shelving
    detuning Delta^(2)/g during resonant windows via the ratio p.
    """
    if N < 1:
        raise ConfigError("target photon number must be >= 1")
    if g_inv_ns <= 0 or t_rabi <= 0 or t2 <= 0 or delta2_over_g <= 0:
        raise ConfigError("system scales must be positive")
    if buffer_levels < 2:
        raise ConfigError("data cavities need at least two buffer levels")
    g = 1.0 / g_inv_ns
    omega = TWO_PI * 6.0
    # the ratio is quoted against the upper-rung coupling g2 = lam*g1
    delta2 = -delta2_over_g * math.sqrt(2.0) * g
    # Bias geometry scales with |Delta^(2)| so every off-resonant term's
    # detuning is proportional to it and second-order errors follow the
    # (g/Delta)^2 scaling.  The coupling cavity sits above the data
    # cavities (tuning a qubit up there grows its anharmonicity rather
    # than collapsing it) and the park point sits below them, so the
    # shelving transition of a parked or window-resonant qubit never
    # approaches any cavity.
    omega_cc = omega + 2.0 * abs(delta2)
    E1 = omega - 3.0 * abs(delta2)  # parked bias point
    # during a window E1 -> omega_j and E2 = E1/p; choose p from the data-cavity
    # resonance condition omega/p - 2*omega = delta2
    p = omega / (2.0 * omega + delta2)
    E2 = E1 / p
    qubits = (QubitParams(E1=E1, E2=E2), QubitParams(E1=E1, E2=E2))
    cavities = {
        "C1": CavityParams(omega=omega, truncation=N + buffer_levels),
        "C2": CavityParams(omega=omega, truncation=N + buffer_levels),
        "CC": CavityParams(omega=omega_cc, truncation=3),
    }
    couplings = {
        (1, "C1"): CouplingParams(g1=g),
        (2, "C2"): CouplingParams(g1=g),
        (1, "CC"): CouplingParams(g1=g),
        (2, "CC"): CouplingParams(g1=g),
    }
    return SystemParams(qubits=qubits, cavities=cavities, couplings=couplings,
                        rabi_amplitude=math.pi / t_rabi, t_rabi=t_rabi, t2=t2,
                        drive_frequency=E1)
