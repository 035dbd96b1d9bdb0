"""Displaced photon-number observables and noisy measurement records.

A single-cavity observable is M(alpha, tau) = sum_n cos(2 sqrt(n) tau)
D(alpha)^dag |n><n| D(alpha): displace the state, read the photon number,
weight each count by a cosine of the scaled Rabi time.  Correlating two
cavities means taking the tensor product.  Records hold the exact joint
expectations plus Gaussian readout noise.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .hilbert import (
    HermitianOperator,
    HilbertLayout,
    QuantumState,
    displacement,
    displacement_pad_dim,
)


class MeasurementError(ValueError):
    """Raised for invalid settings or insufficient truncation."""


@dataclass(frozen=True)
class MeasurementSetting:
    """Displacement amplitudes and dimensionless probe times for both cavities."""

    alpha1: complex
    tau1: float
    alpha2: complex
    tau2: float

    def __post_init__(self):
        for tau in (self.tau1, self.tau2):
            if not 0.0 <= tau <= math.pi:
                raise MeasurementError(f"tau {tau} outside [0, pi]")


@dataclass(frozen=True)
class MeasurementRecord:
    """Settings with outcomes and per-outcome noise level, plus the seed used."""

    settings: tuple[MeasurementSetting, ...]
    outcomes: tuple[float, ...]
    sigmas: tuple[float, ...]
    seed: int | None = None

    def __post_init__(self):
        if not (len(self.settings) == len(self.outcomes) == len(self.sigmas)):
            raise MeasurementError("settings, outcomes and sigmas must align")
        for m, s in zip(self.outcomes, self.sigmas):
            if not math.isfinite(m):
                raise MeasurementError("non-finite outcome")
            if abs(m) > 1.0 + 5.0 * s + 1e-12:
                raise MeasurementError("outcome outside the observable spectrum band")

    def __len__(self) -> int:
        return len(self.settings)


def _padded_dim(alpha: complex, dim: int) -> int:
    # deeper padding than the generic rule: the interior block must be
    # converged to ~1e-10, which needs the Poisson tail at the cutoff
    # to be negligible, not merely small
    x = abs(alpha) ** 2
    return max(dim, int(math.ceil(x + 12.0 * math.sqrt(x + 1.0))) + dim + 10)


def observable(alpha: complex, tau: float, dim: int) -> np.ndarray:
    """Single-cavity displaced-number observable on a dim-level truncation.

    Built at a padded truncation where the displacement is accurate, then
    cropped to the working dim x dim block; eigenvalues of the padded
    operator are exactly cos(2 sqrt(n) tau).
    """
    if dim < 1:
        raise MeasurementError("dimension must be positive")
    big = _padded_dim(alpha, dim)
    weights = np.cos(2.0 * np.sqrt(np.arange(big)) * tau)
    if alpha == 0:
        return np.diag(weights[:dim]).astype(complex)
    D = displacement(alpha, big)
    M = D.conj().T @ (weights[:, None] * D)
    return 0.5 * (M[:dim, :dim] + M[:dim, :dim].conj().T)


def correlated_observable(setting: MeasurementSetting, dims: tuple[int, int]) -> np.ndarray:
    """Tensor product of the two single-cavity observables."""
    return np.kron(observable(setting.alpha1, setting.tau1, dims[0]),
                   observable(setting.alpha2, setting.tau2, dims[1]))


def sample_settings(count: int, N: int, radius: float | None = None,
                    seed: int | None = None) -> list[MeasurementSetting]:
    """Random settings: tau uniform on [0, pi], alpha uniform on a disc.

    The default disc radius equals the target photon number N.
    """
    if count < 1:
        raise MeasurementError("need at least one setting")
    if radius is None:
        radius = float(N)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        r = radius * math.sqrt(rng.uniform())
        th1 = rng.uniform(0.0, 2.0 * math.pi)
        tau1 = rng.uniform(0.0, math.pi)
        r2 = radius * math.sqrt(rng.uniform())
        th2 = rng.uniform(0.0, 2.0 * math.pi)
        tau2 = rng.uniform(0.0, math.pi)
        out.append(MeasurementSetting(alpha1=r * complex(math.cos(th1), math.sin(th1)),
                                      tau1=tau1,
                                      alpha2=r2 * complex(math.cos(th2), math.sin(th2)),
                                      tau2=tau2))
    return out


def expectation(rho: np.ndarray, setting: MeasurementSetting,
                dims: tuple[int, int]) -> float:
    """Tr[(M1 (x) M2) rho] without forming the joint Kronecker product."""
    d1, d2 = dims
    M1 = observable(setting.alpha1, setting.tau1, d1)
    M2 = observable(setting.alpha2, setting.tau2, d2)
    r = rho.reshape(d1, d2, d1, d2)
    val = np.einsum('ik,jl,klij->', M1, M2, r)
    return float(val.real)


def generate_record(rho: QuantumState, settings, sigma: float = 0.0,
                    seed: int | None = None) -> MeasurementRecord:
    """Measurement record on a two-cavity state: exact expectations + noise."""
    if sigma < 0:
        raise MeasurementError("noise level must be nonnegative")
    mat = rho.to_matrix().data
    dims = rho.layout.dims
    if len(dims) != 2:
        raise MeasurementError("generate_record expects a two-cavity state")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(settings)) * sigma if sigma > 0 else np.zeros(len(settings))
    outcomes = []
    for s, w in zip(settings, noise):
        outcomes.append(expectation(mat, s, dims) + w)
    return MeasurementRecord(settings=tuple(settings), outcomes=tuple(outcomes),
                             sigmas=tuple(float(sigma) for _ in settings),
                             seed=seed)


def completeness_rank(settings, dims: tuple[int, int]) -> int:
    """Dimension of the real span of the correlated observables plus identity."""
    d = dims[0] * dims[1]
    rows = [np.eye(d, dtype=complex).reshape(-1)]
    for s in settings:
        rows.append(correlated_observable(s, dims).reshape(-1))
    A = np.array(rows)
    # Hermitian matrices over the reals: stack real and imaginary parts
    B = np.hstack([A.real, A.imag])
    sv = np.linalg.svd(B, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > 1e-8 * sv[0]))


RECORD_COLUMNS = ("re_alpha1", "im_alpha1", "tau1",
                  "re_alpha2", "im_alpha2", "tau2", "outcome", "sigma")


def record_to_table(record: MeasurementRecord) -> str:
    """Flat text table, one row per setting, '#' metadata line with the seed."""
    buf = io.StringIO()
    buf.write(f"# seed={record.seed}\n")
    buf.write(" ".join(RECORD_COLUMNS) + "\n")
    for s, m, sg in zip(record.settings, record.outcomes, record.sigmas):
        buf.write(f"{s.alpha1.real:.17g} {s.alpha1.imag:.17g} {s.tau1:.17g} "
                  f"{s.alpha2.real:.17g} {s.alpha2.imag:.17g} {s.tau2:.17g} "
                  f"{m:.17g} {sg:.17g}\n")
    return buf.getvalue()


def record_from_table(text: str) -> MeasurementRecord:
    seed = None
    settings, outcomes, sigmas = [], [], []
    lines = [ln for ln in text.splitlines() if ln.strip()]
    for ln in lines:
        if ln.startswith("#"):
            body = ln[1:].strip()
            if body.startswith("seed="):
                val = body[5:]
                seed = None if val == "None" else int(val)
            continue
        if ln.split()[0] == RECORD_COLUMNS[0]:
            continue
        f = [float(x) for x in ln.split()]
        if len(f) != 8:
            raise MeasurementError("malformed record row")
        settings.append(MeasurementSetting(alpha1=complex(f[0], f[1]), tau1=f[2],
                                           alpha2=complex(f[3], f[4]), tau2=f[5]))
        outcomes.append(f[6])
        sigmas.append(f[7])
    return MeasurementRecord(settings=tuple(settings), outcomes=tuple(outcomes),
                             sigmas=tuple(sigmas), seed=seed)
