"""Dense complex linear algebra and Fock-space primitives.

Everything operates on explicit tensor-factor layouts (two three-level
qubits, up to three truncated cavities).  All functions are pure; the
dataclasses are frozen and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

QUBIT_LABELS = ("Q1", "Q2")
CAVITY_LABELS = ("C1", "C2", "CC")
VALID_LABELS = QUBIT_LABELS + CAVITY_LABELS

HERMITICITY_TOL = 1e-12
NORM_TOL = 1e-9


class LayoutError(ValueError):
    """Raised for malformed or mismatched Hilbert-space layouts."""


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered tensor factorization of the working Hilbert space.

    factors: tuple of (label, dimension) pairs, labels from
    {Q1, Q2, C1, C2, CC}.  Qubit factors must have dimension 3 (the
    three-level truncation); cavity factors any dimension >= 2.
    """

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        seen = set()
        for label, dim in self.factors:
            if label not in VALID_LABELS:
                raise LayoutError(f"unknown factor label {label!r}")
            if label in seen:
                raise LayoutError(f"duplicate factor label {label!r}")
            seen.add(label)
            if label in QUBIT_LABELS and dim != 3:
                raise LayoutError(f"qubit factor {label} must have dimension 3, got {dim}")
            if label in CAVITY_LABELS and dim < 2:
                raise LayoutError(f"cavity factor {label} needs dimension >= 2, got {dim}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.factors else 1

    def axis(self, label: str) -> int:
        for k, (lab, _) in enumerate(self.factors):
            if lab == label:
                return k
        raise LayoutError(f"label {label!r} not in layout {self.labels}")

    def dim_of(self, label: str) -> int:
        return self.factors[self.axis(label)][1]

    def concat(self, other: "HilbertLayout") -> "HilbertLayout":
        return HilbertLayout(self.factors + other.factors)


def _as_layout(dims_or_layout) -> HilbertLayout:
    if isinstance(dims_or_layout, HilbertLayout):
        return dims_or_layout
    raise LayoutError(f"expected HilbertLayout, got {type(dims_or_layout)!r}")


@dataclass(frozen=True)
class QuantumState:
    """Pure state vector or density matrix over a HilbertLayout.

    ``data`` is a complex vector of length layout.dim, or a square
    matrix of that dimension.  Construct with ``validate=False`` only
    for intermediate values known to be clean.
    """

    layout: HilbertLayout
    data: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=complex)
        object.__setattr__(self, "data", arr)
        d = self.layout.dim
        if arr.ndim == 1:
            if arr.shape != (d,):
                raise LayoutError(f"vector length {arr.shape} does not match layout dim {d}")
            if self.validate and abs(np.linalg.norm(arr) - 1.0) > NORM_TOL:
                raise ValueError(f"state vector norm deviates from 1 by more than {NORM_TOL}")
        elif arr.ndim == 2:
            if arr.shape != (d, d):
                raise LayoutError(f"matrix shape {arr.shape} does not match layout dim {d}")
            if self.validate:
                if np.max(np.abs(arr - arr.conj().T)) > HERMITICITY_TOL * max(1.0, np.max(np.abs(arr))):
                    raise ValueError("density matrix is not Hermitian")
                if abs(arr.trace().real - 1.0) > NORM_TOL:
                    raise ValueError("density matrix trace deviates from 1")
                if np.linalg.eigvalsh(arr).min() < -NORM_TOL:
                    raise ValueError("density matrix has a negative eigenvalue")
        else:
            raise LayoutError("state data must be a vector or a square matrix")

    @property
    def is_vector(self) -> bool:
        return self.data.ndim == 1

    def to_matrix(self) -> "QuantumState":
        if self.is_vector:
            return QuantumState(self.layout, np.outer(self.data, self.data.conj()), validate=False)
        return self


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian matrix tagged with the layout it acts on."""

    layout: HilbertLayout
    matrix: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", arr)
        d = self.layout.dim
        if arr.shape != (d, d):
            raise LayoutError(f"operator shape {arr.shape} does not match layout dim {d}")
        scale = max(1.0, np.max(np.abs(arr)))
        if np.max(np.abs(arr - arr.conj().T)) > HERMITICITY_TOL * scale:
            raise ValueError("operator is not Hermitian")


def tensor(parts):
    """Kronecker product of states or operators, in the given order."""
    parts = list(parts)
    if not parts:
        raise ValueError("tensor of zero factors")
    if all(isinstance(p, HermitianOperator) for p in parts):
        mat = parts[0].matrix
        layout = parts[0].layout
        for p in parts[1:]:
            mat = np.kron(mat, p.matrix)
            layout = layout.concat(p.layout)
        return HermitianOperator(layout, mat)
    if all(isinstance(p, QuantumState) for p in parts):
        kinds = {p.is_vector for p in parts}
        if len(kinds) != 1:
            raise ValueError("cannot tensor a mix of vectors and density matrices")
        arr = parts[0].data
        layout = parts[0].layout
        for p in parts[1:]:
            arr = np.kron(arr, p.data)
            layout = layout.concat(p.layout)
        return QuantumState(layout, arr, validate=False)
    raise ValueError("cannot tensor a mix of operators and states")


def lowering_operator(dim: int) -> np.ndarray:
    """Truncated photon annihilation operator."""
    a = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        a[n - 1, n] = math.sqrt(n)
    return a


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def displacement(alpha: complex, dim: int) -> np.ndarray:
    """exp(alpha a^dag - alpha* a) on the truncated Fock space.

    The generator is truncated first, so the result is exactly unitary
    on the truncation; agreement with the infinite-dimensional operator
    degrades near the truncation edge.
    """
    if dim < 2:
        raise ValueError("displacement needs dim >= 2")
    a = lowering_operator(dim)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return expm(gen)


def displacement_pad_dim(alpha: complex, extra: int = 0) -> int:
    """Truncation keeping the displacement error of low Fock states below ~1e-6.

    ``extra`` budgets for the photon content of the state the operator
    will act on (target photon number N in practice).
    """
    x = abs(alpha) ** 2
    return int(math.ceil(x + 6.0 * math.sqrt(x + 1.0))) + extra


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Analytic coherent-state amplitudes e^{-|a|^2/2} a^n / sqrt(n!)."""
    n = np.arange(dim)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, dim)))))
    amps = np.exp(-abs(alpha) ** 2 / 2.0) * np.power(complex(alpha), n) / np.exp(log_fact / 2.0)
    return amps.astype(complex)


def basis_state(layout: HilbertLayout, occupations: dict[str, int]) -> QuantumState:
    """Product basis vector |n_Q1, n_Q2, ...> with unspecified factors in 0."""
    idx = 0
    for label, dim in layout.factors:
        n = occupations.get(label, 0)
        if not 0 <= n < dim:
            raise ValueError(f"occupation {n} out of range for factor {label} (dim {dim})")
        idx = idx * dim + n
    vec = np.zeros(layout.dim, dtype=complex)
    vec[idx] = 1.0
    return QuantumState(layout, vec, validate=False)


def partial_trace(state: QuantumState, keep) -> QuantumState:
    """Reduced density matrix over the kept factors, in original order."""
    keep = set(keep)
    labels = state.layout.labels
    unknown = keep - set(labels)
    if unknown:
        raise LayoutError(f"unknown labels in partial_trace: {sorted(unknown)}")
    rho = state.to_matrix().data
    dims = state.layout.dims
    k = len(dims)
    keep_axes = [i for i, lab in enumerate(labels) if lab in keep]
    trace_axes = [i for i, lab in enumerate(labels) if lab not in keep]
    d_keep = int(np.prod([dims[i] for i in keep_axes])) if keep_axes else 1
    perm = keep_axes + trace_axes
    full = rho.reshape(dims + dims)
    full = np.transpose(full, perm + [k + p for p in perm])
    d_tr = state.layout.dim // d_keep
    full = full.reshape(d_keep, d_tr, d_keep, d_tr)
    reduced = np.einsum("aibi->ab", full)
    new_layout = HilbertLayout(tuple(f for f in state.layout.factors if f[0] in keep))
    return QuantumState(new_layout, reduced, validate=False)


def evolve(H: HermitianOperator, t: float, state: QuantumState) -> QuantumState:
    """Apply exp(-i H t) without forming the full matrix exponential.

    Vector states use matrix-exponential action (Al-Mohy/Higham scaled
    Taylor); density matrices get the conjugation applied column-wise.
    """
    if H.layout.dims != state.layout.dims or H.layout.labels != state.layout.labels:
        raise LayoutError("Hamiltonian and state layouts differ")
    gen = -1j * t * H.matrix
    if state.is_vector:
        out = expm_multiply(gen, state.data)
        return QuantumState(state.layout, out, validate=False)
    half = expm_multiply(gen, state.data)
    out = expm_multiply(gen, half.conj().T).conj().T
    return QuantumState(state.layout, out, validate=False)


def fidelity_with_pure(rho: QuantumState, psi: QuantumState) -> float:
    """Overlap <psi| rho |psi> with a pure target."""
    if rho.layout.dims != psi.layout.dims:
        raise LayoutError("state layouts differ")
    if not psi.is_vector:
        raise ValueError("target must be a state vector")
    v = psi.data
    if rho.is_vector:
        return float(abs(np.vdot(v, rho.data)) ** 2)
    val = np.vdot(v, rho.data @ v)
    return float(val.real)


def _simplex_project(lam: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    u = np.sort(lam)[::-1]
    css = np.cumsum(u) - 1.0
    rho_idx = np.nonzero(u - css / np.arange(1, len(u) + 1) > 0)[0][-1]
    theta = css[rho_idx] / (rho_idx + 1.0)
    return np.maximum(lam - theta, 0.0)


def project_to_physical(H, layout: HilbertLayout | None = None, mode: str = "clip") -> QuantumState:
    """Map a Hermitian matrix to a valid density matrix.

    clip: zero negative eigenvalues, renormalize to unit trace.
    nearest: Frobenius-nearest unit-trace PSD matrix; shares the
    eigenvectors of the input, spectrum projected onto the simplex.
    """
    if isinstance(H, HermitianOperator):
        mat, layout = H.matrix, H.layout
    else:
        mat = np.asarray(H, dtype=complex)
        if layout is None:
            # implied single anonymous cavity-like factor
            layout = HilbertLayout((("C1", mat.shape[0]),))
    scale = max(1.0, np.max(np.abs(mat)))
    if np.max(np.abs(mat - mat.conj().T)) > 1e-10 * scale:
        raise ValueError("project_to_physical requires a Hermitian input")
    lam, U = np.linalg.eigh(mat)
    if mode == "clip":
        lam = np.maximum(lam, 0.0)
        tot = lam.sum()
        if tot <= 0:
            raise ValueError("matrix has no positive part to normalize")
        lam = lam / tot
    elif mode == "nearest":
        lam = _simplex_project(lam)
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    rho = (U * lam) @ U.conj().T
    rho = (rho + rho.conj().T) / 2.0
    return QuantumState(layout, rho, validate=False)
