"""Dense linear algebra and fixed-step time integration.

All simulators share these routines. Internally hbar = 1 and frequencies are
angular (rad/s); public APIs elsewhere accept Hz and convert with :func:`hz`.
"""

from __future__ import annotations

from typing import Callable, Protocol, Union

import numpy as np

TWO_PI = 2.0 * np.pi

HERMITIAN_TOL = 1e-12
MAX_EIGH_DIM = 512
NORM_DRIFT_TOL = 1e-6


class NumericsError(Exception):
    pass


class NonHermitianInput(NumericsError):
    pass


class NoConvergence(NumericsError):
    pass


class NormDrift(NumericsError):
    def __init__(self, drift: float):
        super().__init__(
            f"state norm drifted by {drift:.3e} (> {NORM_DRIFT_TOL:.0e}); reduce dt"
        )
        self.drift = drift


def hz(f):
    """Convert a frequency in Hz to angular frequency in rad/s."""
    return TWO_PI * np.asarray(f, dtype=float) if np.ndim(f) else TWO_PI * float(f)


def to_hz(w):
    return np.asarray(w, dtype=float) / TWO_PI if np.ndim(w) else float(w) / TWO_PI


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    """Raise NonHermitianInput unless max|H - H^dagger| <= tol * max(1, max|H|).

    The tolerance is relative for matrices with entries of order 1e10 rad/s.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise NonHermitianInput(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    err = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if err > tol * scale:
        raise NonHermitianInput(f"max|H - H^dagger| = {err:.3e} exceeds {tol:.0e} (relative)")


def _fix_gauge(vecs: np.ndarray) -> np.ndarray:
    # first component with non-negligible magnitude made real positive
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-10)
        if idx.size:
            z = col[idx[0]]
            out[:, k] = col * (abs(z) / z)
    return out


def eigh(h: np.ndarray, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns ascending eigenvalues and orthonormal eigenvectors (columns). Each
    eigenvector's first non-negligible component is real and positive, and
    degenerate subspaces are rotated to a canonical basis so that ties resolve
    deterministically.
    """
    h = np.asarray(h, dtype=complex)
    if check:
        check_hermitian(h)
    n = h.shape[0]
    if n > MAX_EIGH_DIM:
        raise ValueError(f"dimension {n} exceeds supported maximum {MAX_EIGH_DIM}")
    if n == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=complex)
    h = 0.5 * (h + h.conj().T)
    try:
        vals, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc

    scale = max(1.0, float(np.max(np.abs(vals))))
    tol = 1e-10 * scale
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and vals[stop] - vals[start] <= tol:
            stop += 1
        if stop - start > 1:
            # canonical basis of the degenerate subspace: project the unit
            # vectors in index order and orthonormalise
            block = vecs[:, start:stop]
            proj = block @ block.conj().T
            basis = []
            for i in range(n):
                v = proj[:, i].copy()
                for b in basis:
                    v -= b * (b.conj() @ v)
                nv = np.linalg.norm(v)
                if nv > 1e-8:
                    basis.append(v / nv)
                if len(basis) == stop - start:
                    break
            vecs[:, start:stop] = np.column_stack(basis)
        start = stop
    return vals, _fix_gauge(vecs)


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for Hermitian H via spectral decomposition."""
    vals, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T


class LinearHamiltonian(Protocol):
    """Anything that can apply H(t) to a state (or batch of state columns)."""

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray: ...


HamiltonianLike = Union[Callable[[float], np.ndarray], LinearHamiltonian]


def _as_apply(hamiltonian: HamiltonianLike) -> Callable[[float, np.ndarray], np.ndarray]:
    if hasattr(hamiltonian, "apply"):
        return hamiltonian.apply
    return lambda t, psi: np.asarray(hamiltonian(t)) @ psi


def n_steps(t_span: tuple[float, float], dt: float) -> int:
    """Number of equal steps covering t_span with step no larger than dt."""
    t0, t1 = t_span
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    return max(1, int(np.ceil((t1 - t0) / dt - 1e-9)))


def evolve(
    hamiltonian: HamiltonianLike,
    psi0: np.ndarray,
    t_span: tuple[float, float],
    dt: float,
    renormalize: bool = True,
) -> np.ndarray:
    """Integrate i dpsi/dt = H(t) psi with fixed-step classical RK4.

    ``hamiltonian`` is either a callable returning the matrix H(t) or an
    object with ``apply(t, psi)``. ``psi0`` may be one state vector of shape
    (d,) or a batch of columns (d, B); columns evolve independently. The step
    actually used is (t1 - t0) / ceil((t1 - t0) / dt) so the final time is hit
    exactly.

    Raises NormDrift if any column's norm moves by more than 1e-6.
    """
    apply = _as_apply(hamiltonian)
    psi = np.array(psi0, dtype=complex)
    if psi.ndim not in (1, 2):
        raise ValueError("psi0 must be a vector or a (dim, batch) array")
    norm0 = np.linalg.norm(psi, axis=0)
    t0, t1 = t_span
    if t1 == t0:
        return psi
    steps = n_steps(t_span, dt)
    h = (t1 - t0) / steps
    mi = -1j
    for k in range(steps):
        t = t0 + k * h
        k1 = mi * apply(t, psi)
        k2 = mi * apply(t + 0.5 * h, psi + (0.5 * h) * k1)
        k3 = mi * apply(t + 0.5 * h, psi + (0.5 * h) * k2)
        k4 = mi * apply(t + h, psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    norm1 = np.linalg.norm(psi, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        drift = np.where(norm0 > 0, np.abs(norm1 / norm0 - 1.0), 0.0)
    worst = float(np.max(drift)) if np.size(drift) else 0.0
    if worst > NORM_DRIFT_TOL:
        raise NormDrift(worst)
    if renormalize:
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(norm1 > 0, norm0 / norm1, 1.0)
        psi = psi * scale
    return psi


def propagate_midpoint(
    h_of_t: Callable[[float], np.ndarray],
    psi0: np.ndarray,
    t_span: tuple[float, float],
    dt: float,
) -> np.ndarray:
    """Exponential midpoint propagator for slowly varying Hamiltonians.

    Each step applies exp(-i H(t_mid) h) exactly, so the step size is set by
    how fast H(t) changes rather than by its eigenvalue spread. Used where the
    fast phases have been removed by a rotating frame.
    """
    psi = np.array(psi0, dtype=complex)
    t0, t1 = t_span
    if t1 == t0:
        return psi
    steps = n_steps(t_span, dt)
    h = (t1 - t0) / steps
    for k in range(steps):
        psi = expm_hermitian(h_of_t(t0 + (k + 0.5) * h), h) @ psi
    return psi


def state_overlap(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for normalised vectors."""
    return float(abs(np.vdot(a, b)) ** 2)


def equal_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """Max-norm distance between two matrices after removing the best global phase."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    inner = np.vdot(b, a)
    phase = inner / abs(inner) if abs(inner) > 0 else 1.0
    return float(np.max(np.abs(a - phase * b)))


def wrap_phase(x):
    """Reduce angles to (-pi, pi]."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    y = np.where(y <= -np.pi, y + TWO_PI, y)
    return float(y) if np.ndim(y) == 0 else y
