"""Dense Hermitian operator algebra.

Everything downstream (model building, ensemble states, measurement
statistics) runs through the small set of primitives in this module:
tensor products, eigendecompositions, operator functions, commutator
diagnostics, and simultaneous diagonalization of commuting families.

Operators are dense ``complex128`` matrices at desk scale (joint
dimension capped at 4096 by default); values are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exceptions import (
    CapacityError,
    CommutationError,
    DimensionError,
    DomainError,
    HermiticityError,
    NumericalError,
    RealityError,
)

DEFAULT_DIM_CAP = 4096

# Construction-time flag residuals, relative to the largest entry.
FLAG_TOL = 1e-12
# Residual contract for eigendecompositions.
EIG_TOL = 1e-10
# Eigenvalues of a clamped spectrum are floored at this fraction of the top.
CLAMP_FLOOR_RATIO = 1e-14


@dataclass(frozen=True)
class OperatorMatrix:
    """Immutable dense square operator with Hermitian / reality flags.

    ``real_in_basis`` marks operators whose computational-basis entries
    are all real; it is the property that realizes time-reversal
    invariance as plain complex conjugation.
    """

    entries: np.ndarray
    hermitian: bool
    real_in_basis: bool

    @staticmethod
    def from_entries(
        entries,
        hermitian: bool | None = None,
        real_in_basis: bool | None = None,
    ) -> "OperatorMatrix":
        """Build an operator, detecting or enforcing the two flags.

        Passing ``hermitian=True`` (or ``real_in_basis=True``) asserts the
        property: sub-tolerance residuals are cleaned up by symmetrization
        (resp. dropping the imaginary part), larger ones raise.  ``None``
        auto-detects.
        """
        a = np.array(entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionError(f"square matrix of dim >= 1 required, got shape {a.shape}")
        scale = float(np.max(np.abs(a)))
        tol = FLAG_TOL * scale
        herm_resid = float(np.max(np.abs(a - a.conj().T)))
        imag_resid = float(np.max(np.abs(a.imag)))
        if hermitian is None:
            hermitian = herm_resid <= tol
        elif hermitian and herm_resid > tol:
            raise HermiticityError(
                f"Hermiticity residual {herm_resid:.3e} exceeds {tol:.3e}"
            )
        if hermitian:
            a = (a + a.conj().T) / 2.0
        if real_in_basis is None:
            real_in_basis = imag_resid <= tol
        elif real_in_basis and imag_resid > tol:
            raise RealityError(
                f"imaginary residual {imag_resid:.3e} exceeds {tol:.3e}"
            )
        if real_in_basis:
            a = a.real.astype(np.complex128)
        a.setflags(write=False)
        return OperatorMatrix(a, bool(hermitian), bool(real_in_basis))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def scale(self) -> float:
        """Largest entry magnitude; the reference for relative tolerances."""
        return float(np.max(np.abs(self.entries)))

    @property
    def real_entries(self) -> np.ndarray:
        """Real-dtype view of the entries; requires ``real_in_basis``."""
        if not self.real_in_basis:
            raise RealityError("operator is not real in the computational basis")
        return self.entries.real

    def __repr__(self) -> str:  # ndarray dumps are too noisy for a repr
        return (
            f"OperatorMatrix(dim={self.dim}, hermitian={self.hermitian}, "
            f"real_in_basis={self.real_in_basis})"
        )

    def _binary(self, other: "OperatorMatrix", combined: np.ndarray) -> "OperatorMatrix":
        if self.dim != other.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return OperatorMatrix.from_entries(combined)

    def __add__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        return self._binary(other, self.entries + other.entries)

    def __sub__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        return self._binary(other, self.entries - other.entries)

    def __matmul__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        return self._binary(other, self.entries @ other.entries)

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, complex, np.number)):
            return NotImplemented
        return OperatorMatrix.from_entries(self.entries * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return OperatorMatrix.from_entries(-self.entries)


@dataclass(frozen=True)
class EigenSystem:
    """Spectral decomposition A = V diag(eigenvalues) V† with ascending
    eigenvalues and phase-fixed eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_dim: int


def identity(dim: int) -> OperatorMatrix:
    if dim < 1:
        raise DimensionError(f"dim must be >= 1, got {dim}")
    return OperatorMatrix.from_entries(np.eye(dim), hermitian=True, real_in_basis=True)


def kron(a: OperatorMatrix, b: OperatorMatrix, cap: int = DEFAULT_DIM_CAP) -> OperatorMatrix:
    """Tensor product a ⊗ b on the joint space (A-side indices major)."""
    joint = a.dim * b.dim
    if joint > cap:
        raise CapacityError(f"joint dimension {joint} exceeds cap {cap}")
    return OperatorMatrix.from_entries(
        np.kron(a.entries, b.entries),
        hermitian=(a.hermitian and b.hermitian) or None,
        real_in_basis=(a.real_in_basis and b.real_in_basis) or None,
    )


def embed(local: OperatorMatrix, side: str, dims: tuple[int, int],
          cap: int = DEFAULT_DIM_CAP) -> OperatorMatrix:
    """Lift a subsystem operator to the joint space: A-side -> op ⊗ 1,
    B-side -> 1 ⊗ op."""
    dim_a, dim_b = dims
    side = side.upper()
    if side == "A":
        if local.dim != dim_a:
            raise DimensionError(f"A-side operator dim {local.dim} != {dim_a}")
        return kron(local, identity(dim_b), cap=cap)
    if side == "B":
        if local.dim != dim_b:
            raise DimensionError(f"B-side operator dim {local.dim} != {dim_b}")
        return kron(identity(dim_a), local, cap=cap)
    raise DimensionError(f"side must be 'A' or 'B', got {side!r}")


def commutator_norm(a: OperatorMatrix, b: OperatorMatrix) -> float:
    """Max-entry magnitude of ab - ba."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    comm = a.entries @ b.entries - b.entries @ a.entries
    return float(np.max(np.abs(comm)))


def _fix_phases(v: np.ndarray) -> np.ndarray:
    """Make the first above-threshold component of each column real positive."""
    v = np.array(v)
    for c in range(v.shape[1]):
        col = v[:, c]
        idx = np.flatnonzero(np.abs(col) > 1e-8)
        if idx.size == 0:
            continue
        lead = col[idx[0]]
        if np.iscomplexobj(v):
            v[:, c] = col * (np.conj(lead) / abs(lead))
        elif lead < 0:
            v[:, c] = -col
    return v


def eigh(a: OperatorMatrix) -> EigenSystem:
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending.

    Real operators are decomposed in real arithmetic so the eigenvector
    matrix comes out real orthogonal.
    """
    if not a.hermitian:
        raise HermiticityError("eigh requires a Hermitian operator")
    if a.real_in_basis:
        w, v = np.linalg.eigh(a.entries.real)
    else:
        w, v = np.linalg.eigh(a.entries)
    v = _fix_phases(v)
    es = EigenSystem(np.asarray(w, dtype=np.float64), v, a.dim)
    _validate_eigensystem(a, es)
    return es


def _validate_eigensystem(a: OperatorMatrix, es: EigenSystem) -> None:
    v, w = es.eigenvectors, es.eigenvalues
    ortho = float(np.max(np.abs(v.conj().T @ v - np.eye(a.dim))))
    if ortho > EIG_TOL:
        raise NumericalError(f"eigenvector unitarity residual {ortho:.3e} > {EIG_TOL:.0e}")
    recon = (v * w) @ v.conj().T
    resid = float(np.max(np.abs(a.entries - recon)))
    if resid > EIG_TOL * max(a.scale, 1e-300):
        raise NumericalError(
            f"eigendecomposition residual {resid:.3e} exceeds "
            f"{EIG_TOL:.0e} * {a.scale:.3e}"
        )


def clamp_spectrum(
    eigenvalues: np.ndarray, floor_ratio: float = CLAMP_FLOOR_RATIO
) -> tuple[np.ndarray, int]:
    """Raise eigenvalues below ``floor_ratio * max`` to the floor.

    Returns the clamped spectrum and the number of clamped eigenvalues.
    GGE states are analytically full rank but numerically near-singular
    at large generalized temperatures; the floor keeps logs and fractional
    powers finite without hiding genuinely non-positive inputs.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    lam_max = float(np.max(lam))
    if lam_max <= 0.0:
        raise DomainError("spectrum has no positive part; clamping would erase it")
    floor = floor_ratio * lam_max
    count = int(np.count_nonzero(lam < floor))
    return np.maximum(lam, floor), count


def op_func(
    a: OperatorMatrix,
    f: Callable[[np.ndarray], np.ndarray],
    clamp: bool = False,
) -> OperatorMatrix:
    """Apply a scalar real->real function to a Hermitian operator's spectrum.

    With ``clamp=True`` the spectrum is floored via :func:`clamp_spectrum`
    first (for logs and fractional powers of near-singular states).
    """
    es = eigh(a)
    lam = es.eigenvalues
    if clamp:
        lam, _ = clamp_spectrum(lam)
    with np.errstate(all="ignore"):
        vals = np.asarray(f(lam))
    if np.iscomplexobj(vals) or not np.all(np.isfinite(vals)):
        raise DomainError("function is not finite and real on the (clamped) spectrum")
    vals = vals.astype(np.float64)
    v = es.eigenvectors
    return OperatorMatrix.from_entries((v * vals) @ v.conj().T, hermitian=True)


def simultaneous_eigh(
    ops: Sequence[OperatorMatrix], tol: float = 1e-10
) -> tuple[np.ndarray, np.ndarray]:
    """Simultaneous eigenbasis of a commuting Hermitian family.

    Sequential refinement: diagonalize ``ops[0]``; inside each degenerate
    cluster (eigenvalue gap below ``tol * scale``) diagonalize the
    restriction of ``ops[1]``; recurse.  Returns ``(basis, tuples)`` where
    ``basis`` columns are the common eigenvectors and ``tuples[c, k]`` is
    the eigenvalue of ``ops[k]`` on column ``c``.  The basis is real
    orthogonal whenever every operator is real in the computational basis.
    """
    if len(ops) == 0:
        raise DimensionError("at least one operator is required")
    dim = ops[0].dim
    for op in ops:
        if op.dim != dim:
            raise DimensionError("operators must share one dimension")
        if not op.hermitian:
            raise HermiticityError("simultaneous_eigh requires Hermitian operators")
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            norm = commutator_norm(ops[i], ops[j])
            scale = max(ops[i].scale * ops[j].scale, 1e-300)
            if norm > tol * scale:
                raise CommutationError(
                    f"operators {i} and {j} do not commute: "
                    f"norm {norm:.3e} > {tol:.0e} * {scale:.3e}"
                )

    all_real = all(op.real_in_basis for op in ops)
    mats = [op.entries.real if all_real else op.entries for op in ops]
    # Gap thresholds per operator, floored at unit scale so that noise-level
    # splittings of physically degenerate levels are merged.
    atols = [tol * max(op.scale, 1.0) for op in ops]

    basis, tuples = _refine(mats, atols)
    basis = _fix_phases(basis)

    ortho = float(np.max(np.abs(basis.conj().T @ basis - np.eye(dim))))
    if ortho > EIG_TOL:
        raise NumericalError(f"refined basis unitarity residual {ortho:.3e}")
    for k, op in enumerate(ops):
        resid = float(
            np.max(np.abs(op.entries @ basis - basis * tuples[:, k]))
        )
        if resid > 10.0 * tol * max(op.scale, 1.0):
            raise NumericalError(
                f"degeneracy resolution failed for operator {k}: "
                f"residual {resid:.3e} > {10 * tol:.0e} * {max(op.scale, 1.0):.3e}"
            )
    return basis, tuples


def _refine(mats: list[np.ndarray], atols: list[float]) -> tuple[np.ndarray, np.ndarray]:
    d = mats[0].shape[0]
    w, v = np.linalg.eigh(mats[0])
    tuples = np.zeros((d, len(mats)))
    tuples[:, 0] = w
    if len(mats) == 1:
        return v, tuples
    split = np.flatnonzero(np.diff(w) > atols[0]) + 1
    starts = np.concatenate(([0], split))
    ends = np.concatenate((split, [d]))
    for s, e in zip(starts, ends):
        cols = slice(int(s), int(e))
        tuples[cols, 0] = float(np.mean(w[cols]))  # one outcome per cluster
        vc = v[:, cols]
        sub = [vc.conj().T @ m @ vc for m in mats[1:]]
        if e - s == 1:
            tuples[cols, 1:] = [float(x[0, 0].real) for x in sub]
        else:
            wsub, tsub = _refine(sub, atols[1:])
            v[:, cols] = vc @ wsub
            tuples[cols, 1:] = tsub
    return v, tuples
