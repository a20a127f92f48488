"""Spin-chain subsystems, conserved-charge bookkeeping, and the coupled pair.

Two model families cover the integrable and chaotic regimes:

* open-boundary XX chain: hopping conserves total magnetization, which
  serves as the shared charge carried by both subsystems;
* tilted-field Ising chain: with both fields on, no nontrivial charge
  survives, so only the energy enters the ensemble.

All Hamiltonians are real in the computational basis; that convention is
what makes the evolution operator symmetric (time reversal = complex
conjugation) and the transition matrix microreversible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .exceptions import CapacityError, CommutationError, DimensionError, RealityError
from .operator_core import (
    DEFAULT_DIM_CAP,
    OperatorMatrix,
    commutator_norm,
    embed,
    identity,
    kron,
)

# Commuting-family tolerance, relative to the product of operator scales.
CHARGE_TOL = 1e-10

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def site_operator(kind: str, site: int, n_sites: int) -> np.ndarray:
    """Single-site Pauli embedded in an n-site chain (site 0 leftmost)."""
    if not 0 <= site < n_sites:
        raise DimensionError(f"site {site} outside chain of {n_sites} sites")
    ops = [PAULI["I"]] * n_sites
    ops[site] = PAULI[kind]
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def pauli_product(factors: Sequence[tuple[str, int]], n_sites: int) -> np.ndarray:
    """Product of single-site Paulis, e.g. [("Z", 0), ("Z", 1)]."""
    out = np.eye(2**n_sites, dtype=np.complex128)
    for kind, site in factors:
        out = out @ site_operator(kind, site, n_sites)
    return out


@dataclass(frozen=True)
class SystemSpec:
    """One subsystem: Hamiltonian plus its commuting conserved charges.

    ``shared_charges`` are the charges carried by both subsystems (paired
    by name across sides); ``exclusive_charges`` live on this side only.
    Ordering is the generalized-temperature ordering used everywhere:
    energy first, shared charges, then exclusive charges.
    """

    label: str
    n_sites: int
    local_dim: int
    hamiltonian: OperatorMatrix
    shared_charges: tuple[tuple[str, OperatorMatrix], ...] = ()
    exclusive_charges: tuple[tuple[str, OperatorMatrix], ...] = ()

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_sites


@dataclass(frozen=True)
class CompositeSystem:
    """The coupled pair: H_total = H_A ⊗ 1 + 1 ⊗ H_B + g * coupling."""

    spec_a: SystemSpec
    spec_b: SystemSpec
    coupling: OperatorMatrix
    g: float
    total_hamiltonian: OperatorMatrix
    conservation: dict

    @property
    def joint_dim(self) -> int:
        return self.spec_a.dim * self.spec_b.dim


def generators(spec: SystemSpec) -> list[tuple[str, OperatorMatrix]]:
    """Generator list in theta ordering: (H, shared..., exclusive...)."""
    out = [("H", spec.hamiltonian)]
    out.extend(spec.shared_charges)
    out.extend(spec.exclusive_charges)
    return out


def _charge_scale(a: OperatorMatrix, b: OperatorMatrix) -> float:
    return max(a.scale * b.scale, 1e-300)


def _validate_spec(spec: SystemSpec) -> None:
    dim = spec.dim
    named = generators(spec)
    for name, op in named:
        if op.dim != dim:
            raise DimensionError(f"{spec.label}: operator {name} has dim {op.dim} != {dim}")
    if not spec.hamiltonian.real_in_basis:
        raise RealityError(
            f"{spec.label}: Hamiltonian must be real in the computational basis"
        )
    for i in range(len(named)):
        for j in range(i + 1, len(named)):
            norm = commutator_norm(named[i][1], named[j][1])
            scale = _charge_scale(named[i][1], named[j][1])
            if norm > CHARGE_TOL * scale:
                raise CommutationError(
                    f"{spec.label}: [{named[i][0]}, {named[j][0]}] norm {norm:.3e} "
                    f"exceeds {CHARGE_TOL:.0e} * {scale:.3e}"
                )


def build_xx_chain(n_sites: int, J: float, h: float, label: str) -> SystemSpec:
    """Open-boundary XX chain with a transverse field.

    H = sum_i (J/2)(X_i X_{i+1} + Y_i Y_{i+1}) + h sum_i Z_i, with the
    conserved total magnetization Mz = sum_i Z_i / 2 as the shared charge.
    """
    if n_sites < 1:
        raise DimensionError("n_sites must be >= 1")
    dim = 2**n_sites
    if dim > DEFAULT_DIM_CAP:
        raise CapacityError(f"chain dimension {dim} exceeds cap {DEFAULT_DIM_CAP}")
    H = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(n_sites - 1):
        H += (J / 2.0) * (
            pauli_product([("X", i), ("X", i + 1)], n_sites)
            + pauli_product([("Y", i), ("Y", i + 1)], n_sites)
        )
    for i in range(n_sites):
        H += h * site_operator("Z", i, n_sites)
    mz = sum(site_operator("Z", i, n_sites) for i in range(n_sites)) / 2.0
    spec = SystemSpec(
        label=label,
        n_sites=n_sites,
        local_dim=2,
        hamiltonian=OperatorMatrix.from_entries(H, hermitian=True, real_in_basis=True),
        shared_charges=(
            ("Mz", OperatorMatrix.from_entries(mz, hermitian=True, real_in_basis=True)),
        ),
    )
    _validate_spec(spec)
    return spec


def build_tilted_ising_chain(
    n_sites: int, J: float, hx: float, hz: float, label: str
) -> SystemSpec:
    """Open-boundary Ising chain with longitudinal and transverse fields.

    H = J sum_i Z_i Z_{i+1} + hx sum_i X_i + hz sum_i Z_i.  With hx and hz
    both nonzero the model is nonintegrable, so no shared charge is supplied.
    """
    if n_sites < 1:
        raise DimensionError("n_sites must be >= 1")
    dim = 2**n_sites
    if dim > DEFAULT_DIM_CAP:
        raise CapacityError(f"chain dimension {dim} exceeds cap {DEFAULT_DIM_CAP}")
    H = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(n_sites - 1):
        H += J * pauli_product([("Z", i), ("Z", i + 1)], n_sites)
    for i in range(n_sites):
        H += hx * site_operator("X", i, n_sites)
        H += hz * site_operator("Z", i, n_sites)
    spec = SystemSpec(
        label=label,
        n_sites=n_sites,
        local_dim=2,
        hamiltonian=OperatorMatrix.from_entries(H, hermitian=True, real_in_basis=True),
    )
    _validate_spec(spec)
    return spec


def add_exclusive_charge(spec: SystemSpec, name: str, op: OperatorMatrix) -> SystemSpec:
    """Extend the exclusive-charge list after verifying commutation.

    The paper-side assumption that such charges exist is policed here: the
    candidate must commute with the Hamiltonian and every existing charge.
    """
    if op.dim != spec.dim:
        raise DimensionError(f"charge {name} has dim {op.dim} != {spec.dim}")
    for other_name, other in generators(spec):
        norm = commutator_norm(op, other)
        scale = _charge_scale(op, other)
        if norm > CHARGE_TOL * scale:
            raise CommutationError(
                f"charge {name} does not commute with {other_name}: "
                f"norm {norm:.3e} > {CHARGE_TOL:.0e} * {scale:.3e}"
            )
    return replace(spec, exclusive_charges=spec.exclusive_charges + ((name, op),))


def add_shared_charge(
    spec_a: SystemSpec,
    spec_b: SystemSpec,
    name: str,
    op_a: OperatorMatrix,
    op_b: OperatorMatrix,
) -> tuple[SystemSpec, SystemSpec]:
    """Append a name-paired shared charge to both sides, with verification."""
    updated = []
    for spec, op in ((spec_a, op_a), (spec_b, op_b)):
        if op.dim != spec.dim:
            raise DimensionError(f"charge {name} has dim {op.dim} != {spec.dim}")
        for other_name, other in generators(spec):
            norm = commutator_norm(op, other)
            scale = _charge_scale(op, other)
            if norm > CHARGE_TOL * scale:
                raise CommutationError(
                    f"{spec.label}: shared charge {name} does not commute with "
                    f"{other_name}: norm {norm:.3e}"
                )
        updated.append(replace(spec, shared_charges=spec.shared_charges + ((name, op),)))
    return updated[0], updated[1]


def exchange_coupling(spec_a: SystemSpec, spec_b: SystemSpec) -> OperatorMatrix:
    """(X_A,last X_B,first + Y_A,last Y_B,first)/2 across the contact."""
    xa = site_operator("X", spec_a.n_sites - 1, spec_a.n_sites)
    ya = site_operator("Y", spec_a.n_sites - 1, spec_a.n_sites)
    xb = site_operator("X", 0, spec_b.n_sites)
    yb = site_operator("Y", 0, spec_b.n_sites)
    ent = (np.kron(xa, xb) + np.kron(ya, yb)) / 2.0
    return OperatorMatrix.from_entries(ent, hermitian=True, real_in_basis=True)


def ising_coupling(spec_a: SystemSpec, spec_b: SystemSpec) -> OperatorMatrix:
    """Z_A,last Z_B,first across the contact."""
    za = site_operator("Z", spec_a.n_sites - 1, spec_a.n_sites)
    zb = site_operator("Z", 0, spec_b.n_sites)
    return OperatorMatrix.from_entries(np.kron(za, zb), hermitian=True, real_in_basis=True)


def build_composite(
    spec_a: SystemSpec,
    spec_b: SystemSpec,
    coupling: str | OperatorMatrix = "exchange",
    g: float = 1.0,
    cap: int = DEFAULT_DIM_CAP,
) -> CompositeSystem:
    """Assemble the coupled pair and record conservation diagnostics.

    The diagnostics report how well the scaled coupling commutes with the
    summed shared charges and with the uncoupled energy: the former is the
    exact bookkeeping behind shared-charge conservation, the latter is only
    approximate and shrinks with g.
    """
    joint = spec_a.dim * spec_b.dim
    if joint > cap:
        raise CapacityError(f"joint dimension {joint} exceeds cap {cap}")
    names_a = [name for name, _ in spec_a.shared_charges]
    names_b = [name for name, _ in spec_b.shared_charges]
    if names_a != names_b:
        raise DimensionError(
            f"shared charges must pair by name: {names_a} vs {names_b}"
        )
    if isinstance(coupling, str):
        if coupling == "exchange":
            h_ab = exchange_coupling(spec_a, spec_b)
        elif coupling == "ising":
            h_ab = ising_coupling(spec_a, spec_b)
        else:
            raise DimensionError(f"unknown coupling kind {coupling!r}")
    else:
        h_ab = coupling
        if h_ab.dim != joint:
            raise DimensionError(f"coupling dim {h_ab.dim} != joint dim {joint}")
        if not h_ab.hermitian:
            raise RealityError("custom coupling must be Hermitian")
    if not h_ab.real_in_basis:
        raise RealityError(
            "coupling has complex entries; time-reversal invariance requires a "
            "real matrix in the computational basis"
        )
    dims = (spec_a.dim, spec_b.dim)
    h_a = embed(spec_a.hamiltonian, "A", dims, cap=cap)
    h_b = embed(spec_b.hamiltonian, "B", dims, cap=cap)
    # Reality of the total is auto-detected so that a (deliberately) complex
    # side Hamiltonian is diagnosable via verify_assumptions instead of
    # failing construction; builder-made specs always come out real.
    total = OperatorMatrix.from_entries(
        h_a.entries + h_b.entries + g * h_ab.entries,
        hermitian=True,
        real_in_basis=None,
    )
    scaled = g * h_ab
    conservation = {
        "[g*H_AB, H_A+H_B]": commutator_norm(scaled, h_a + h_b),
    }
    for name, op_a in spec_a.shared_charges:
        op_b = dict(spec_b.shared_charges)[name]
        total_charge = embed(op_a, "A", dims, cap=cap) + embed(op_b, "B", dims, cap=cap)
        conservation[f"[g*H_AB, {name}_A+{name}_B]"] = commutator_norm(
            scaled, total_charge
        )
    return CompositeSystem(
        spec_a=spec_a,
        spec_b=spec_b,
        coupling=h_ab,
        g=float(g),
        total_hamiltonian=total,
        conservation=conservation,
    )


@dataclass(frozen=True)
class DiagnosticEntry:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class AssumptionReport:
    entries: tuple[DiagnosticEntry, ...]

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)


def verify_assumptions(cs: CompositeSystem) -> AssumptionReport:
    """Diagnose every commutation and reality assumption without raising.

    Returns pairwise commutator norms for each side's generator family,
    reality residuals of both Hamiltonians and the coupling, and the
    shared-charge name pairing, each against its tolerance.
    """
    entries: list[DiagnosticEntry] = []
    for spec in (cs.spec_a, cs.spec_b):
        named = generators(spec)
        for i in range(len(named)):
            for j in range(i + 1, len(named)):
                norm = commutator_norm(named[i][1], named[j][1])
                tol = CHARGE_TOL * _charge_scale(named[i][1], named[j][1])
                entries.append(
                    DiagnosticEntry(
                        f"{spec.label}: [{named[i][0]}, {named[j][0]}]",
                        norm,
                        tol,
                        norm <= tol,
                    )
                )
        resid = float(np.max(np.abs(spec.hamiltonian.entries.imag)))
        tol = 1e-12 * max(spec.hamiltonian.scale, 1e-300)
        entries.append(
            DiagnosticEntry(f"{spec.label}: Im(H)", resid, tol, resid <= tol)
        )
    resid = float(np.max(np.abs(cs.coupling.entries.imag)))
    tol = 1e-12 * max(cs.coupling.scale, 1e-300)
    entries.append(DiagnosticEntry("coupling: Im(H_AB)", resid, tol, resid <= tol))
    names_match = [n for n, _ in cs.spec_a.shared_charges] == [
        n for n, _ in cs.spec_b.shared_charges
    ]
    entries.append(
        DiagnosticEntry(
            "shared charge pairing", 0.0 if names_match else 1.0, 0.5, names_match
        )
    )
    return AssumptionReport(tuple(entries))
