"""Beamsplitter unitaries and the entanglement-distribution (ED) gate.

A beamsplitter between modes a and b implements, under Heisenberg
conjugation U^dag (.) U,

    a -> cos(theta) a + i e^{i phi}  sin(theta) b
    b -> i e^{-i phi} sin(theta) a + cos(theta) b.

The ED gate distributes a primary-cavity excitation over the equal-weight
symmetric mode of all N cavities:

    U_ED a_0^dag U_ED^dag = (1/sqrt(N)) sum_n a_n^dag,

with every superposition coefficient fixed real positive 1/sqrt(N) by the
phase choice phi = pi/2 on each splitter (the chain construction is not
unique; this convention makes golden tests deterministic).  Sandwiching the
collective per-mode displacement between the gate and its inverse then
concentrates it on the primary cavity:

    U_ED^dag [ D_0(alpha) x ... x D_{N-1}(alpha) ] U_ED = D_0(sqrt(N) alpha).

verify_ed measures all of these relations instead of trusting the
construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument, UnsupportedCavityCount
from .fock import (
    DenseOperator,
    HilbertSpace,
    ladder,
    number_state,
    occupations,
    single_mode_ladder,
)
from .linalg import expm, max_abs, unitarity_defect
from .tensorops import apply_to_vector


@dataclass(frozen=True)
class BeamsplitterSpec:
    """One two-mode mixer: rotation angle theta, phase angle phi."""

    mode_a: int
    mode_b: int
    theta: float
    phi: float

    def __post_init__(self):
        if self.mode_a == self.mode_b:
            raise InvalidArgument("beamsplitter needs two distinct modes")
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise InvalidArgument("theta and phi must be finite")


@dataclass(frozen=True)
class EDPlan:
    """Ordered beamsplitter sequence realising the ED gate.

    ``sequence`` is in time order: the first splitter acts first on the
    state.  ``layers`` groups splitters that act on disjoint mode pairs and
    can run simultaneously; its length is the circuit depth (N-1 for the
    linear chain, log2 N for the binary tree).
    """

    scheme: str
    n_cavities: int
    sequence: tuple[BeamsplitterSpec, ...]
    layers: tuple[tuple[BeamsplitterSpec, ...], ...] = field(default=())

    def __post_init__(self):
        if self.scheme not in ("linear", "binary"):
            raise InvalidArgument(f"unknown ED scheme {self.scheme!r}")
        if len(self.sequence) != self.n_cavities - 1:
            raise InvalidArgument("an ED plan uses exactly N-1 beamsplitters")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def duration(self, g_bs: float) -> float:
        """Wall-clock gate time: depth x theta_max / g_bs."""
        if not self.sequence:
            return 0.0
        theta_max = max(spec.theta for spec in self.sequence)
        return self.depth * theta_max / g_bs


def beamsplitter_generator(cutoff: int, theta: float, phi: float) -> np.ndarray:
    """Pair-level generator i*theta*(e^{i phi} a^dag b + e^{-i phi} a b^dag)."""
    a = single_mode_ladder(cutoff)
    eye = np.eye(cutoff, dtype=complex)
    a_full = np.kron(a, eye)
    b_full = np.kron(eye, a)
    return 1j * theta * (
        np.exp(1j * phi) * (a_full.conj().T @ b_full)
        + np.exp(-1j * phi) * (a_full @ b_full.conj().T)
    )


@lru_cache(maxsize=256)
def _pair_unitary_cached(theta: float, phi: float, cutoff: int) -> np.ndarray:
    u = expm(beamsplitter_generator(cutoff, theta, phi))
    u.setflags(write=False)
    return u


def pair_unitary(spec: BeamsplitterSpec, cutoff: int) -> np.ndarray:
    """cutoff^2 x cutoff^2 unitary acting on the (mode_a, mode_b) pair."""
    return _pair_unitary_cached(spec.theta, spec.phi, cutoff)


def beamsplitter_unitary(space: HilbertSpace, spec: BeamsplitterSpec) -> DenseOperator:
    """Full-space beamsplitter unitary."""
    for m in (spec.mode_a, spec.mode_b):
        if not 0 <= m < space.n_modes:
            raise InvalidArgument(f"mode {m} outside the space")
    a = ladder(space, spec.mode_a).matrix
    b = ladder(space, spec.mode_b).matrix
    gen = 1j * spec.theta * (
        np.exp(1j * spec.phi) * (a.conj().T @ b) + np.exp(-1j * spec.phi) * (a @ b.conj().T)
    )
    return DenseOperator(space, expm(gen))


def linear_plan(n_cavities: int) -> EDPlan:
    """Chain of adjacent splitters distributing amplitude uniformly.

    The k-th splitter (0-based, connecting cavities k and k+1) keeps
    amplitude fraction 1/(N-k) in cavity k, i.e. theta_k =
    arccos(1/sqrt(N-k)); phi = pi/2 cancels the i factors so all final
    coefficients are real positive.
    """
    seq = tuple(
        BeamsplitterSpec(k, k + 1, math.acos(1.0 / math.sqrt(n_cavities - k)), math.pi / 2)
        for k in range(n_cavities - 1)
    )
    layers = tuple((spec,) for spec in seq)
    return EDPlan("linear", n_cavities, seq, layers)


def binary_plan(n_cavities: int) -> EDPlan:
    """Binary tree of 50:50 splitters; requires a power-of-two cavity count."""
    if n_cavities < 1 or (n_cavities & (n_cavities - 1)) != 0:
        raise UnsupportedCavityCount(
            f"binary scheme needs a power-of-two cavity count, got {n_cavities}"
        )
    seq: list[BeamsplitterSpec] = []
    layers: list[tuple[BeamsplitterSpec, ...]] = []
    offset = 1
    while offset < n_cavities:
        layer = tuple(
            BeamsplitterSpec(j, j + offset, math.pi / 4, math.pi / 2) for j in range(offset)
        )
        layers.append(layer)
        seq.extend(layer)
        offset *= 2
    return EDPlan("binary", n_cavities, tuple(seq), tuple(layers))


def make_plan(scheme: str, n_cavities: int) -> EDPlan:
    if scheme == "linear":
        return linear_plan(n_cavities)
    if scheme == "binary":
        return binary_plan(n_cavities)
    raise InvalidArgument(f"unknown ED scheme {scheme!r}")


def build_ed(space: HilbertSpace, scheme: str, n_cavities: int) -> tuple[DenseOperator, EDPlan]:
    """Dense ED unitary plus its plan.  N must equal the space's mode count."""
    if n_cavities != space.n_modes:
        raise InvalidArgument("n_cavities must equal the space's mode count")
    plan = make_plan(scheme, n_cavities)
    u = np.eye(space.dim, dtype=complex)
    for spec in plan.sequence:
        u = beamsplitter_unitary(space, spec).matrix @ u
    return DenseOperator(space, u), plan


def apply_plan(psi: np.ndarray, plan: EDPlan, space: HilbertSpace, inverse: bool = False) -> np.ndarray:
    """Apply the ED gate (or its inverse) to a state vector via pair contractions."""
    seq = plan.sequence[::-1] if inverse else plan.sequence
    out = psi
    for spec in seq:
        u = pair_unitary(spec, space.cutoff)
        if inverse:
            u = u.conj().T
        out = apply_to_vector(u, out, (spec.mode_a, spec.mode_b), space)
    return out


def apply_plan_rho(rho: np.ndarray, plan: EDPlan, space: HilbertSpace, inverse: bool = False) -> np.ndarray:
    """Conjugate a density matrix by the ED gate (or its inverse)."""
    from .tensorops import apply_left, apply_right_dag

    seq = plan.sequence[::-1] if inverse else plan.sequence
    out = rho
    for spec in seq:
        u = pair_unitary(spec, space.cutoff)
        if inverse:
            u = u.conj().T
        modes = (spec.mode_a, spec.mode_b)
        out = apply_right_dag(u, apply_left(u, out, modes, space), modes, space)
    return out


def single_photon_matrix(ed, space: HilbertSpace) -> np.ndarray:
    """M[j, i] = <1_j| U |1_i>; equals the ladder-conjugation transfer matrix.

    The ED defining relations in coefficient form read M[n, 0] = 1/sqrt(N)
    for every n, with c_{n n'} = M[n, n'] for n' >= 1 obeying the sum rule
    sum |c|^2 = 1 - 1/N row by row.
    """
    n = space.n_modes
    m = np.zeros((n, n), dtype=complex)
    for i in range(n):
        occ = [0] * n
        occ[i] = 1
        psi = number_state(space, occ).vector
        out = _apply_ed(ed, psi, space)
        for j in range(n):
            occ_j = [0] * n
            occ_j[j] = 1
            m[j, i] = out[space.index_of(occ_j)]
    return m


def _apply_ed(ed, psi: np.ndarray, space: HilbertSpace, inverse: bool = False) -> np.ndarray:
    if isinstance(ed, DenseOperator):
        mat = ed.matrix.conj().T if inverse else ed.matrix
        return mat @ psi
    if isinstance(ed, EDPlan):
        return apply_plan(psi, ed, space, inverse=inverse)
    raise InvalidArgument("ed must be a DenseOperator or an EDPlan")


@dataclass(frozen=True)
class EDVerification:
    """Residuals of the ED defining relations; serialises for the CLI."""

    n_cavities: int
    cutoff: int
    conjugation_residual: float
    dual_residual: float
    displacement_residual: float
    coefficient_column_residual: float
    sum_rule_residual: float
    unitarity_residual: float
    alpha: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return (
            self.conjugation_residual <= self.tolerance
            and self.dual_residual <= self.tolerance
            and self.displacement_residual <= self.tolerance
            and self.coefficient_column_residual <= self.tolerance
            and self.sum_rule_residual <= self.tolerance
            and self.unitarity_residual <= max(self.tolerance, 1e-10)
        )

    def to_dict(self) -> dict:
        return {
            "n_cavities": self.n_cavities,
            "cutoff": self.cutoff,
            "conjugation_residual": self.conjugation_residual,
            "dual_residual": self.dual_residual,
            "displacement_residual": self.displacement_residual,
            "coefficient_column_residual": self.coefficient_column_residual,
            "sum_rule_residual": self.sum_rule_residual,
            "unitarity_residual": self.unitarity_residual,
            "alpha": self.alpha,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def verify_ed(
    ed,
    n_cavities: int,
    space: HilbertSpace | None = None,
    alpha: complex = 0.05,
    max_fock: int = 3,
    tolerance: float = 1e-9,
) -> EDVerification:
    """Measure the ED defining relations on a DenseOperator or an EDPlan.

    Checks, in order: (i) conjugation U a_0^dag U^dag = (1/sqrt N) sum a_n^dag
    on the truncation-safe subspace (total occupation <= cutoff-2), (ii) the
    displacement-enhancement identity applied to Fock states |m,0,...,0> for
    m <= max_fock, and (iii) the extracted coefficient matrix against the
    uniform first column and the sum rule.
    """
    if isinstance(ed, DenseOperator):
        space = ed.space
    if space is None:
        raise InvalidArgument("an EDPlan needs an explicit space")
    if space.n_modes != n_cavities:
        raise InvalidArgument("space mode count must equal n_cavities")
    c = space.cutoff
    if max_fock > c - 2:
        raise InvalidArgument("max_fock must leave at least one level of headroom")

    # (iii) coefficient extraction from the single-photon sector
    m_mat = single_photon_matrix(ed, space)
    column_residual = max_abs(m_mat[:, 0] - 1.0 / math.sqrt(n_cavities))
    if n_cavities > 1:
        row_sums = np.sum(np.abs(m_mat[:, 1:]) ** 2, axis=1)
        sum_rule_residual = max_abs(row_sums - (1.0 - 1.0 / n_cavities))
    else:
        sum_rule_residual = 0.0

    # (i)/(Eq.-4 dual) conjugation relations on the safe subspace
    if isinstance(ed, DenseOperator):
        u = ed.matrix
        unit_res = unitarity_defect(u)
        a0d = ladder(space, 0, "raising").matrix
        sym = sum(ladder(space, k, "raising").matrix for k in range(n_cavities))
        sym = sym / math.sqrt(n_cavities)
        totals = occupations(space).sum(axis=1)
        safe = totals <= c - 2
        conj_res = max_abs((u @ a0d @ u.conj().T - sym)[:, safe])
        low_sum = sum(ladder(space, k, "lowering").matrix for k in range(n_cavities))
        dual = u.conj().T @ low_sum @ u - math.sqrt(n_cavities) * ladder(space, 0).matrix
        dual_res = max_abs(dual[:, totals <= c - 1])
    else:
        # plan path: measure the conjugation action on all safe basis states
        # with small total occupation (exact in exact arithmetic there).
        unit_res = max(
            (unitarity_defect(pair_unitary(s, c)) for s in ed.sequence), default=0.0
        )
        conj_res = 0.0
        dual_res = 0.0
        occ_table = occupations(space)
        totals = occ_table.sum(axis=1)
        probe = np.flatnonzero(totals <= min(2, c - 2))
        sqrt_n = math.sqrt(n_cavities)
        a_low = single_mode_ladder(c)
        for idx in probe:
            base = np.zeros(space.dim, dtype=complex)
            base[idx] = 1.0
            lhs = _apply_ed(ed, _raise_mode(_apply_ed(ed, base, space, inverse=True), 0, space), space)
            rhs = sum(_raise_mode(base, k, space) for k in range(n_cavities)) / sqrt_n
            conj_res = max(conj_res, float(np.linalg.norm(lhs - rhs)))
            # dual relation: U^dag (sum_n a_n) U = sqrt(N) a_0
            mid = _apply_ed(ed, base, space)
            mid = sum(apply_to_vector(a_low, mid, (k,), space) for k in range(n_cavities))
            lhs2 = _apply_ed(ed, mid, space, inverse=True)
            rhs2 = sqrt_n * apply_to_vector(a_low, base, (0,), space)
            dual_res = max(dual_res, float(np.linalg.norm(lhs2 - rhs2)))

    # (ii) displacement enhancement on Fock test states
    disp_res = 0.0
    d_single = _displacement_single(c, alpha)
    d_primary = _displacement_single(c, math.sqrt(n_cavities) * alpha)
    for m in range(0, max_fock + 1):
        occ = [0] * n_cavities
        occ[0] = m
        psi = number_state(space, occ).vector
        inside = _apply_ed(ed, psi, space)
        for mode in range(n_cavities):
            inside = apply_to_vector(d_single, inside, (mode,), space)
        lhs = _apply_ed(ed, inside, space, inverse=True)
        rhs = apply_to_vector(d_primary, psi, (0,), space)
        disp_res = max(disp_res, float(np.linalg.norm(lhs - rhs)))

    return EDVerification(
        n_cavities=n_cavities,
        cutoff=c,
        conjugation_residual=float(conj_res),
        dual_residual=float(dual_res),
        displacement_residual=float(disp_res),
        coefficient_column_residual=float(column_residual),
        sum_rule_residual=float(sum_rule_residual),
        unitarity_residual=float(unit_res),
        alpha=float(abs(alpha)),
        tolerance=tolerance,
    )


def _raise_mode(psi: np.ndarray, mode: int, space: HilbertSpace) -> np.ndarray:
    a_dag = single_mode_ladder(space.cutoff).conj().T
    return apply_to_vector(a_dag, psi, (mode,), space)


def _displacement_single(cutoff: int, alpha: complex) -> np.ndarray:
    a = single_mode_ladder(cutoff)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)
