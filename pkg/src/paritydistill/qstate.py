"""Dense density-matrix engine for one to four labelled qubits.

States carry an ordered tuple of role labels (for example ``("B1", "B2",
"C1", "C2")``) and every operation addresses qubits by label, so callers
never track tensor-slot positions by hand.  Matrices are dense complex128.
Unnormalized states are first class: measurement branches and non-unitary
distortions legitimately carry trace below or above one, so validation
checks hermiticity and positivity but not normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .constants import (
    EIGENVALUE_FLOOR,
    HERMITICITY_ATOL,
    RANK_ONE_RTOL,
    TRACE_EPSILON,
    UNITARITY_ATOL,
)
from .errors import DegenerateParameterError, UnknownLabelError, VanishingTraceError

MAX_QUBITS = 4

_SQRT_HALF = 1.0 / np.sqrt(2.0)
# Axis letters for einsum subscripts; 2 * MAX_QUBITS letters suffice.
_AXES = "abcdefgh"


@dataclass(frozen=True)
class SingleQubitOperator:
    """A 2x2 operator tagged with whether it is unitary.

    The tag is checked at construction time so downstream code can trust
    it when deciding whether an application preserves the trace.
    """

    matrix: np.ndarray
    unitary: bool

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)
        defect = np.max(np.abs(m.conj().T @ m - np.eye(2)))
        if self.unitary and defect > UNITARITY_ATOL:
            raise ValueError(f"operator tagged unitary has defect {defect:.3e}")
        if not self.unitary and defect <= UNITARITY_ATOL:
            # Tagging a unitary as non-unitary is harmless but hides an
            # invariant from callers; keep the tag truthful.
            object.__setattr__(self, "unitary", True)

    @property
    def dagger(self) -> "SingleQubitOperator":
        return SingleQubitOperator(self.matrix.conj().T, self.unitary)


def identity_op() -> SingleQubitOperator:
    return SingleQubitOperator(np.eye(2), True)


def pauli(axis: str) -> SingleQubitOperator:
    """Pauli operator for axis "x", "y" or "z"."""
    mats = {
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    try:
        return SingleQubitOperator(mats[axis], True)
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


def ry_minus_half_pi() -> SingleQubitOperator:
    """Rotation exp(+i pi Y / 4) = (I + iY)/sqrt(2).

    Maps |1> to |+> and |0> to -|->, i.e. swaps the roles of the Z and X
    bases; conjugation sends Z to -X.  This is the local rotation applied
    to a broker qubit before it is entangled with its client.
    """
    m = _SQRT_HALF * np.array([[1, 1], [-1, 1]], dtype=complex)
    return SingleQubitOperator(m, True)


def asymmetry_distortion(phi: float, delta: float, axis: str = "z") -> SingleQubitOperator:
    """Residual single-qubit distortion left by an unbalanced photonic link.

    The operator multiplies the computational components by
    ``(cos(phi) + sin(phi)) * exp(+i delta)`` and
    ``(cos(phi) - sin(phi)) * exp(-i delta)`` respectively: ``phi``
    encodes the transmission imbalance of the two collection paths and
    ``delta`` the optical path-length detuning.  It is non-unitary for
    ``phi != 0`` (the two eigenvalue magnitudes differ), which is what
    depresses downstream success probabilities by cos^2(2 phi).

    ``axis="x"`` returns the same construction conjugated into the X
    eigenbasis, which is the form the distortion takes after the broker
    basis swap.
    """
    d0 = (np.cos(phi) + np.sin(phi)) * np.exp(1j * delta)
    d1 = (np.cos(phi) - np.sin(phi)) * np.exp(-1j * delta)
    mz = np.diag([d0, d1]).astype(complex)
    unitary = abs(np.sin(phi)) <= UNITARITY_ATOL
    if axis == "z":
        return SingleQubitOperator(mz, unitary)
    if axis == "x":
        h = _SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=complex)
        return SingleQubitOperator(h @ mz @ h, unitary)
    raise ValueError(f"axis must be 'z' or 'x', got {axis!r}")


class DensityMatrix:
    """Labelled dense density matrix.

    Parameters
    ----------
    elements : array_like
        Square complex matrix of dimension 2**n for n qubits.
    labels : sequence of str
        Distinct role names, one per qubit, in tensor order.
    validate : bool
        When True (default), check hermiticity and the eigenvalue floor.
        Internal intermediate states skip the eigendecomposition.
    """

    __slots__ = ("_elements", "_labels")

    def __init__(self, elements, labels: Sequence[str], *, validate: bool = True):
        labels = tuple(labels)
        # zero qubits is the legal 1x1 leftover of measuring out a register
        if len(labels) > MAX_QUBITS:
            raise ValueError(f"supported qubit counts are 0..{MAX_QUBITS}, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be distinct, got {labels}")
        m = np.array(elements, dtype=complex)
        dim = 2 ** len(labels)
        if m.shape != (dim, dim):
            raise ValueError(f"expected shape {(dim, dim)} for labels {labels}, got {m.shape}")
        if validate:
            defect = np.max(np.abs(m - m.conj().T))
            if defect > HERMITICITY_ATOL:
                raise ValueError(f"matrix is not hermitian (defect {defect:.3e})")
            tr = m.trace()
            if not np.isfinite(tr) or tr.real < -TRACE_EPSILON:
                raise ValueError(f"trace must be finite and nonnegative, got {tr}")
            lo = np.linalg.eigvalsh(m)[0]
            if lo < EIGENVALUE_FLOOR:
                raise ValueError(f"matrix has eigenvalue {lo:.3e} below the floor")
        self._elements = m
        self._labels = labels

    @property
    def elements(self) -> np.ndarray:
        return self._elements

    @property
    def labels(self) -> tuple:
        return self._labels

    @property
    def n_qubits(self) -> int:
        return len(self._labels)

    @property
    def trace(self) -> float:
        return float(self._elements.trace().real)

    def index(self, label: str) -> int:
        try:
            return self._labels.index(label)
        except ValueError:
            raise UnknownLabelError(f"state carries {self._labels}, not {label!r}") from None

    def normalized(self) -> "DensityMatrix":
        tr = self.trace
        if tr < TRACE_EPSILON:
            raise VanishingTraceError(f"cannot normalize trace {tr:.3e}")
        return DensityMatrix(self._elements / tr, self._labels, validate=False)

    def diagonal(self) -> np.ndarray:
        return self._elements.diagonal().real.copy()

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self._elements.copy(), self._labels, validate=False)

    @classmethod
    def from_pure(cls, amplitudes, labels: Sequence[str]) -> "DensityMatrix":
        """Projector onto the given (normalized) state vector."""
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm < TRACE_EPSILON:
            raise VanishingTraceError("state vector has vanishing norm")
        v = v / norm
        return cls(np.outer(v, v.conj()), labels)

    def __repr__(self) -> str:
        return f"DensityMatrix(labels={self._labels}, trace={self.trace:.6g})"


class XMeasurement(NamedTuple):
    """Result of measuring one qubit in the X basis."""

    outcome: int
    probability: float
    post_state: DensityMatrix


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    """Tensor product; label sets must be disjoint."""
    overlap = set(a.labels) & set(b.labels)
    if overlap:
        raise ValueError(f"labels {sorted(overlap)} appear on both factors")
    return DensityMatrix(
        np.kron(a.elements, b.elements), a.labels + b.labels, validate=False
    )


def _embed(op: np.ndarray, position: int, n: int) -> np.ndarray:
    factors = [np.eye(2, dtype=complex)] * n
    factors[position] = op
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out


def apply_one_qubit(
    rho: DensityMatrix,
    op: SingleQubitOperator,
    target: str,
    *,
    normalize: bool = False,
) -> DensityMatrix:
    """Conjugate the state by a single-qubit operator on the target label.

    For a non-unitary operator the bare result is an unnormalized branch
    weight; pass ``normalize=True`` to divide by the trace, which raises
    when that trace vanishes (an impossible conditional state).
    """
    big = _embed(op.matrix, rho.index(target), rho.n_qubits)
    out = DensityMatrix(big @ rho.elements @ big.conj().T, rho.labels, validate=False)
    if normalize:
        if out.trace < TRACE_EPSILON:
            raise VanishingTraceError(
                f"conditioning on {target!r} leaves trace {out.trace:.3e}"
            )
        out = out.normalized()
    return out


def apply_cz(rho: DensityMatrix, target_a: str, target_b: str) -> DensityMatrix:
    """Controlled-Z between two labelled qubits (diagonal, trace exact)."""
    pa, pb = rho.index(target_a), rho.index(target_b)
    if pa == pb:
        raise ValueError("controlled-Z needs two distinct qubits")
    n = rho.n_qubits
    idx = np.arange(2**n)
    both = ((idx >> (n - 1 - pa)) & 1) & ((idx >> (n - 1 - pb)) & 1)
    phase = 1.0 - 2.0 * both
    return DensityMatrix(
        rho.elements * np.outer(phase, phase), rho.labels, validate=False
    )


def project_x_unnormalized(
    rho: DensityMatrix, target: str, outcome: int
) -> tuple[float, DensityMatrix]:
    """Project one qubit onto an X eigenstate and drop it.

    Outcome 0 selects |+>, outcome 1 selects |->.  Returns the absolute
    weight of the branch (the outcome probability when the input is
    normalized) and the unnormalized reduced state on the remaining
    labels.
    """
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    n = rho.n_qubits
    t = rho.index(target)
    v = np.array([1.0, 1.0 - 2.0 * outcome]) * _SQRT_HALF
    tensor_form = rho.elements.reshape((2,) * (2 * n))
    letters = _AXES[: 2 * n]
    keep = "".join(c for k, c in enumerate(letters) if k not in (t, n + t))
    reduced = np.einsum(
        f"{letters},{letters[t]},{letters[n + t]}->{keep}", tensor_form, v, v
    )
    dim = 2 ** (n - 1)
    remaining = tuple(l for l in rho.labels if l != target)
    out = DensityMatrix(reduced.reshape(dim, dim), remaining, validate=False)
    return out.trace, out


def measure_x(
    rho: DensityMatrix,
    target: str,
    *,
    rng: np.random.Generator | None = None,
    forced: int | None = None,
) -> XMeasurement:
    """Measure one qubit in the X basis and remove it from the state.

    Exactly one of ``rng`` (sample the outcome, consuming one uniform
    draw) and ``forced`` (postselect a branch) must be given.  The
    reported probability is the absolute branch weight, so the two
    outcomes sum to the input trace; the returned state is normalized.
    """
    if (rng is None) == (forced is None):
        raise ValueError("provide exactly one of rng= and forced=")
    total = rho.trace
    if total < TRACE_EPSILON:
        raise VanishingTraceError("cannot measure a state of vanishing trace")
    w0, post0 = project_x_unnormalized(rho, target, 0)
    w1, post1 = project_x_unnormalized(rho, target, 1)
    if forced is not None:
        outcome = forced
    else:
        outcome = 0 if rng.random() < w0 / total else 1
    weight, post = (w0, post0) if outcome == 0 else (w1, post1)
    if weight < TRACE_EPSILON:
        raise VanishingTraceError(
            f"X outcome {outcome} on {target!r} has vanishing probability"
        )
    return XMeasurement(outcome, weight, post.normalized())


def fidelity(rho: DensityMatrix, pure: DensityMatrix) -> float:
    """Fidelity <psi| rho |psi> / tr(rho) against a pure reference.

    The reference must be rank one (its top eigenvalue carries all but
    RANK_ONE_RTOL of its trace); mixed references are rejected because
    the shortcut formula would silently understate their fidelity.
    """
    if rho.labels != pure.labels:
        raise UnknownLabelError(
            f"label mismatch: {rho.labels} versus {pure.labels}"
        )
    ref_trace = pure.trace
    if ref_trace < TRACE_EPSILON:
        raise VanishingTraceError("reference state has vanishing trace")
    vals, vecs = np.linalg.eigh(pure.elements)
    if vals[-1] < (1.0 - RANK_ONE_RTOL) * ref_trace:
        raise DegenerateParameterError(
            f"reference is not pure: top eigenvalue {vals[-1]:.6g} of trace {ref_trace:.6g}"
        )
    total = rho.trace
    if total < TRACE_EPSILON:
        raise VanishingTraceError("state has vanishing trace")
    psi = vecs[:, -1]
    value = float(np.real(psi.conj() @ rho.elements @ psi)) / total
    return min(max(value, 0.0), 1.0)


def basis_state(bits: Sequence[int] | str, labels: Sequence[str]) -> DensityMatrix:
    """Computational basis state |bits> with the given labels.

    ``bits`` may be a bit string like "01" or a sequence of 0/1 ints.
    """
    if isinstance(bits, str):
        bits = tuple(int(c) for c in bits)
    bits = tuple(bits)
    if len(bits) != len(labels):
        raise ValueError("one bit per label required")
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"bits must be 0/1, got {bits}")
    idx = 0
    for b in bits:
        idx = (idx << 1) | b
    amps = np.zeros(2 ** len(bits))
    amps[idx] = 1.0
    return DensityMatrix.from_pure(amps, labels)


def plus_state(labels: Sequence[str]) -> DensityMatrix:
    """Product state |+...+>, the standard client reset."""
    dim = 2 ** len(tuple(labels))
    return DensityMatrix.from_pure(np.full(dim, 1.0 / np.sqrt(dim)), labels)


def bell_odd(labels: Sequence[str]) -> DensityMatrix:
    """Odd-parity Bell state (|01> + |10>)/sqrt(2)."""
    return DensityMatrix.from_pure([0, _SQRT_HALF, _SQRT_HALF, 0], labels)


def bell_even(labels: Sequence[str]) -> DensityMatrix:
    """Even-parity Bell state (|00> + |11>)/sqrt(2)."""
    return DensityMatrix.from_pure([_SQRT_HALF, 0, 0, _SQRT_HALF], labels)
