"""Quantum registers, unitary gates, and destructive measurement.

A register is a complex vector over the computational basis indexed by
the boolean assignments of a finite set of named quantum variables.
The basis ordering is fixed: variables are sorted by name and the first
sorted name is the most significant bit, so for variables (a, b) the
amplitudes appear in the order |00>, |01>, |10>, |11> with the left bit
belonging to ``a``.  A register over the empty set is a single scalar.

Measurement is destructive: measuring variable ``r`` with outcome ``c``
keeps the amplitudes of basis states where ``r`` maps to ``c`` and
deletes the ``r`` coordinate entirely, producing a register over the
remaining variables.  The unnormalized projections for the two outcomes
satisfy the completeness condition M0*M0 + M1*M1 = Id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REGISTER_TOLERANCE = 1e-10
UNITARITY_TOLERANCE = 1e-10


class GateError(Exception):
    """Raised for malformed gates or gate files."""


@dataclass(frozen=True)
class UnitaryGate:
    """A named unitary acting on ``arity`` qubits.

    The matrix is 2^arity x 2^arity and must be unitary within
    ``UNITARITY_TOLERANCE``; wire 0 of the gate is the most significant
    bit of the matrix index.
    """

    name: str
    arity: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        dim = 2 ** self.arity
        mat = np.asarray(self.matrix, dtype=np.complex128)
        if mat.shape != (dim, dim):
            raise GateError(
                f"gate {self.name}: expected a {dim}x{dim} matrix, "
                f"got shape {mat.shape}")
        if not np.allclose(mat.conj().T @ mat, np.eye(dim),
                           atol=UNITARITY_TOLERANCE, rtol=0.0):
            raise GateError(f"gate {self.name}: matrix is not unitary")
        object.__setattr__(self, "matrix", mat)


_SQRT_HALF = 1.0 / np.sqrt(2.0)


def _builtin_gates() -> dict[str, UnitaryGate]:
    one = {
        "I": np.eye(2),
        "X": np.array([[0, 1], [1, 0]]),
        "Y": np.array([[0, -1j], [1j, 0]]),
        "Z": np.array([[1, 0], [0, -1]]),
        "H": _SQRT_HALF * np.array([[1, 1], [1, -1]]),
        "S": np.array([[1, 0], [0, 1j]]),
        "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]]),
    }
    two = {
        "CNOT": np.array([[1, 0, 0, 0],
                          [0, 1, 0, 0],
                          [0, 0, 0, 1],
                          [0, 0, 1, 0]]),
        "CZ": np.diag([1, 1, 1, -1]),
        "SWAP": np.array([[1, 0, 0, 0],
                          [0, 0, 1, 0],
                          [0, 1, 0, 0],
                          [0, 0, 0, 1]]),
    }
    gates = {}
    for name, mat in one.items():
        gates[name] = UnitaryGate(name, 1, np.asarray(mat, dtype=np.complex128))
    for name, mat in two.items():
        gates[name] = UnitaryGate(name, 2, np.asarray(mat, dtype=np.complex128))
    return gates


GATES: dict[str, UnitaryGate] = _builtin_gates()


def load_gates(path: str) -> dict[str, UnitaryGate]:
    """Parse a gate definition file.

    The format is stanza-based.  Each stanza starts with a header line

        gate NAME ARITY

    followed by 2^ARITY lines of 2^ARITY whitespace-separated matrix
    entries, each written as ``re,im``.  Blank lines separate stanzas
    and ``#`` starts a comment.  Non-unitary matrices are rejected.
    """
    gates: dict[str, UnitaryGate] = {}
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.split("#", 1)[0].rstrip() for ln in handle]
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        header = lines[i].split()
        if len(header) != 3 or header[0] != "gate":
            raise GateError(f"line {i + 1}: expected 'gate NAME ARITY', "
                            f"got {lines[i].strip()!r}")
        name = header[1]
        if not name[0].isupper():
            raise GateError(f"line {i + 1}: gate name {name!r} must start "
                            "with an uppercase letter")
        try:
            arity = int(header[2])
        except ValueError:
            raise GateError(f"line {i + 1}: bad arity {header[2]!r}") from None
        if arity < 1:
            raise GateError(f"line {i + 1}: arity must be positive")
        dim = 2 ** arity
        rows = []
        for k in range(dim):
            i += 1
            if i >= len(lines) or not lines[i].strip():
                raise GateError(f"gate {name}: expected {dim} matrix rows")
            cells = lines[i].split()
            if len(cells) != dim:
                raise GateError(f"gate {name} row {k + 1}: expected {dim} "
                                f"entries, got {len(cells)}")
            row = []
            for cell in cells:
                parts = cell.split(",")
                if len(parts) != 2:
                    raise GateError(f"gate {name} row {k + 1}: entry "
                                    f"{cell!r} is not 're,im'")
                try:
                    row.append(complex(float(parts[0]), float(parts[1])))
                except ValueError:
                    raise GateError(f"gate {name} row {k + 1}: entry "
                                    f"{cell!r} is not 're,im'") from None
            rows.append(row)
        gates[name] = UnitaryGate(name, arity, np.array(rows))
        i += 1
    return gates


def gate_registry(extra: dict[str, UnitaryGate] | None = None,
                  ) -> dict[str, UnitaryGate]:
    """The built-in gates merged with ``extra`` (extras win on clashes)."""
    registry = dict(GATES)
    if extra:
        registry.update(extra)
    return registry


class QuantumRegister:
    """A complex vector over the basis indexed by named qubits.

    Instances are immutable by convention; all operations return new
    registers.  A register used in a configuration is either normalized
    or the all-zero vector (the residue of a probability-0 measurement
    branch), but intermediate unnormalized projections are representable
    too.
    """

    __slots__ = ("qvars", "amplitudes")

    def __init__(self, qvars: tuple[str, ...], amplitudes: np.ndarray) -> None:
        qvars = tuple(qvars)
        if list(qvars) != sorted(qvars):
            raise ValueError("quantum variables must be sorted")
        if len(set(qvars)) != len(qvars):
            raise ValueError("duplicate quantum variable")
        amps = np.asarray(amplitudes, dtype=np.complex128)
        if amps.shape != (2 ** len(qvars),):
            raise ValueError(
                f"expected {2 ** len(qvars)} amplitudes for {len(qvars)} "
                f"qubits, got shape {amps.shape}")
        self.qvars = qvars
        self.amplitudes = amps

    # -- construction ------------------------------------------------

    @staticmethod
    def empty() -> "QuantumRegister":
        """The scalar register 1 over no qubits."""
        return QuantumRegister((), np.ones(1))

    @staticmethod
    def zero(qvars: tuple[str, ...] = ()) -> "QuantumRegister":
        """The all-zero vector over ``qvars``."""
        return QuantumRegister(tuple(sorted(qvars)), np.zeros(2 ** len(qvars)))

    @staticmethod
    def basis_state(assignment: dict[str, int]) -> "QuantumRegister":
        """The basis vector |assignment>."""
        qvars = tuple(sorted(assignment))
        amps = np.zeros(2 ** len(qvars), dtype=np.complex128)
        idx = 0
        for name in qvars:
            idx = (idx << 1) | (assignment[name] & 1)
        amps[idx] = 1.0
        return QuantumRegister(qvars, amps)

    # -- basic queries -----------------------------------------------

    @property
    def num_qubits(self) -> int:
        return len(self.qvars)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_zero(self, tol: float = REGISTER_TOLERANCE) -> bool:
        return bool(np.all(np.abs(self.amplitudes) <= tol))

    def is_normalized(self, tol: float = REGISTER_TOLERANCE) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def validate(self, tol: float = REGISTER_TOLERANCE) -> None:
        """Require the register to be zero or normalized."""
        if not (self.is_zero(tol) or self.is_normalized(tol)):
            raise ValueError(
                f"register over {self.qvars} has norm {self.norm():.6g}; "
                "expected 0 or 1")

    def approx_equal(self, other: "QuantumRegister",
                     tol: float = REGISTER_TOLERANCE) -> bool:
        """Componentwise comparison; no global-phase quotient."""
        if self.qvars != other.qvars:
            return False
        return bool(np.all(np.abs(self.amplitudes - other.amplitudes) <= tol))

    def _axis(self, qvar: str) -> int:
        try:
            return self.qvars.index(qvar)
        except ValueError:
            raise KeyError(f"quantum variable {qvar!r} not in register") from None

    # -- structural operations ----------------------------------------

    def tensor_fresh(self, qvar: str, value: int) -> "QuantumRegister":
        """Adjoin a fresh qubit ``qvar`` in basis state ``value``."""
        if qvar in self.qvars:
            raise ValueError(f"quantum variable {qvar!r} already present")
        if value not in (0, 1):
            raise ValueError("initial value must be 0 or 1")
        new_qvars = tuple(sorted(self.qvars + (qvar,)))
        pos = new_qvars.index(qvar)
        shaped = self.amplitudes.reshape((2,) * self.num_qubits)
        pair = np.zeros(2, dtype=np.complex128)
        pair[value] = 1.0
        shaped = np.tensordot(shaped, pair, axes=0)
        # the fresh axis sits last; rotate it into sorted position
        axes = list(range(self.num_qubits))
        axes.insert(pos, self.num_qubits)
        shaped = shaped.transpose(axes)
        return QuantumRegister(new_qvars, shaped.reshape(-1))

    def tensor(self, other: "QuantumRegister") -> "QuantumRegister":
        """Tensor with a register over disjoint variables."""
        if set(self.qvars) & set(other.qvars):
            raise ValueError("registers share quantum variables")
        merged = tuple(sorted(self.qvars + other.qvars))
        shaped = np.tensordot(
            self.amplitudes.reshape((2,) * self.num_qubits),
            other.amplitudes.reshape((2,) * other.num_qubits), axes=0)
        source = self.qvars + other.qvars
        axes = [source.index(name) for name in merged]
        return QuantumRegister(merged, shaped.transpose(axes).reshape(-1))

    def rename(self, mapping: dict[str, str]) -> "QuantumRegister":
        """Apply a bijective renaming of quantum variables."""
        new_names = tuple(mapping.get(q, q) for q in self.qvars)
        if len(set(new_names)) != len(new_names):
            raise ValueError("renaming is not injective on this register")
        order = sorted(range(len(new_names)), key=lambda i: new_names[i])
        shaped = self.amplitudes.reshape((2,) * self.num_qubits)
        shaped = shaped.transpose(order) if self.qvars else shaped
        return QuantumRegister(tuple(sorted(new_names)), shaped.reshape(-1))

    # -- unitary application -------------------------------------------

    def apply_unitary(self, gate: UnitaryGate,
                      targets: tuple[str, ...]) -> "QuantumRegister":
        """Apply ``gate`` with gate wire i attached to ``targets[i]``.

        Targets must be distinct register variables and match the gate's
        arity.  The squared norm is preserved.
        """
        if len(targets) != gate.arity:
            raise ValueError(
                f"gate {gate.name} has arity {gate.arity}, "
                f"got {len(targets)} targets")
        if len(set(targets)) != len(targets):
            raise ValueError("gate targets must be distinct")
        axes = [self._axis(t) for t in targets]
        n = self.num_qubits
        shaped = self.amplitudes.reshape((2,) * n)
        rest = [a for a in range(n) if a not in axes]
        shaped = shaped.transpose(axes + rest)
        shaped = shaped.reshape(2 ** gate.arity, -1)
        shaped = gate.matrix @ shaped
        shaped = shaped.reshape((2,) * n)
        inverse = np.argsort(axes + rest)
        shaped = shaped.transpose(inverse)
        return QuantumRegister(self.qvars, shaped.reshape(-1))

    # -- destructive measurement ---------------------------------------

    def raw_measure(self, qvar: str, outcome: int) -> "QuantumRegister":
        """Unnormalized projection onto ``qvar = outcome`` with the
        coordinate deleted; lives over the remaining variables."""
        if outcome not in (0, 1):
            raise ValueError("outcome must be 0 or 1")
        axis = self._axis(qvar)
        shaped = self.amplitudes.reshape((2,) * self.num_qubits)
        taken = np.take(shaped, outcome, axis=axis)
        rest = tuple(q for q in self.qvars if q != qvar)
        return QuantumRegister(rest, np.ascontiguousarray(taken).reshape(-1))

    def outcome_probability(self, qvar: str, outcome: int) -> float:
        """Probability of observing ``outcome`` when measuring ``qvar``."""
        post = self.raw_measure(qvar, outcome)
        p = float(np.real(np.vdot(post.amplitudes, post.amplitudes)))
        return min(max(p, 0.0), 1.0) if p < 1.0 + 1e-9 else p

    def normalized_measure(self, qvar: str, outcome: int,
                           tol: float = REGISTER_TOLERANCE,
                           ) -> tuple[float, "QuantumRegister"]:
        """Measure ``qvar`` destructively.

        Returns ``(p, post)`` where ``p`` is the outcome probability and
        ``post`` is the normalized post-measurement register, or the
        zero register when ``p`` is zero.
        """
        raw = self.raw_measure(qvar, outcome)
        p = float(np.real(np.vdot(raw.amplitudes, raw.amplitudes)))
        p = min(max(p, 0.0), 1.0)
        if p <= tol * tol:
            return 0.0, QuantumRegister(raw.qvars,
                                        np.zeros_like(raw.amplitudes))
        return p, QuantumRegister(raw.qvars, raw.amplitudes / np.sqrt(p))

    # -- presentation ---------------------------------------------------

    def ket_text(self, digits: int = 6, cutoff: float = 1e-12) -> str:
        """Human-readable superposition, e.g. ``0.707107|01> + 0.707107|10>``."""
        if self.num_qubits == 0:
            return _format_amplitude(complex(self.amplitudes[0]), digits)
        if self.is_zero(cutoff):
            return "0"
        parts = []
        for idx, amp in enumerate(self.amplitudes):
            if abs(amp) <= cutoff:
                continue
            bits = format(idx, f"0{self.num_qubits}b")
            parts.append(f"{_format_amplitude(complex(amp), digits)}|{bits}>")
        return " + ".join(parts)

    def to_json(self) -> dict:
        return {
            "qvars": list(self.qvars),
            "amplitudes": [[float(a.real), float(a.imag)]
                           for a in self.amplitudes],
        }

    @staticmethod
    def from_json(data: dict) -> "QuantumRegister":
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        return QuantumRegister(tuple(data["qvars"]), amps)

    def __repr__(self) -> str:
        return f"QuantumRegister({self.qvars!r}, {self.ket_text()})"


def _format_amplitude(amp: complex, digits: int) -> str:
    if abs(amp.imag) < 10 ** (-digits - 2):
        return f"{amp.real:.{digits}g}"
    if abs(amp.real) < 10 ** (-digits - 2):
        return f"{amp.imag:.{digits}g}j"
    return f"({amp.real:.{digits}g}{amp.imag:+.{digits}g}j)"


def completeness_defect(num_qubits: int) -> float:
    """Largest deviation of M0*M0 + M1*M1 from the identity, measuring
    each coordinate of an ``num_qubits``-qubit register.

    The projections are materialized as explicit 2^(n-1) x 2^n matrices,
    so this is a direct matrix check of the completeness condition.
    """
    worst = 0.0
    qvars = tuple(f"q{i}" for i in range(num_qubits))
    dim = 2 ** num_qubits
    for qvar in qvars:
        total = np.zeros((dim, dim), dtype=np.complex128)
        for outcome in (0, 1):
            mat = measurement_matrix(qvars, qvar, outcome)
            total += mat.conj().T @ mat
        worst = max(worst, float(np.max(np.abs(total - np.eye(dim)))))
    return worst


def measurement_matrix(qvars: tuple[str, ...], qvar: str,
                       outcome: int) -> np.ndarray:
    """The raw measurement as an explicit 2^(n-1) x 2^n matrix in the
    canonical basis ordering."""
    qvars = tuple(sorted(qvars))
    n = len(qvars)
    axis = qvars.index(qvar)
    rows = 2 ** (n - 1)
    mat = np.zeros((rows, 2 ** n), dtype=np.complex128)
    for idx in range(2 ** n):
        bits = [(idx >> (n - 1 - k)) & 1 for k in range(n)]
        if bits[axis] != outcome:
            continue
        reduced = [b for k, b in enumerate(bits) if k != axis]
        row = 0
        for b in reduced:
            row = (row << 1) | b
        mat[row, idx] = 1.0
    return mat


def random_register(rng: np.random.Generator,
                    qvars: tuple[str, ...]) -> QuantumRegister:
    """A Haar-ish random normalized register over ``qvars``."""
    dim = 2 ** len(qvars)
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    vec /= np.linalg.norm(vec)
    return QuantumRegister(tuple(sorted(qvars)), vec)
