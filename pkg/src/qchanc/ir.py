"""Kraus-form channel IR.

A channel is a list of Kraus operators; each Kraus operator is a complex
combination of primitives.  Primitives are either Pauli strings (phases
restricted to powers of i; any other phase belongs in the coefficient) or
opaque references to externally supplied block encodings.  Dense semantics:
apply_channel(C, rho) = sum_i K_i rho K_i^dag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pauli import (
    PauliString,
    PauliSum,
    canonicalize_sum,
    from_label,
    is_hermitian_sum,
    qubit_cap,
    to_matrix,
)


class TypecheckError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class PauliUnitary:
    """A Pauli-string primitive; string.phase_exp carries any i-power."""

    string: PauliString

    @property
    def n(self) -> int:
        return self.string.n


@dataclass(frozen=True, slots=True)
class BlockEncRef:
    """Reference to an externally supplied block encoding.

    `alpha` is the declared scale factor and `anc` the ancilla count of the
    encoding unitary.  `matrix` is the encoded operator itself (2^n square),
    optional for costing but required for any dense evaluation.
    """

    handle: str
    n: int
    alpha: float
    anc: int
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.anc < 0:
            raise ValueError("anc must be nonnegative")
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (1 << self.n, 1 << self.n):
                raise ValueError("matrix shape does not match n")
            object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        if not isinstance(other, BlockEncRef):
            return NotImplemented
        return (self.handle, self.n, self.alpha, self.anc) == (
            other.handle,
            other.n,
            other.alpha,
            other.anc,
        )

    def __hash__(self):
        return hash((self.handle, self.n, self.alpha, self.anc))


Primitive = PauliUnitary | BlockEncRef


@dataclass(slots=True)
class KrausExpr:
    n: int
    terms: list[tuple[complex, Primitive]]

    @staticmethod
    def from_pauli_sum(s: PauliSum) -> "KrausExpr":
        return KrausExpr(s.n, [(c, PauliUnitary(p)) for c, p in s.terms])

    def pauli_sum(self) -> PauliSum:
        """View as a PauliSum; rejects opaque primitives."""
        out = []
        for c, prim in self.terms:
            if not isinstance(prim, PauliUnitary):
                raise TypecheckError("Kraus term is not a Pauli primitive")
            out.append((c, prim.string))
        return PauliSum(self.n, out)


@dataclass(slots=True)
class ChannelExpr:
    n: int
    kraus: list[KrausExpr]

    @staticmethod
    def from_pauli_sums(sums: list[PauliSum]) -> "ChannelExpr":
        if not sums:
            raise ValueError("need at least one Kraus operator")
        return ChannelExpr(sums[0].n, [KrausExpr.from_pauli_sum(s) for s in sums])


@dataclass(slots=True)
class LindbladSpec:
    """drho/dt = -i[H, rho] + sum_j (L rho L^dag - {L^dag L, rho}/2)."""

    n: int
    hamiltonian: PauliSum
    jumps: list[PauliSum] = field(default_factory=list)

    def __post_init__(self):
        if self.hamiltonian.n != self.n:
            raise TypecheckError("Hamiltonian site count differs from n")
        if not is_hermitian_sum(self.hamiltonian):
            raise TypecheckError("Hamiltonian must be Hermitian")
        for k, j in enumerate(self.jumps):
            if j.n != self.n:
                raise TypecheckError(f"jump {k} site count differs from n")


def typecheck(expr) -> int:
    """Check dimension consistency; returns the system size n."""
    if isinstance(expr, ChannelExpr):
        for i, k in enumerate(expr.kraus):
            if k.n != expr.n:
                raise TypecheckError(f"Kraus {i}: size {k.n} != channel size {expr.n}")
            typecheck(k)
        return expr.n
    if isinstance(expr, KrausExpr):
        for t, (coeff, prim) in enumerate(expr.terms):
            if not isinstance(prim, (PauliUnitary, BlockEncRef)):
                raise TypecheckError(f"term {t}: unknown primitive {type(prim).__name__}")
            if prim.n != expr.n:
                raise TypecheckError(
                    f"term {t} ({type(prim).__name__}): size {prim.n} != {expr.n}"
                )
        return expr.n
    if isinstance(expr, LindbladSpec):
        return expr.n
    raise TypecheckError(f"not an IR node: {type(expr).__name__}")


def eval_kraus(k: KrausExpr, cap: int | None = None) -> np.ndarray:
    """Dense matrix of one Kraus operator."""
    limit = qubit_cap(cap)
    if k.n > limit:
        raise ValueError(f"eval_kraus needs {k.n} qubits, above the cap of {limit}")
    out = np.zeros((1 << k.n, 1 << k.n), dtype=complex)
    for coeff, prim in k.terms:
        if isinstance(prim, PauliUnitary):
            out += coeff * to_matrix(prim.string, cap)
        else:
            if prim.matrix is None:
                raise TypecheckError(
                    f"block encoding {prim.handle!r} has no matrix to evaluate"
                )
            out += coeff * prim.matrix
    return out


def validate_density(rho: np.ndarray, n: int, tol: float = 1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (1 << n, 1 << n):
        raise ValueError("density matrix has the wrong shape")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError("density matrix trace is not 1")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def apply_channel(c: ChannelExpr, rho: np.ndarray, cap: int | None = None) -> np.ndarray:
    """sum_i K_i rho K_i^dag for a validated density input."""
    rho = validate_density(rho, c.n)
    out = np.zeros_like(rho)
    for k in c.kraus:
        m = eval_kraus(k, cap)
        out += m @ rho @ m.conj().T
    return out


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2)||a - b||_1 for Hermitian a, b."""
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def haar_states(n: int, count: int, seed: int = 7) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    dim = 1 << n
    out = []
    for _ in range(count):
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        v /= np.linalg.norm(v)
        out.append(np.outer(v, v.conj()))
    return out


def probe_states(n: int, samples: int = 32, seed: int = 7) -> list[np.ndarray]:
    """Computational basis states plus Haar-random pure states."""
    dim = 1 << n
    basis = []
    for i in range(dim):
        rho = np.zeros((dim, dim), dtype=complex)
        rho[i, i] = 1.0
        basis.append(rho)
    return basis + haar_states(n, samples, seed)


def channel_distance(a: ChannelExpr, b: ChannelExpr, samples: int = 32,
                     seed: int = 7, cap: int | None = None) -> float:
    """Max sampled trace distance between two channels (diamond-norm proxy)."""
    if a.n != b.n:
        raise TypecheckError("channel sizes differ")
    worst = 0.0
    for rho in probe_states(a.n, samples, seed):
        worst = max(worst, trace_distance(apply_channel(a, rho, cap),
                                          apply_channel(b, rho, cap)))
    return worst


# --- JSON forms ------------------------------------------------------------
#
# Term: {"coeff": [re, im], "pauli": "XIZYI", "phase_exp": 0}
#   or  {"coeff": [re, im], "blockenc": {"handle", "n", "alpha", "anc", "matrix"}}
# Channel: {"n": n, "kraus": [[term, ...], ...]}
# Lindblad: {"n": n, "H": [term, ...], "jumps": [[term, ...] | {"matrix": m}, ...]}


def _c2pair(c: complex) -> list[float]:
    return [float(np.real(c)), float(np.imag(c))]


def _pair2c(p) -> complex:
    return complex(p[0], p[1])


def matrix_to_json(m: np.ndarray) -> list:
    return [[_c2pair(x) for x in row] for row in np.asarray(m, dtype=complex)]


def matrix_from_json(rows) -> np.ndarray:
    return np.array([[_pair2c(x) for x in row] for row in rows], dtype=complex)


def term_to_json(coeff: complex, prim: Primitive) -> dict:
    if isinstance(prim, PauliUnitary):
        return {
            "coeff": _c2pair(coeff),
            "pauli": prim.string.label(),
            "phase_exp": prim.string.phase_exp,
        }
    return {
        "coeff": _c2pair(coeff),
        "blockenc": {
            "handle": prim.handle,
            "n": prim.n,
            "alpha": prim.alpha,
            "anc": prim.anc,
            "matrix": None if prim.matrix is None else matrix_to_json(prim.matrix),
        },
    }


def term_from_json(d: dict) -> tuple[complex, Primitive]:
    coeff = _pair2c(d["coeff"])
    if "pauli" in d:
        return coeff, PauliUnitary(from_label(d["pauli"], d.get("phase_exp", 0)))
    be = d["blockenc"]
    matrix = None if be.get("matrix") is None else matrix_from_json(be["matrix"])
    return coeff, BlockEncRef(be["handle"], be["n"], be["alpha"], be["anc"], matrix)


def channel_to_json(c: ChannelExpr) -> dict:
    return {
        "n": c.n,
        "kraus": [[term_to_json(a, p) for a, p in k.terms] for k in c.kraus],
    }


def channel_from_json(d: dict) -> ChannelExpr:
    c = ChannelExpr(
        int(d["n"]),
        [KrausExpr(int(d["n"]), [term_from_json(t) for t in terms]) for terms in d["kraus"]],
    )
    typecheck(c)
    return c


def pauli_sum_to_json(s: PauliSum) -> list:
    return [term_to_json(c, PauliUnitary(p)) for c, p in s.terms]


def pauli_sum_from_json(terms, n: int) -> PauliSum:
    out = []
    for t in terms:
        coeff, prim = term_from_json(t)
        if not isinstance(prim, PauliUnitary):
            raise TypecheckError("expected a Pauli term")
        out.append((coeff, prim.string))
    return PauliSum(n, out)


def lindblad_to_json(spec: LindbladSpec) -> dict:
    return {
        "n": spec.n,
        "H": pauli_sum_to_json(spec.hamiltonian),
        "jumps": [pauli_sum_to_json(j) for j in spec.jumps],
    }


def lindblad_from_json(d: dict) -> LindbladSpec:
    from .pauli import pauli_decompose

    n = int(d["n"])
    ham = pauli_sum_from_json(d.get("H", []), n)
    jumps = []
    for j in d.get("jumps", []):
        if isinstance(j, dict) and "matrix" in j:
            # dense jump operators are accepted and expanded on ingest
            jumps.append(pauli_decompose(matrix_from_json(j["matrix"]), n))
        else:
            jumps.append(pauli_sum_from_json(j, n))
    return LindbladSpec(n, ham, jumps)


def channel_canonical_sums(c: ChannelExpr, tol: float = 1e-12) -> list[PauliSum]:
    """Canonical Pauli sums for an all-Pauli channel (used by rewrites)."""
    return [canonicalize_sum(k.pauli_sum(), tol) for k in c.kraus]
