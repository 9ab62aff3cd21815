"""Symplectic Pauli algebra on bit masks.

A Pauli string on n sites is stored as a pair of n-bit masks plus a power
of i.  Site k corresponds to the k-th character of a text label ("XIZYI"
reads site 0 = X, site 3 = Y) and to bit k of each mask, so the label
"XIZYI" has x_mask 0b01001 (sites 0 and 3) and z_mask 0b01100 (sites 2
and 3).  The operator represented is

    i**phase_exp * W(x_0, z_0) (x) W(x_1, z_1) (x) ...

where W(1,0)=X, W(0,1)=Z, W(1,1)=Y, W(0,0)=I.  In matrices, site 0 is
the most significant index bit (first Kronecker factor).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

_LETTER_TO_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_TO_LETTER = {v: k for k, v in _LETTER_TO_BITS.items()}
_I_POWERS = (1 + 0j, 1j, -1 + 0j, -1j)

DEFAULT_QUBIT_CAP = 14
_CAP_ENV = "QCHANC_CAP"


def qubit_cap(cap: int | None = None) -> int:
    """Resolve the dense-matrix qubit cap (argument, else env, else default)."""
    if cap is not None:
        return cap
    env = os.environ.get(_CAP_ENV)
    return int(env) if env else DEFAULT_QUBIT_CAP


def _check_cap(n: int, cap: int | None, what: str) -> None:
    limit = qubit_cap(cap)
    if n > limit:
        raise ValueError(f"{what} needs {n} qubits, above the cap of {limit}")


@dataclass(frozen=True, slots=True)
class PauliString:
    """One Pauli string: masks are over sites, phase_exp is a power of i mod 4."""

    n: int
    x_mask: int
    z_mask: int
    phase_exp: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one site")
        full = (1 << self.n) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise ValueError("mask exceeds the declared number of sites")
        object.__setattr__(self, "phase_exp", self.phase_exp % 4)

    def bare(self) -> "PauliString":
        """The same string with the i-power stripped."""
        if self.phase_exp == 0:
            return self
        return PauliString(self.n, self.x_mask, self.z_mask, 0)

    def key(self) -> tuple[int, int]:
        return (self.x_mask, self.z_mask)

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def phase(self) -> complex:
        return _I_POWERS[self.phase_exp]

    def dagger(self) -> "PauliString":
        # the bare string is Hermitian, only the i-power conjugates
        return PauliString(self.n, self.x_mask, self.z_mask, -self.phase_exp)

    def label(self) -> str:
        return "".join(
            _BITS_TO_LETTER[(self.x_mask >> k) & 1, (self.z_mask >> k) & 1]
            for k in range(self.n)
        )

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)


def from_label(label: str, phase_exp: int = 0) -> PauliString:
    """Build a PauliString from an IXYZ text label (site 0 is the first char)."""
    if not label:
        raise ValueError("empty label")
    x = z = 0
    for k, ch in enumerate(label):
        try:
            xb, zb = _LETTER_TO_BITS[ch]
        except KeyError:
            raise ValueError(f"bad Pauli letter {ch!r} in {label!r}") from None
        x |= xb << k
        z |= zb << k
    return PauliString(len(label), x, z, phase_exp)


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Product a*b with exact phase tracking.

    Per site, with W(x,z) = i**(xz) X**x Z**z, the product picks up
    i**(x1 z1 + x2 z2 + 2 z1 x2 - x3 z3) where (x3, z3) are the XORed bits.
    """
    if a.n != b.n:
        raise ValueError(f"site counts differ: {a.n} vs {b.n}")
    x3 = a.x_mask ^ b.x_mask
    z3 = a.z_mask ^ b.z_mask
    d = (
        (a.x_mask & a.z_mask).bit_count()
        + (b.x_mask & b.z_mask).bit_count()
        + 2 * (a.z_mask & b.x_mask).bit_count()
        - (x3 & z3).bit_count()
    )
    return PauliString(a.n, x3, z3, a.phase_exp + b.phase_exp + d)


def weight(p: PauliString) -> int:
    """Number of non-identity sites."""
    return (p.x_mask | p.z_mask).bit_count()


def _state_masks(p: PauliString) -> tuple[int, int]:
    # site k maps to state bit (n-1-k): site 0 is the most significant bit
    xs = zs = 0
    for k in range(p.n):
        if (p.x_mask >> k) & 1:
            xs |= 1 << (p.n - 1 - k)
        if (p.z_mask >> k) & 1:
            zs |= 1 << (p.n - 1 - k)
    return xs, zs


def to_matrix(p: PauliString, cap: int | None = None) -> np.ndarray:
    """Dense 2^n x 2^n matrix of the string (entries are exact units)."""
    _check_cap(p.n, cap, "to_matrix")
    dim = 1 << p.n
    xs, zs = _state_masks(p)
    cols = np.arange(dim, dtype=np.int64)
    rows = cols ^ xs
    lead = _I_POWERS[(p.phase_exp + (p.x_mask & p.z_mask).bit_count()) % 4]
    signs = 1 - 2 * (np.bitwise_count(cols & zs) & 1).astype(np.int64)
    m = np.zeros((dim, dim), dtype=complex)
    m[rows, cols] = lead * signs
    return m


@dataclass(slots=True)
class PauliSum:
    """Linear combination of Pauli strings; terms may be non-canonical."""

    n: int
    terms: list[tuple[complex, PauliString]]

    def __post_init__(self):
        for _, p in self.terms:
            if p.n != self.n:
                raise ValueError("term site count differs from the sum's")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n != self.n:
            raise ValueError("site counts differ")
        return PauliSum(self.n, list(self.terms) + list(other.terms))

    def scaled(self, c: complex) -> "PauliSum":
        return PauliSum(self.n, [(c * a, p) for a, p in self.terms])

    def __mul__(self, other: "PauliSum") -> "PauliSum":
        if other.n != self.n:
            raise ValueError("site counts differ")
        out = [
            (a * b, multiply(p, q))
            for a, p in self.terms
            for b, q in other.terms
        ]
        return PauliSum(self.n, out)

    def dagger(self) -> "PauliSum":
        return PauliSum(self.n, [(np.conj(a), p.dagger()) for a, p in self.terms])

    def to_matrix(self, cap: int | None = None) -> np.ndarray:
        _check_cap(self.n, cap, "PauliSum.to_matrix")
        m = np.zeros((1 << self.n, 1 << self.n), dtype=complex)
        for a, p in self.terms:
            m += a * to_matrix(p, cap)
        return m


def identity_sum(n: int, coeff: complex = 1.0) -> PauliSum:
    return PauliSum(n, [(complex(coeff), PauliString(n, 0, 0))])


def canonicalize_sum(s: PauliSum, tol: float = 1e-12) -> PauliSum:
    """Fold i-powers into coefficients, merge equal strings, drop tiny terms.

    Term order is the first appearance of each distinct string, which keeps
    the result deterministic for a given input.
    """
    acc: dict[tuple[int, int], complex] = {}
    for a, p in s.terms:
        k = p.key()
        acc[k] = acc.get(k, 0j) + a * p.phase()
    out = [
        (c, PauliString(s.n, x, z))
        for (x, z), c in acc.items()
        if abs(c) > tol
    ]
    return PauliSum(s.n, out)


def sums_close(a: PauliSum, b: PauliSum, tol: float = 1e-9) -> bool:
    ca, cb = canonicalize_sum(a, 0.0), canonicalize_sum(b, 0.0)
    da = {p.key(): c for c, p in ca.terms}
    for c, p in cb.terms:
        da[p.key()] = da.get(p.key(), 0j) - c
    return all(abs(v) <= tol for v in da.values())


def is_hermitian_sum(s: PauliSum, tol: float = 1e-10) -> bool:
    return sums_close(s, s.dagger(), tol)


def pauli_decompose(m: np.ndarray, n: int | None = None, tol: float = 1e-12,
                    cap: int | None = None) -> PauliSum:
    """Expand a dense matrix over bare Pauli strings, coeff = Tr(P^dag m)/2^n.

    Terms below tol are dropped; the kept terms reconstruct m within the
    truncation error.  Output order is by (z_mask, x_mask).
    """
    dim = m.shape[0]
    if m.shape != (dim, dim) or dim & (dim - 1):
        raise ValueError("matrix must be square with power-of-two dimension")
    if n is None:
        n = dim.bit_length() - 1
    if (1 << n) != dim:
        raise ValueError("dimension does not match the site count")
    _check_cap(n, cap, "pauli_decompose")

    cols = np.arange(dim, dtype=np.int64)
    terms: list[tuple[complex, PauliString]] = []
    for z_mask in range(dim):
        for x_mask in range(dim):
            p = PauliString(n, x_mask, z_mask)
            xs, zs = _state_masks(p)
            signs = 1 - 2 * (np.bitwise_count(cols & zs) & 1).astype(np.int64)
            lead = _I_POWERS[(-(x_mask & z_mask).bit_count()) % 4]
            coeff = lead * np.sum(signs * m[cols ^ xs, cols]) / dim
            if abs(coeff) > tol:
                terms.append((complex(coeff), p))
    return PauliSum(n, terms)
