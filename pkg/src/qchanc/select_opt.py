"""SELECT optimizations.

Technique I: conditional flattening.  Exact-address multiplexors are lowered
to a rooted unary-iteration walk (one flag ancilla per tree level plus a root
flag, N-1 Toffoli pairs for N branches,每 body fired by a single control);
individual multi-controlled gates are lowered to Toffoli ladders.

Technique II: monotone-control decomposition.  Pauli targets are assigned
addresses so that the product of the gates g_c over the set bits c of an
address reproduces the target there; generators of a well-chosen subspace sit
at one-hot addresses and products come for free.  The address assignment is
the greedy heuristic over symplectic (x|z) vectors; phase corrections from
reordered Pauli products are folded into the prepared coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .circuits import (
    Controlled,
    Gate,
    PauliGate,
    ToffoliCompute,
    ToffoliUncompute,
    controlled,
)
from .pauli import PauliString, PauliSum, canonicalize_sum, multiply, weight


@dataclass(slots=True)
class ModeTable:
    """Address assignment: address -> (target Pauli, phase exponent)."""

    s: int
    entries: dict[int, tuple[PauliString, int]] = field(default_factory=dict)


@dataclass(slots=True)
class GTable:
    """Monotone factors: address -> (g, theta); gates fire on set bits."""

    s: int
    entries: dict[int, tuple[PauliString, int]] = field(default_factory=dict)


def mode_table_json(m: ModeTable) -> list:
    return [{"address": format(a, f"0{m.s}b"), "target": p.label(),
             "phase_exp": phi} for a, (p, phi) in sorted(m.entries.items())]


def g_table_json(g: GTable) -> list:
    return [{"address": format(a, f"0{g.s}b"), "g": p.label(), "theta": th}
            for a, (p, th) in sorted(g.entries.items())]


class Gf2Span:
    """Row space over F2 with pivot elimination and combination tracking."""

    def __init__(self):
        self.pivots: dict[int, tuple[int, int]] = {}

    def _reduce(self, vec: int) -> tuple[int, int]:
        comb = 0
        while vec:
            top = vec.bit_length() - 1
            if top not in self.pivots:
                break
            row, tag = self.pivots[top]
            vec ^= row
            comb ^= tag
        return vec, comb

    def contains(self, vec: int) -> bool:
        return self._reduce(vec)[0] == 0

    def decode(self, vec: int) -> int:
        red, comb = self._reduce(vec)
        if red:
            raise ValueError("vector is not in the span")
        return comb

    def insert(self, vec: int, tag: int) -> bool:
        red, comb = self._reduce(vec)
        if red == 0:
            return False
        self.pivots[red.bit_length() - 1] = (red, comb ^ tag)
        return True


def _vec(x: int, z: int, n: int) -> int:
    return (x << n) | z


def _vw(x: int, z: int) -> int:
    return (x | z).bit_count()


def greedy_basis_selection(rows: list[tuple[int, int]], s: int, n: int):
    """Pick generator rows maximizing covered targets per Pauli weight.

    Returns (selected row indices, set of covered row indices).  Stops at s
    generators, full coverage, or when accepting the best candidate would
    leave more uncovered rows than free non-subspace addresses.
    """
    total = len(rows)
    span = Gf2Span()
    chosen: list[int] = []
    covered: set[int] = set()
    while len(chosen) < s and len(covered) < total:
        best = None
        best_score = 0.0
        for i, (x, z) in enumerate(rows):
            if i in covered or span.contains(_vec(x, z, n)):
                continue
            probe = Gf2Span()
            probe.pivots = dict(span.pivots)
            probe.insert(_vec(x, z, n), 0)
            newly = [j for j in range(total) if j not in covered
                     and probe.contains(_vec(rows[j][0], rows[j][1], n))]
            free_after = (1 << s) - (1 << (len(chosen) + 1))
            if free_after < total - len(covered) - len(newly):
                continue
            score = len(newly) / _vw(x, z)
            if best is None or score > best_score + 1e-12:
                best, best_score = (i, newly), score
        if best is None:
            break
        i, newly = best
        span.insert(_vec(rows[i][0], rows[i][1], n), 1 << len(chosen))
        chosen.append(i)
        covered.update(newly)
    return chosen, covered


def assign_additional_modes(entries: dict, generators: list[tuple[int, int]],
                            remaining: list, s: int, n: int,
                            assigned_weights: dict) -> None:
    """Place uncovered rows at free addresses, minimizing weight mismatch.

    `remaining` holds records (x, z, payload) in sorted order; `entries` maps
    address -> payload and is extended in place.  `assigned_weights` maps
    address -> target weight for the fallback sort key.
    """
    d = len(generators)
    r = s - d

    def bofu(u: int) -> tuple[int, int]:
        x = z = 0
        for i in range(d):
            if (u >> i) & 1:
                x ^= generators[i][0]
                z ^= generators[i][1]
        return x, z

    rem = list(remaining)

    def place(addr: int, rec) -> None:
        entries[addr] = rec[2]
        assigned_weights[addr] = _vw(rec[0], rec[1])

    for mp in range(1, 1 << r):
        if not rem:
            break
        avail = list(range(1, 1 << d))
        if len(rem) > ((1 << r) - mp + 1) * ((1 << d) - 1):
            v0 = min(rem, key=lambda rec: _vw(rec[0], rec[1]))
            place(mp << d, v0)
            rem.remove(v0)
            base = (v0[0], v0[1])
        else:
            base = (0, 0)
        refs = {u: (base[0] ^ bofu(u)[0], base[1] ^ bofu(u)[1]) for u in avail}
        while rem and avail:
            best = None
            for rec in rem:
                for u in avail:
                    mm = _vw(rec[0] ^ refs[u][0], rec[1] ^ refs[u][1])
                    if best is None or mm < best[0] or (mm == best[0]
                                                        and u < best[1]):
                        best = (mm, u, rec)
            _, u, rec = best
            place((mp << d) | u, rec)
            rem.remove(rec)
            avail.remove(u)

    if rem:
        free = [c for c in range(1, 1 << s) if c not in entries]
        while rem and free:
            free.sort(key=lambda c: (c.bit_count(),
                                     sum(w for a, w in assigned_weights.items()
                                         if a < c), c))
            c = free.pop(0)
            u = c & ((1 << d) - 1)
            bx, bz = bofu(u)
            rec = min(rem, key=lambda rec: _vw(rec[0] ^ bx, rec[1] ^ bz))
            place(c, rec)
            rem.remove(rec)
    if rem:
        raise RuntimeError("ran out of control addresses")


def invert_modes_with_phases(modes: ModeTable):
    """Peel assigned targets into monotone factors (Alg: subset-XOR).

    Returns (GTable, phi_ad) where phi_ad[b] is the phase exponent to fold
    into the prepared coefficient at address b so that the ordered product of
    the g factors over the set bits of b reproduces i^{phi_b} P_b exactly.
    """
    if not modes.entries:
        return GTable(modes.s), {}
    n = next(iter(modes.entries.values()))[0].n
    g: dict[int, PauliString] = {}
    if 0 in modes.entries and not modes.entries[0][0].is_identity():
        p0 = modes.entries[0][0]
        g[0] = PauliString(n, p0.x_mask, p0.z_mask)
    for b in sorted(modes.entries):
        if b == 0:
            continue
        p, _ = modes.entries[b]
        gx, gz = p.x_mask, p.z_mask
        for c, q in g.items():
            if c != b and (c & b) == c:
                gx ^= q.x_mask
                gz ^= q.z_mask
        if gx or gz:
            g[b] = PauliString(n, gx, gz)
    phi_ad: dict[int, int] = {}
    for b in sorted(modes.entries):
        p, phi = modes.entries[b]
        acc = PauliString(n, 0, 0, 0)
        for c in sorted(g):
            if (c & b) == c:
                acc = multiply(g[c], acc)
        if (acc.x_mask, acc.z_mask) != (p.x_mask, p.z_mask):
            raise RuntimeError(f"mode inversion failed at address {b:b}")
        phi_ad[b] = (phi - acc.phase_exp) % 4
    table = GTable(modes.s, {b: (q, 0) for b, q in g.items()})
    return table, phi_ad


def optimize_pauli_select(terms: list[tuple[complex, PauliString]]):
    """Assign addresses and monotone factors for a Pauli-sum SELECT.

    Returns (ModeTable, GTable, s, permuted) where permuted maps address ->
    phase-corrected coefficient for the PREPARE stage.
    """
    if not terms:
        raise ValueError("empty term list")
    n = terms[0][1].n
    canon = canonicalize_sum(PauliSum(n, list(terms)))
    if not canon.terms:
        raise ValueError("all coefficients vanish")
    m = len(canon.terms)
    s = max(1, math.ceil(math.log2(m)))

    id_coeff = None
    targets = []
    for c, p in canon.terms:
        if p.is_identity():
            id_coeff = c
        else:
            targets.append((c, p))

    anchor = None
    if id_coeff is None and len(targets) >= 2:
        anchor = min(targets, key=lambda t: (weight(t[1]), t[1].z_mask, t[1].x_mask))
        targets = [t for t in targets if t is not anchor]

    def shifted(p: PauliString) -> tuple[int, int]:
        if anchor is None:
            return p.x_mask, p.z_mask
        return p.x_mask ^ anchor[1].x_mask, p.z_mask ^ anchor[1].z_mask

    # records: (vec_x, vec_z, (coeff, target, phase))
    recs = [(shifted(p)[0], shifted(p)[1], (c, p, 0)) for c, p in targets]
    rows_z = sorted(recs, key=lambda r: (_vw(r[0], r[1]), r[1], r[0]))
    rows_x = sorted(recs, key=lambda r: (_vw(r[0], r[1]), r[0], r[1]))
    sel_on_x, cov_on_x = greedy_basis_selection([(r[0], r[1]) for r in rows_x], s, n)
    sel_on_z, cov_on_z = greedy_basis_selection([(r[0], r[1]) for r in rows_z], s, n)
    if len(cov_on_x) > len(cov_on_z):
        rows, sel, cov = rows_x, sel_on_x, cov_on_x
    else:
        rows, sel, cov = rows_z, sel_on_z, cov_on_z

    entries: dict[int, tuple] = {}
    assigned_weights: dict[int, int] = {}
    generators = [(rows[i][0], rows[i][1]) for i in sel]
    span = Gf2Span()
    for i, idx in enumerate(sel):
        entries[1 << i] = rows[idx][2]
        assigned_weights[1 << i] = _vw(rows[idx][0], rows[idx][1])
        span.insert(_vec(rows[idx][0], rows[idx][1], n), 1 << i)
    for j in cov:
        if j in sel:
            continue
        x, z = rows[j][0], rows[j][1]
        addr = span.decode(_vec(x, z, n))
        entries[addr] = rows[j][2]
        assigned_weights[addr] = _vw(x, z)
    remaining = [rows[j] for j in range(len(rows)) if j not in cov]
    assign_additional_modes(entries, generators, remaining, s, n, assigned_weights)

    mode = ModeTable(s)
    if anchor is not None:
        mode.entries[0] = (anchor[1], 0)
    elif id_coeff is not None:
        mode.entries[0] = (PauliString(n, 0, 0), 0)
    for addr, (c, p, phi) in entries.items():
        mode.entries[addr] = (p, phi)
    gtable, phi_ad = invert_modes_with_phases(mode)

    permuted: dict[int, complex] = {}
    coeffs = {0: anchor[0] if anchor is not None else id_coeff}
    for addr, (c, p, phi) in entries.items():
        coeffs[addr] = c
    for addr in sorted(mode.entries):
        c = coeffs.get(addr)
        if c is None:
            continue
        permuted[addr] = c * (1j) ** phi_ad[addr]
    return mode, gtable, s, permuted


def select_cost(g: GTable) -> int:
    """Weighted control cost: sum of hw(address) * weight(g)."""
    return sum(a.bit_count() * weight(p) for a, (p, _) in g.entries.items())


# --- circuit builders -------------------------------------------------------


def _addr_controls(addr: int, sel_qubits, polarity_for_zero: bool):
    s = len(sel_qubits)
    ctrls = []
    for k in range(s):
        bit = (addr >> (s - 1 - k)) & 1
        if bit:
            ctrls.append((sel_qubits[k], 1))
        elif polarity_for_zero:
            ctrls.append((sel_qubits[k], 0))
    return tuple(ctrls)


def build_monotone_select(g: GTable, sel_qubits, sys_qubits) -> list[Gate]:
    """One positively controlled Pauli per entry, ascending addresses."""
    gates: list[Gate] = []
    for addr in sorted(g.entries):
        p, _ = g.entries[addr]
        body = PauliGate(p, tuple(sys_qubits))
        gates.append(controlled(_addr_controls(addr, sel_qubits, False), body))
    return gates


def naive_select(branches: list[tuple[int, list[Gate]]], sel_qubits) -> list[Gate]:
    """Full-address (mixed polarity) controls around each branch body."""
    gates: list[Gate] = []
    for addr, bodies in branches:
        ctrls = _addr_controls(addr, sel_qubits, True)
        gates.extend(controlled(ctrls, b) for b in bodies)
    return gates


def flatten_select(branches: list[tuple[int, list[Gate]]], sel_qubits,
                   anc_qubits) -> list[Gate]:
    """Unary-iteration walk; each branch body fires on one flag control.

    Needs len(sel_qubits) + 1 ancillas: a root flag plus one per tree level.
    A full N-branch multiplexor costs exactly N-1 Toffoli pairs.
    """
    b = len(sel_qubits)
    if len(anc_qubits) < b + 1:
        raise ValueError("flattening needs one ancilla per level plus a root flag")
    by_addr = dict(branches)
    if any(not 0 <= a < (1 << b) for a in by_addr):
        raise ValueError("branch address out of range for the selector width")
    if b == 0:
        return [g for _, bodies in branches for g in bodies]
    gates: list[Gate] = []
    root = anc_qubits[0]
    gates.append(PauliGate(PauliString(1, 1, 0), (root,)))

    def descend(flag: int, level: int, prefix: int) -> None:
        if level == b:
            for body in by_addr.get(prefix, ()):
                gates.append(controlled(((flag, 1),), body))
            return
        shift = b - 1 - level
        used = [a for a in by_addr if (a >> (shift + 1)) == prefix]
        hi = [a for a in used if (a >> shift) & 1]
        lo = [a for a in used if not (a >> shift) & 1]
        if not used:
            return
        bit_q = sel_qubits[level]
        child = anc_qubits[level + 1]
        if hi and lo:
            gates.append(ToffoliCompute(flag, bit_q, child))
            descend(child, level + 1, (prefix << 1) | 1)
            gates.append(controlled(((flag, 1),), PauliGate(PauliString(1, 1, 0),
                                                            (child,))))
            descend(child, level + 1, prefix << 1)
            gates.append(controlled(((flag, 1),), PauliGate(PauliString(1, 1, 0),
                                                            (child,))))
            gates.append(ToffoliUncompute(flag, bit_q, child))
        else:
            pol = 1 if hi else 0
            gates.append(ToffoliCompute(flag, bit_q, child, p2=pol))
            descend(child, level + 1, (prefix << 1) | pol)
            gates.append(ToffoliUncompute(flag, bit_q, child, p2=pol))

    descend(root, 0, 0)
    gates.append(PauliGate(PauliString(1, 1, 0), (root,)))
    return gates


def flatten_controls(gate: Gate, anc_qubits) -> list[Gate]:
    """Toffoli-ladder lowering of one multi-controlled gate (c >= 2)."""
    if not isinstance(gate, Controlled) or len(gate.controls) <= 1:
        return [gate]
    ctrls = list(gate.controls)
    need = len(ctrls) - 1
    if len(anc_qubits) < need:
        raise ValueError("not enough ladder ancillas")
    out: list[Gate] = []
    (q1, p1), (q2, p2) = ctrls[0], ctrls[1]
    out.append(ToffoliCompute(q1, q2, anc_qubits[0], p1, p2))
    for i, (q, p) in enumerate(ctrls[2:]):
        out.append(ToffoliCompute(anc_qubits[i], q, anc_qubits[i + 1], 1, p))
    out.append(Controlled(((anc_qubits[need - 1], 1),), gate.body))
    for i, (q, p) in reversed(list(enumerate(ctrls[2:]))):
        out.append(ToffoliUncompute(anc_qubits[i], q, anc_qubits[i + 1], 1, p))
    out.append(ToffoliUncompute(q1, q2, anc_qubits[0], p1, p2))
    return out
