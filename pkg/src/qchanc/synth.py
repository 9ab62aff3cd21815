"""Circuit synthesis: LCU block encodings and the channel-LCU wrapper.

Each Pauli-sum Kraus operator K = sum_j y_j P_j becomes PREP_R, SELECT,
PREP_L-adjoint on a be_anc register, encoding K/alpha with alpha = sum|y_j|.
A channel is lowered by preparing kraus_sel amplitudes alpha_j/sqrt(sum a^2)
and multiplexing the per-Kraus encodings; the preparation is deliberately not
undone, since kraus_sel is traced out while be_anc is postselected to zero.
"""

from __future__ import annotations

import math

import numpy as np

from .circuits import (
    Circuit,
    Gate,
    OpaqueUnitary,
    PauliGate,
    StatePrep,
    StatePrepAdjoint,
)
from .ir import BlockEncRef, ChannelExpr, KrausExpr, PauliUnitary, TypecheckError, typecheck
from .rewrite import canonical_kraus
from .select_opt import (
    build_monotone_select,
    flatten_select,
    naive_select,
    optimize_pauli_select,
)

SELECT_MODES = ("naive", "optimized")


def prepare_pair(coeffs):
    """Split coefficients into preparation vectors.

    Returns (beta, c, d) with beta = sum|y_j|, c real and d complex unit
    vectors, beta * conj(c_j) * d_j = y_j, zero-padded to a power of two.
    """
    y = np.asarray(list(coeffs), dtype=complex)
    if y.size == 0 or not np.any(y):
        raise ValueError("prepare_pair needs at least one nonzero coefficient")
    width = 1 << max(0, math.ceil(math.log2(y.size)))
    y = np.pad(y, (0, width - y.size))
    mags = np.abs(y)
    beta = float(mags.sum())
    c = np.sqrt(mags / beta)
    phases = np.ones(width, dtype=complex)
    nz = mags > 0
    phases[nz] = y[nz] / mags[nz]
    return beta, c, c * phases


def _kraus_terms(k: KrausExpr):
    kc = canonical_kraus(k)
    paulis, blocks = [], []
    for coeff, prim in kc.terms:
        if isinstance(prim, PauliUnitary):
            paulis.append((coeff, prim.string))
        else:
            blocks.append((coeff, prim))
    return paulis, blocks


def _dilation_unitary(ref: BlockEncRef) -> np.ndarray | None:
    """Unitary completion of matrix/alpha; None when no matrix is attached."""
    if ref.matrix is None:
        return None
    ahat = ref.matrix / ref.alpha
    u, sv, vh = np.linalg.svd(ahat)
    if sv.max(initial=0.0) > 1.0 + 1e-9:
        raise ValueError(
            f"block encoding {ref.handle!r}: alpha is below the spectral norm")
    sv = np.clip(sv, 0.0, 1.0)
    comp = np.sqrt(1.0 - sv ** 2)
    if ref.anc == 0:
        if comp.max(initial=0.0) > 1e-6:
            raise ValueError(
                f"block encoding {ref.handle!r}: zero ancillas but the block "
                "is not unitary")
        return ahat
    dim = ahat.shape[0]
    left = np.zeros((2 * dim, 2 * dim), dtype=complex)
    left[:dim, :dim] = u
    left[dim:, dim:] = vh.conj().T
    right = np.zeros_like(left)
    right[:dim, :dim] = vh
    right[dim:, dim:] = u.conj().T
    mid = np.block([[np.diag(sv), np.diag(comp)],
                    [np.diag(comp), -np.diag(sv)]])
    return left @ mid @ right


def kraus_anc_width(k: KrausExpr, select_mode: str = "naive") -> int:
    """Ancilla qubits the encoding of this Kraus operator needs."""
    paulis, blocks = _kraus_terms(k)
    if blocks:
        return max(ref.anc for _, ref in blocks)
    m = len(paulis)
    if m == 0:
        return 0
    if m == 1 and paulis[0][0].imag == 0 and paulis[0][0].real > 0:
        return 0
    return max(1, math.ceil(math.log2(m)))


def encode_kraus_gates(k: KrausExpr, select_mode, anc_qubits, sys_qubits):
    """Block-encoding gates on the given qubits: (gates, alpha, anc_used)."""
    if select_mode not in SELECT_MODES:
        raise ValueError(f"unknown select mode {select_mode!r}")
    paulis, blocks = _kraus_terms(k)
    if blocks and paulis:
        raise TypecheckError("Kraus mixes Pauli and opaque primitives")
    if len(blocks) > 1:
        raise TypecheckError("LCU over multiple opaque encodings is not supported")
    if blocks:
        coeff, ref = blocks[0]
        if abs(coeff.imag) > 1e-15 or coeff.real <= 0:
            raise ValueError(
                "opaque block encodings take real positive coefficients; "
                "strip the phase with rule K2 first")
        if ref.anc > len(anc_qubits):
            raise ValueError("not enough ancilla qubits for the opaque encoding")
        # The dilation acts on one ancilla (its block index) plus the system;
        # any further declared ancillas idle at zero.
        qubits = tuple(sys_qubits) if ref.anc == 0 else (
            (anc_qubits[0],) + tuple(sys_qubits))
        return ([OpaqueUnitary(ref.handle, qubits, _dilation_unitary(ref))],
                coeff.real * ref.alpha, ref.anc)
    if not paulis:
        raise ValueError("cannot block-encode a zero Kraus operator")
    if len(paulis) == 1 and paulis[0][0].imag == 0 and paulis[0][0].real > 0:
        coeff, p = paulis[0]
        return [PauliGate(p, tuple(sys_qubits))], coeff.real, 0

    if select_mode == "optimized":
        _, gtable, s, permuted = optimize_pauli_select(paulis)
        y = np.zeros(1 << s, dtype=complex)
        for addr, cc in permuted.items():
            y[addr] = cc
        beta, c, d = prepare_pair(y)
        sel = tuple(anc_qubits[:s])
        gates: list[Gate] = [StatePrep(sel, tuple(d))]
        gates += build_monotone_select(gtable, sel, tuple(sys_qubits))
        gates.append(StatePrepAdjoint(sel, tuple(c)))
        return gates, beta, s

    coeffs = [cc for cc, _ in paulis]
    if len(coeffs) == 1:
        coeffs.append(0j)  # a lone complex term still takes one selector qubit
    beta, c, d = prepare_pair(coeffs)
    s = int(math.log2(len(c)))
    sel = tuple(anc_qubits[:s])
    branches = [(j, [PauliGate(p, tuple(sys_qubits))])
                for j, (_, p) in enumerate(paulis)]
    gates = [StatePrep(sel, tuple(d))]
    gates += naive_select(branches, sel)
    gates.append(StatePrepAdjoint(sel, tuple(c)))
    return gates, beta, s


def block_encode(k: KrausExpr, select_mode: str = "naive"):
    """Standalone block encoding: (Circuit, alpha).

    The top-left 2^n x 2^n block of the circuit unitary is eval_kraus/alpha.
    """
    n = typecheck(k)
    w = kraus_anc_width(k, select_mode)
    circ = Circuit((("be_anc", w), ("system", n)))
    gates, alpha, _ = encode_kraus_gates(
        k, select_mode, circ.reg_qubits("be_anc"), circ.reg_qubits("system"))
    circ.extend(gates)
    return circ, alpha


def channel_alphas(c: ChannelExpr, select_mode: str = "naive") -> list[float]:
    """Per-Kraus block-encoding normalizations."""
    n = typecheck(c)
    out = []
    for k in c.kraus:
        w = kraus_anc_width(k, select_mode)
        _, alpha, _ = encode_kraus_gates(
            k, select_mode, tuple(range(w)), tuple(range(w, w + n)))
        out.append(alpha)
    return out


def channel_lcu(c: ChannelExpr, select_mode: str = "naive",
                flatten: bool = False) -> Circuit:
    """Channel-LCU circuit.

    run_channel (be_anc postselected, kraus_sel and flat_anc traced) applies
    (1/sum alpha_j^2) * [C](rho); the success probability is 1/sum alpha_j^2
    for a trace-preserving channel.
    """
    n = typecheck(c)
    m = len(c.kraus)
    if m == 0:
        raise ValueError("channel has no Kraus operators")
    ell = math.ceil(math.log2(m)) if m > 1 else 0
    widths = [kraus_anc_width(k, select_mode) for k in c.kraus]
    be_width = max(widths, default=0)
    flat_width = ell + 1 if (flatten and ell > 0) else 0
    circ = Circuit((("kraus_sel", ell), ("flat_anc", flat_width),
                    ("be_anc", be_width), ("system", n)))
    kq = circ.reg_qubits("kraus_sel")
    fq = circ.reg_qubits("flat_anc")
    aq = circ.reg_qubits("be_anc")
    sq = circ.reg_qubits("system")

    branches = []
    alphas = []
    for j, k in enumerate(c.kraus):
        gates, alpha, _ = encode_kraus_gates(k, select_mode, aq, sq)
        branches.append((j, gates))
        alphas.append(alpha)
    norm = math.sqrt(sum(a * a for a in alphas))

    if ell:
        amps = np.zeros(1 << ell, dtype=complex)
        amps[:m] = np.asarray(alphas) / norm
        circ.add(StatePrep(kq, tuple(amps)))
        if flatten:
            circ.extend(flatten_select(branches, kq, fq))
        else:
            circ.extend(naive_select(branches, kq))
    else:
        circ.extend(branches[0][1])
    return circ
