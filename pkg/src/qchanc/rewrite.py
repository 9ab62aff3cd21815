"""Semantics-preserving rewrite rules over channel expressions.

Rule set: PS1 (term merging), PS2 (zero-term elimination), K1 (zero Kraus
elimination), K2 (global phase elimination), C1 (Kraus permutation), C2
(Kraus unitary transform), C2p (two-Kraus unitary transform), C3 (Kraus
merging), C3p (two-Kraus merging).  minimize_kraus_rank drives the channel
to the minimal Kraus count via C3 merges, one C2 whose unitary comes from a
spectral decomposition, and K1 eliminations.
"""

from __future__ import annotations

import numpy as np

from .ir import (
    ChannelExpr,
    KrausExpr,
    PauliUnitary,
    eval_kraus,
    matrix_to_json,
    typecheck,
)
from .pauli import PauliString

RULES = ("PS1", "PS2", "K1", "K2", "C1", "C2", "C2p", "C3", "C3p")

UNITARY_TOL = 1e-10
PROP_TOL = 1e-10
ZERO_TOL = 1e-12


class RewriteError(ValueError):
    pass


class InvalidRuleArgs(RewriteError):
    pass


class RuleNotApplicable(RewriteError):
    pass


def _term_key(prim):
    if isinstance(prim, PauliUnitary):
        return ("p", prim.string.x_mask, prim.string.z_mask)
    return ("b", prim.handle, prim.n, prim.alpha, prim.anc)


def merge_terms(k: KrausExpr) -> KrausExpr:
    """PS1: fold Pauli phases into coefficients and merge duplicate terms."""
    acc: dict = {}
    order = []
    for coeff, prim in k.terms:
        if isinstance(prim, PauliUnitary) and prim.string.phase_exp:
            coeff = coeff * (1j) ** prim.string.phase_exp
            prim = PauliUnitary(prim.string.bare())
        key = _term_key(prim)
        if key in acc:
            acc[key][0] += coeff
        else:
            acc[key] = [coeff, prim]
            order.append(key)
    return KrausExpr(k.n, [(acc[key][0], acc[key][1]) for key in order])


def drop_zero_terms(k: KrausExpr, tol: float = ZERO_TOL) -> KrausExpr:
    """PS2."""
    return KrausExpr(k.n, [(c, p) for c, p in k.terms if abs(c) > tol])


def canonical_kraus(k: KrausExpr, tol: float = ZERO_TOL) -> KrausExpr:
    return drop_zero_terms(merge_terms(k), tol)


def scale_kraus(k: KrausExpr, c: complex) -> KrausExpr:
    return KrausExpr(k.n, [(c * a, p) for a, p in k.terms])


def combine_kraus(n: int, pairs) -> KrausExpr:
    """Canonical form of sum_i c_i K_i."""
    terms = []
    for c, k in pairs:
        terms.extend((c * a, p) for a, p in k.terms)
    return canonical_kraus(KrausExpr(n, terms))


def _canonical_dict(k: KrausExpr) -> dict:
    return {_term_key(p): c for c, p in canonical_kraus(k).terms}


def proportionality(a: KrausExpr, b: KrausExpr, tol: float = PROP_TOL):
    """Ratio r with b = r*a in canonical form, or None."""
    da, db = _canonical_dict(a), _canonical_dict(b)
    if set(da) != set(db):
        return None
    if not da:
        return 1.0 + 0j
    anchor = max(da, key=lambda key: abs(da[key]))
    r = db[anchor] / da[anchor]
    scale = max(1.0, max(abs(c) for c in db.values()))
    if all(abs(db[key] - r * da[key]) <= tol * scale for key in da):
        return r
    return None


def is_zero_kraus(k: KrausExpr, tol: float = 1e-8, cap: int | None = None) -> bool:
    kc = canonical_kraus(k, tol=0.0)
    if not kc.terms:
        return True
    if all(isinstance(p, PauliUnitary) for _, p in kc.terms):
        # bare Pauli strings are orthogonal, so coefficients tell the norm
        return max(abs(c) for c, _ in kc.terms) <= tol
    return float(np.max(np.abs(eval_kraus(kc, cap)))) <= tol


def apply_rule(c: ChannelExpr, rule: str, args: dict | None = None,
               cap: int | None = None) -> ChannelExpr:
    typecheck(c)
    args = dict(args or {})
    m = len(c.kraus)

    def need(key):
        if key not in args:
            raise InvalidRuleArgs(f"rule {rule} needs argument {key!r}")
        return args[key]

    def index(key):
        j = need(key)
        if not isinstance(j, (int, np.integer)) or not 0 <= j < m:
            raise InvalidRuleArgs(f"rule {rule}: bad Kraus index {j!r}")
        return int(j)

    if rule == "PS1":
        j = index("kraus")
        out = list(c.kraus)
        out[j] = merge_terms(out[j])
        return ChannelExpr(c.n, out)

    if rule == "PS2":
        j = index("kraus")
        out = list(c.kraus)
        out[j] = drop_zero_terms(out[j], args.get("tol", ZERO_TOL))
        return ChannelExpr(c.n, out)

    if rule == "K1":
        j = index("kraus")
        if not is_zero_kraus(c.kraus[j], args.get("tol", 1e-8), cap):
            raise RuleNotApplicable(f"K1: Kraus {j} is not zero")
        return ChannelExpr(c.n, c.kraus[:j] + c.kraus[j + 1:])

    if rule == "K2":
        j = index("kraus")
        theta = float(need("theta"))
        out = list(c.kraus)
        out[j] = scale_kraus(out[j], np.exp(-1j * theta))
        return ChannelExpr(c.n, out)

    if rule == "C1":
        perm = list(need("perm"))
        if sorted(perm) != list(range(m)):
            raise InvalidRuleArgs("C1: not a permutation of the Kraus indices")
        return ChannelExpr(c.n, [c.kraus[p] for p in perm])

    if rule == "C2":
        u = np.asarray(need("unitary"), dtype=complex)
        if u.shape != (m, m):
            raise InvalidRuleArgs(f"C2: matrix must be {m}x{m}")
        if np.max(np.abs(u.conj().T @ u - np.eye(m))) > UNITARY_TOL:
            raise InvalidRuleArgs("C2: matrix is not unitary")
        return ChannelExpr(
            c.n,
            [combine_kraus(c.n, [(u[j, k], c.kraus[k]) for k in range(m)])
             for j in range(m)],
        )

    if rule == "C2p":
        i, j = index("i"), index("j")
        if i == j:
            raise InvalidRuleArgs("C2p: indices must differ")
        a, b = complex(need("a")), complex(need("b"))
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > UNITARY_TOL:
            raise InvalidRuleArgs("C2p: |a|^2 + |b|^2 must be 1")
        out = list(c.kraus)
        ki, kj = out[i], out[j]
        out[i] = combine_kraus(c.n, [(a, ki), (b, kj)])
        out[j] = combine_kraus(c.n, [(-np.conj(b), ki), (np.conj(a), kj)])
        return ChannelExpr(c.n, out)

    if rule in ("C3", "C3p"):
        if rule == "C3p":
            idxs = sorted({index("i"), index("j")})
        else:
            idxs = sorted({int(j) for j in need("indices")})
        if len(idxs) < 2 or not all(0 <= j < m for j in idxs):
            raise InvalidRuleArgs(f"{rule}: need two or more distinct Kraus indices")
        lead = idxs[0]
        ratios = []
        for j in idxs[1:]:
            r = proportionality(c.kraus[lead], c.kraus[j])
            if r is None:
                raise RuleNotApplicable(
                    f"{rule}: Kraus {j} is not proportional to Kraus {lead}")
            ratios.append(r)
        factor = np.sqrt(1.0 + sum(abs(r) ** 2 for r in ratios))
        out = list(c.kraus)
        out[lead] = scale_kraus(out[lead], factor)
        for j in reversed(idxs[1:]):
            del out[j]
        return ChannelExpr(c.n, out)

    raise InvalidRuleArgs(f"unknown rule {rule!r}")


RANK_RTOL = 1e-9


def _first_significant(v: np.ndarray, cutoff: float) -> int:
    for i, x in enumerate(v):
        if abs(x) > cutoff:
            return i
    return -1


def _complete_unitary(cols: list[np.ndarray], m: int) -> np.ndarray:
    """Extend orthonormal columns to an m x m unitary, deterministically."""
    basis = list(cols)
    for j in range(m):
        if len(basis) == m:
            break
        v = np.zeros(m, dtype=complex)
        v[j] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - b * np.vdot(b, v)
        norm = np.linalg.norm(v)
        if norm > 1e-7:
            basis.append(v / norm)
    return np.column_stack(basis)


def _merge_proportional(kraus: list[KrausExpr], n: int, trace: list) -> list[KrausExpr]:
    groups: list[list[int]] = []
    for j in range(len(kraus)):
        for g in groups:
            if proportionality(kraus[g[0]], kraus[j]) is not None:
                g.append(j)
                break
        else:
            groups.append([j])
    work = list(kraus)
    tags = list(range(len(kraus)))
    for g in groups:
        if len(g) < 2:
            continue
        pos = [tags.index(t) for t in g]
        lead = pos[0]
        ratios = [proportionality(work[lead], work[p]) for p in pos[1:]]
        factor = np.sqrt(1.0 + sum(abs(r) ** 2 for r in ratios))
        work[lead] = scale_kraus(work[lead], factor)
        for p in reversed(pos[1:]):
            del work[p]
            del tags[p]
        trace.append({"rule": "C3", "args": {"indices": pos},
                      "kraus_count_after": len(work)})
    return work


def minimize_kraus_rank(c: ChannelExpr, cap: int | None = None):
    """Rewrite to the minimal Kraus count (Gram-matrix rank).

    Returns (channel, trace).  The trace lists the applied rules as
    {rule, args, kraus_count_after}: C3 merges of proportional operators,
    one C2 whose unitary diagonalizes the channel's quadratic form, and one
    K1 per eliminated zero operator.
    """
    typecheck(c)
    n = c.n
    trace: list[dict] = []
    work = [canonical_kraus(k) for k in c.kraus]
    work = _merge_proportional(work, n, trace)
    m = len(work)
    if m == 0:
        return ChannelExpr(n, []), trace

    dense = any(not isinstance(p, PauliUnitary) for k in work for _, p in k.terms)
    if dense:
        rows = np.array([eval_kraus(k, cap).ravel() for k in work])
        gram = rows.conj() @ rows.T
        lam, vec = np.linalg.eigh(gram)
        order = np.argsort(-lam, kind="stable")
        lam_max = max(lam[order[0]], 0.0)
        kept = [int(j) for j in order if lam[j] > RANK_RTOL * lam_max and lam[j] > 0]
        s_cols = []
        new_kraus = []
        for j in kept:
            s = vec[:, j].conj()
            row = s.conj() @ rows
            anchor = _first_significant(row, ZERO_TOL)
            if anchor >= 0:
                phase = row[anchor] / abs(row[anchor])
                s = s * phase
            s_cols.append(s)
            new_kraus.append(combine_kraus(n, [(np.conj(s[i]), work[i])
                                               for i in range(m)]))
    else:
        keys = sorted({_term_key(p)[1:] for k in work for _, p in k.terms},
                      key=lambda t: (t[1], t[0]))
        col = {key: i for i, key in enumerate(keys)}
        w = np.zeros((m, len(keys)), dtype=complex)
        for j, k in enumerate(work):
            for coeff, prim in k.terms:
                w[j, col[(prim.string.x_mask, prim.string.z_mask)]] = coeff
        quad = w.T @ w.conj()
        lam, vec = np.linalg.eigh(quad) if len(keys) else (np.zeros(0), np.zeros((0, 0)))
        order = np.argsort(-lam, kind="stable")
        lam_max = max(lam[order[0]], 0.0) if len(keys) else 0.0
        kept = [int(j) for j in order if lam[j] > RANK_RTOL * lam_max and lam[j] > 0]
        s_cols = []
        new_kraus = []
        for j in kept:
            row = np.sqrt(lam[j]) * vec[:, j]
            anchor = _first_significant(row, ZERO_TOL)
            if anchor >= 0:
                row = row * (np.conj(row[anchor]) / abs(row[anchor]))
            s_cols.append(w @ row.conj() / lam[j])
            new_kraus.append(KrausExpr(n, [
                (row[i], PauliUnitary(PauliString(n, x, z)))
                for i, (x, z) in enumerate(keys) if abs(row[i]) > ZERO_TOL]))

    r = len(kept)
    t = _complete_unitary(s_cols, m).conj().T
    trace.append({"rule": "C2", "args": {"unitary": t}, "kraus_count_after": m})
    for j in range(m - r):
        trace.append({"rule": "K1", "args": {"kraus": r},
                      "kraus_count_after": m - 1 - j})
    return ChannelExpr(n, new_kraus), trace


def simplify(c: ChannelExpr, minimize: bool = False, cap: int | None = None) -> ChannelExpr:
    """Fixed pipeline: canonicalize terms, drop zero Kraus, strip global
    phases; optionally run minimize_kraus_rank.  Idempotent."""
    typecheck(c)
    out = []
    for k in c.kraus:
        kc = canonical_kraus(k)
        if not kc.terms:
            continue
        lead = kc.terms[0][0]
        out.append(scale_kraus(kc, np.conj(lead / abs(lead))) if lead != abs(lead) else kc)
    chan = ChannelExpr(c.n, out)
    if minimize:
        chan = minimize_kraus_rank(chan, cap)[0]
    return chan


def trace_to_json(trace: list[dict]) -> list[dict]:
    out = []
    for entry in trace:
        args = {}
        for key, val in entry["args"].items():
            if isinstance(val, np.ndarray):
                args[key] = matrix_to_json(val)
            elif isinstance(val, (list, tuple)):
                args[key] = [int(x) for x in val]
            elif isinstance(val, (int, np.integer)):
                args[key] = int(val)
            else:
                args[key] = float(val)
        out.append({"rule": entry["rule"], "args": args,
                    "kraus_count_after": int(entry["kraus_count_after"])})
    return out
