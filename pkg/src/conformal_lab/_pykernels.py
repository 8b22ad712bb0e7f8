"""Pure numpy implementation of the hot kernels.

Every routine performs the same IEEE operations in the same order as the
compiled core in ``_ckernels.pyx``, so the two backends agree bit for bit.
"""
import math

import numpy as np

from .errors import BudgetExceeded, DivisionNearZero

EPS = 1e-14
DIV_GUARD = 1e-12

CONST, VAR, ADD, SUB, MUL, DIV, NEG, POW = range(8)


def _log2(a):
    # libc log2, as in the compiled core; numpy's SIMD log2 can differ by an ulp
    return np.fromiter(map(math.log2, a.tolist()), dtype=float, count=a.size)


def _pw(a, k):
    if k == 0:
        return np.ones_like(a)
    p = a
    for _ in range(k - 1):
        p = p * a
    return p


# -- point jets -------------------------------------------------------------

def eval_point(ops, args, start, stop, x, dx):
    """Value and derivative of program ``ops[start:stop]`` at ``x`` with input tangent ``dx``."""
    sv, sd = [], []
    for pc in range(start, stop):
        op = ops[pc]
        if op == CONST:
            sv.append(np.full_like(x, args[pc]))
            sd.append(np.zeros_like(x))
        elif op == VAR:
            sv.append(x)
            sd.append(dx)
        elif op == NEG:
            sv[-1] = -sv[-1]
            sd[-1] = -sd[-1]
        elif op == POW:
            k = int(args[pc])
            a, da = sv[-1], sd[-1]
            if k == 0:
                sv[-1] = np.ones_like(a)
                sd[-1] = np.zeros_like(a)
            else:
                pm1 = np.ones_like(a)
                for _ in range(k - 1):
                    pm1 = pm1 * a
                sv[-1] = pm1 * a
                sd[-1] = (k * pm1) * da
        else:
            b, db = sv.pop(), sd.pop()
            a, da = sv[-1], sd[-1]
            if op == ADD:
                sv[-1], sd[-1] = a + b, da + db
            elif op == SUB:
                sv[-1], sd[-1] = a - b, da - db
            elif op == MUL:
                sv[-1], sd[-1] = a * b, da * b + a * db
            else:
                if np.any(np.abs(b) < DIV_GUARD):
                    raise DivisionNearZero("denominator magnitude below 1e-12")
                q = a / b
                sv[-1], sd[-1] = q, (da - q * db) / b
    return sv[-1], sd[-1]


def point_chain(prog, word, xs):
    """Value and derivative of ``phi_word`` at each point of ``xs``."""
    ops, args, offs = prog
    x = np.array(xs, dtype=float)
    dx = np.ones_like(x)
    for letter in word[::-1]:
        x, dx = eval_point(ops, args, offs[letter], offs[letter + 1], x, dx)
    return x, dx


def log_derivative_chain(prog, words, lengths, x0):
    """For each row word ``u``: ``phi_u(x0)`` and ``log2 |phi_u'(x0)|``.

    The log-derivative is accumulated letter by letter so long words do not
    underflow.
    """
    ops, args, offs = prog
    n = words.shape[0]
    x = np.full(n, float(x0))
    logd = np.zeros(n)
    if n == 0:
        return x, logd
    for j in range(words.shape[1] - 1, -1, -1):
        active = lengths > j
        col = words[:, j]
        for letter in range(len(offs) - 1):
            sel = np.flatnonzero(active & (col == letter))
            if sel.size == 0:
                continue
            v, d = eval_point(ops, args, offs[letter], offs[letter + 1], x[sel], np.ones(sel.size))
            x[sel] = v
            logd[sel] = logd[sel] + _log2(np.abs(d))
    return x, logd


# -- interval jets ----------------------------------------------------------

def _iadd(al, ah, bl, bh):
    return ((al + bl) - (np.abs(al) + np.abs(bl)) * EPS,
            (ah + bh) + (np.abs(ah) + np.abs(bh)) * EPS)


def _isub(al, ah, bl, bh):
    return ((al - bh) - (np.abs(al) + np.abs(bh)) * EPS,
            (ah - bl) + (np.abs(ah) + np.abs(bl)) * EPS)


def _imul(al, ah, bl, bh):
    p1, p2, p3, p4 = al * bl, al * bh, ah * bl, ah * bh
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return lo - np.abs(lo) * EPS, hi + np.abs(hi) * EPS


def _irecip(bl, bh):
    if np.any((bl <= DIV_GUARD) & (bh >= -DIV_GUARD)):
        raise DivisionNearZero("denominator interval meets zero")
    lo = 1.0 / bh
    hi = 1.0 / bl
    return lo - np.abs(lo) * EPS, hi + np.abs(hi) * EPS


def _ipow(al, ah, k):
    if k == 0:
        return np.ones_like(al), np.ones_like(ah)
    a = _pw(al, k)
    b = _pw(ah, k)
    if k % 2 == 1:
        lo, hi = a, b
    else:
        lo = np.where(al >= 0.0, a, np.where(ah <= 0.0, b, 0.0))
        hi = np.where(al >= 0.0, b, np.where(ah <= 0.0, a, np.maximum(a, b)))
    return lo - k * np.abs(lo) * EPS, hi + k * np.abs(hi) * EPS


def eval_interval(ops, args, start, stop, xl, xh, dxl, dxh):
    """Interval value and derivative enclosures over ``[xl, xh]``."""
    st = []
    for pc in range(start, stop):
        op = ops[pc]
        if op == CONST:
            c = np.full_like(xl, args[pc])
            z = np.zeros_like(xl)
            st.append((c, c, z, z))
        elif op == VAR:
            st.append((xl, xh, dxl, dxh))
        elif op == NEG:
            vl, vh, dl, dh = st[-1]
            st[-1] = (-vh, -vl, -dh, -dl)
        elif op == POW:
            k = int(args[pc])
            vl, vh, dl, dh = st[-1]
            if k == 0:
                one = np.ones_like(vl)
                z = np.zeros_like(vl)
                st[-1] = (one, one, z, z)
            else:
                pl, ph = _ipow(vl, vh, k)
                ql, qh = _ipow(vl, vh, k - 1)
                kk = np.full_like(vl, float(k))
                ml, mh = _imul(kk, kk, ql, qh)
                nl, nh = _imul(ml, mh, dl, dh)
                st[-1] = (pl, ph, nl, nh)
        else:
            bl, bh, bdl, bdh = st.pop()
            al, ah, adl, adh = st[-1]
            if op == ADD:
                vl, vh = _iadd(al, ah, bl, bh)
                dl, dh = _iadd(adl, adh, bdl, bdh)
            elif op == SUB:
                vl, vh = _isub(al, ah, bl, bh)
                dl, dh = _isub(adl, adh, bdl, bdh)
            elif op == MUL:
                vl, vh = _imul(al, ah, bl, bh)
                t1l, t1h = _imul(adl, adh, bl, bh)
                t2l, t2h = _imul(al, ah, bdl, bdh)
                dl, dh = _iadd(t1l, t1h, t2l, t2h)
            else:
                rl, rh = _irecip(bl, bh)
                vl, vh = _imul(al, ah, rl, rh)
                tl, th = _imul(vl, vh, bdl, bdh)
                ul, uh = _isub(adl, adh, tl, th)
                dl, dh = _imul(ul, uh, rl, rh)
            st[-1] = (vl, vh, dl, dh)
    return st[-1]


def interval_chain_words(prog, words, lengths, los, his):
    """Range and derivative enclosures of ``phi_u`` over ``[lo, hi]``, one row per word."""
    ops, args, offs = prog
    vl = np.array(los, dtype=float)
    vh = np.array(his, dtype=float)
    dl = np.ones_like(vl)
    dh = np.ones_like(vl)
    for j in range(words.shape[1] - 1, -1, -1):
        active = lengths > j
        col = words[:, j]
        for letter in range(len(offs) - 1):
            sel = np.flatnonzero(active & (col == letter))
            if sel.size == 0:
                continue
            r = eval_interval(ops, args, offs[letter], offs[letter + 1],
                              vl[sel], vh[sel], dl[sel], dh[sel])
            vl[sel], vh[sel], dl[sel], dh[sel] = r
    return vl, vh, dl, dh


def word_sups(prog, n, budget):
    """Upper bounds of ``sup |phi_u'|`` on [0, 1] for all ``u`` of length ``n``.

    Entry ``r`` belongs to the word of lexicographic rank ``r``.  Words are
    grown by prepending letters, chaining interval derivative enclosures
    over the image intervals.
    """
    ops, args, offs = prog
    m = len(offs) - 1
    if m ** n > budget:
        raise BudgetExceeded(f"{m}^{n} words exceed the budget {budget}")
    vl = np.zeros(1)
    vh = np.ones(1)
    s = np.ones(1)
    one = np.ones(1)
    for _ in range(n):
        nvl, nvh, ns = [], [], []
        ones = np.broadcast_to(one, vl.shape)
        for letter in range(m):
            al, ah, dl, dh = eval_interval(ops, args, offs[letter], offs[letter + 1],
                                           vl, vh, ones, ones)
            t = s * np.maximum(np.abs(dl), np.abs(dh))
            ns.append(t + np.abs(t) * EPS)
            nvl.append(al)
            nvh.append(ah)
        vl, vh, s = np.concatenate(nvl), np.concatenate(nvh), np.concatenate(ns)
    return s


def cut_set(prog, probs, n, budget):
    """Minimal cut-set: words whose derivative at 0 first drops to ``2**-n``.

    Returns ``(letters, lengths, weights, derivs, positions)`` in
    lexicographic word order; ``letters`` is a padded 2-D array.
    """
    ops, args, offs = prog
    m = len(offs) - 1
    thresh = np.ldexp(1.0, -n)
    probs = np.asarray(probs, dtype=float)

    frontier = np.arange(m, dtype=np.int64).reshape(m, 1)
    fweights = 1.0 * probs
    done_words, done_w, done_d, done_p = [], [], [], []
    n_done = 0
    depth = 1
    while frontier.shape[0]:
        if n_done + frontier.shape[0] > budget:
            raise BudgetExceeded(f"cut-set at level {n} exceeds the budget {budget}")
        x = np.zeros(frontier.shape[0])
        dx = np.ones_like(x)
        for j in range(depth - 1, -1, -1):
            col = frontier[:, j]
            for letter in range(m):
                sel = np.flatnonzero(col == letter)
                if sel.size == 0:
                    continue
                x[sel], dx[sel] = eval_point(ops, args, offs[letter], offs[letter + 1],
                                             x[sel], dx[sel])
        term = np.abs(dx) <= thresh
        if np.any(term):
            done_words.append(frontier[term])
            done_w.append(fweights[term])
            done_d.append(np.abs(dx[term]))
            done_p.append(x[term])
            n_done += int(term.sum())
        keep = ~term
        parents = frontier[keep]
        pw = fweights[keep]
        if parents.shape[0] == 0:
            break
        k = parents.shape[0]
        frontier = np.concatenate(
            [np.repeat(parents, m, axis=0), np.tile(np.arange(m, dtype=np.int64), k)[:, None]],
            axis=1)
        fweights = np.repeat(pw, m) * np.tile(probs, k)
        depth += 1

    maxlen = max(w.shape[1] for w in done_words)
    letters = np.full((n_done, maxlen), -1, dtype=np.int64)
    lengths = np.empty(n_done, dtype=np.int64)
    row = 0
    for w in done_words:
        letters[row:row + w.shape[0], : w.shape[1]] = w
        lengths[row:row + w.shape[0]] = w.shape[1]
        row += w.shape[0]
    weights = np.concatenate(done_w)
    derivs = np.concatenate(done_d)
    positions = np.concatenate(done_p)
    order = np.lexsort(letters.T[::-1])
    return letters[order], lengths[order], weights[order], derivs[order], positions[order]


# -- Chebyshev all-pairs search ---------------------------------------------

def _sweep_window(col0, order, a, radius):
    """Sorted positions ``b > a`` with ``col0[order[b]] - col0[order[a]] <= radius``."""
    s0 = col0[order]
    hi = np.searchsorted(s0, s0[a] + radius * (1.0 + 1e-9) + 1e-300, side="right")
    hi = min(max(hi + 2, a + 1), len(s0))
    cand = np.arange(a + 1, hi)
    return cand[(s0[cand] - s0[a]) <= radius]


def chebyshev_min(features):
    """Closest pair in the max-coordinate metric.

    Ties are broken towards the lexicographically smallest index pair.
    Returns ``(i, j, d)`` with ``i < j``.
    """
    f = np.ascontiguousarray(features, dtype=float)
    n = f.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    order = np.argsort(f[:, 0], kind="stable")
    col0 = f[:, 0]
    best, bi, bj = np.inf, -1, -1
    for a in range(n - 1):
        cand = _sweep_window(col0, order, a, best)
        if cand.size == 0:
            continue
        i = order[a]
        js = order[cand]
        d = np.max(np.abs(f[js] - f[i]), axis=1)
        dmin = d.min()
        if dmin > best:
            continue
        for jj in js[d == dmin]:
            p, q = (i, jj) if i < jj else (jj, i)
            if dmin < best or (p, q) < (bi, bj):
                best, bi, bj = dmin, int(p), int(q)
    return bi, bj, float(best)


def chebyshev_pairs(features, threshold):
    """All pairs ``i < j`` whose max-coordinate distance is ``<= threshold``.

    Returned as arrays ``(I, J, D)`` sorted by ``(I, J)``.
    """
    f = np.ascontiguousarray(features, dtype=float)
    n = f.shape[0]
    order = np.argsort(f[:, 0], kind="stable")
    col0 = f[:, 0]
    I, J, D = [], [], []
    for a in range(n - 1):
        cand = _sweep_window(col0, order, a, threshold)
        if cand.size == 0:
            continue
        i = order[a]
        js = order[cand]
        d = np.max(np.abs(f[js] - f[i]), axis=1)
        ok = d <= threshold
        js, d = js[ok], d[ok]
        I.append(np.minimum(js, i))
        J.append(np.maximum(js, i))
        D.append(d)
    if not I:
        e = np.zeros(0, dtype=np.int64)
        return e, e.copy(), np.zeros(0)
    I, J, D = np.concatenate(I), np.concatenate(J), np.concatenate(D)
    o = np.lexsort((J, I))
    return I[o].astype(np.int64), J[o].astype(np.int64), D[o]
