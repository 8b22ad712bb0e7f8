# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Mirrors ``_pykernels`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, fmin, fmax, ldexp, log2, INFINITY

from conformal_lab.errors import BudgetExceeded, DivisionNearZero

cnp.import_array()

cdef double EPS = 1e-14
cdef double DIV_GUARD = 1e-12
DEF MAXSTACK = 64

cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_MUL = 4
    OP_DIV = 5
    OP_NEG = 6
    OP_POW = 7


# -- point jets -------------------------------------------------------------

cdef int _eval_point(const long long *ops, const double *args, Py_ssize_t start,
                     Py_ssize_t stop, double x, double dx, double *out_v, double *out_d) noexcept nogil:
    cdef double sv[MAXSTACK]
    cdef double sd[MAXSTACK]
    cdef int top = -1
    cdef Py_ssize_t pc
    cdef long long op
    cdef int k, i
    cdef double a, b, da, db, q, pm1
    for pc in range(start, stop):
        op = ops[pc]
        if op == OP_CONST:
            top += 1
            sv[top] = args[pc]
            sd[top] = 0.0
        elif op == OP_VAR:
            top += 1
            sv[top] = x
            sd[top] = dx
        elif op == OP_NEG:
            sv[top] = -sv[top]
            sd[top] = -sd[top]
        elif op == OP_POW:
            k = <int>args[pc]
            a = sv[top]
            da = sd[top]
            if k == 0:
                sv[top] = 1.0
                sd[top] = 0.0
            else:
                pm1 = 1.0
                for i in range(k - 1):
                    pm1 = pm1 * a
                sv[top] = pm1 * a
                sd[top] = (k * pm1) * da
        else:
            b = sv[top]
            db = sd[top]
            top -= 1
            a = sv[top]
            da = sd[top]
            if op == OP_ADD:
                sv[top] = a + b
                sd[top] = da + db
            elif op == OP_SUB:
                sv[top] = a - b
                sd[top] = da - db
            elif op == OP_MUL:
                sv[top] = a * b
                sd[top] = da * b + a * db
            else:
                if fabs(b) < DIV_GUARD:
                    return 1
                q = a / b
                sv[top] = q
                sd[top] = (da - q * db) / b
    out_v[0] = sv[top]
    out_d[0] = sd[top]
    return 0


def point_chain(prog, const long long[::1] word, xs):
    cdef const long long[::1] ops = prog[0]
    cdef const double[::1] args = prog[1]
    cdef const long long[::1] offs = prog[2]
    cdef double[::1] x = np.array(xs, dtype=np.float64)
    cdef double[::1] dx = np.ones(x.shape[0])
    cdef Py_ssize_t r, j, letter
    cdef double v, d
    cdef int err = 0
    with nogil:
        for r in range(x.shape[0]):
            v = x[r]
            d = 1.0
            for j in range(word.shape[0] - 1, -1, -1):
                letter = word[j]
                err = _eval_point(&ops[0], &args[0], offs[letter], offs[letter + 1], v, d, &v, &d)
                if err:
                    break
            if err:
                break
            x[r] = v
            dx[r] = d
    if err:
        raise DivisionNearZero("denominator magnitude below 1e-12")
    return np.asarray(x), np.asarray(dx)


def log_derivative_chain(prog, const long long[:, ::1] words, const long long[::1] lengths, double x0):
    cdef const long long[::1] ops = prog[0]
    cdef const double[::1] args = prog[1]
    cdef const long long[::1] offs = prog[2]
    cdef Py_ssize_t n = words.shape[0]
    cdef double[::1] x = np.full(n, x0)
    cdef double[::1] logd = np.zeros(n)
    cdef Py_ssize_t r, j, letter
    cdef double v, d, acc
    cdef int err = 0
    with nogil:
        for r in range(n):
            v = x0
            acc = 0.0
            for j in range(lengths[r] - 1, -1, -1):
                letter = words[r, j]
                err = _eval_point(&ops[0], &args[0], offs[letter], offs[letter + 1], v, 1.0, &v, &d)
                if err:
                    break
                acc = acc + log2(fabs(d))
            if err:
                break
            x[r] = v
            logd[r] = acc
    if err:
        raise DivisionNearZero("denominator magnitude below 1e-12")
    return np.asarray(x), np.asarray(logd)


# -- interval jets ----------------------------------------------------------

cdef inline void _iadd(double al, double ah, double bl, double bh, double *lo, double *hi) noexcept nogil:
    lo[0] = (al + bl) - (fabs(al) + fabs(bl)) * EPS
    hi[0] = (ah + bh) + (fabs(ah) + fabs(bh)) * EPS


cdef inline void _isub(double al, double ah, double bl, double bh, double *lo, double *hi) noexcept nogil:
    lo[0] = (al - bh) - (fabs(al) + fabs(bh)) * EPS
    hi[0] = (ah - bl) + (fabs(ah) + fabs(bl)) * EPS


cdef inline void _imul(double al, double ah, double bl, double bh, double *lo, double *hi) noexcept nogil:
    cdef double p1 = al * bl
    cdef double p2 = al * bh
    cdef double p3 = ah * bl
    cdef double p4 = ah * bh
    cdef double l = fmin(fmin(p1, p2), fmin(p3, p4))
    cdef double h = fmax(fmax(p1, p2), fmax(p3, p4))
    lo[0] = l - fabs(l) * EPS
    hi[0] = h + fabs(h) * EPS


cdef inline double _pw(double a, int k) noexcept nogil:
    cdef double p
    cdef int i
    if k == 0:
        return 1.0
    p = a
    for i in range(k - 1):
        p = p * a
    return p


cdef inline void _ipow(double al, double ah, int k, double *lo, double *hi) noexcept nogil:
    cdef double a, b, l, h
    if k == 0:
        lo[0] = 1.0
        hi[0] = 1.0
        return
    a = _pw(al, k)
    b = _pw(ah, k)
    if k % 2 == 1:
        l = a
        h = b
    elif al >= 0.0:
        l = a
        h = b
    elif ah <= 0.0:
        l = b
        h = a
    else:
        l = 0.0
        h = fmax(a, b)
    lo[0] = l - k * fabs(l) * EPS
    hi[0] = h + k * fabs(h) * EPS


cdef int _eval_interval(const long long *ops, const double *args, Py_ssize_t start,
                        Py_ssize_t stop, double xl, double xh, double dxl, double dxh,
                        double *out) noexcept nogil:
    cdef double svl[MAXSTACK]
    cdef double svh[MAXSTACK]
    cdef double sdl[MAXSTACK]
    cdef double sdh[MAXSTACK]
    cdef int top = -1
    cdef Py_ssize_t pc
    cdef long long op
    cdef int k
    cdef double al, ah, adl, adh, bl, bh, bdl, bdh
    cdef double vl, vh, dl, dh, t1l, t1h, t2l, t2h, rl, rh, pl, ph, ql, qh, ml, mh, kk
    for pc in range(start, stop):
        op = ops[pc]
        if op == OP_CONST:
            top += 1
            svl[top] = args[pc]
            svh[top] = args[pc]
            sdl[top] = 0.0
            sdh[top] = 0.0
        elif op == OP_VAR:
            top += 1
            svl[top] = xl
            svh[top] = xh
            sdl[top] = dxl
            sdh[top] = dxh
        elif op == OP_NEG:
            vl = svl[top]
            svl[top] = -svh[top]
            svh[top] = -vl
            dl = sdl[top]
            sdl[top] = -sdh[top]
            sdh[top] = -dl
        elif op == OP_POW:
            k = <int>args[pc]
            if k == 0:
                svl[top] = 1.0
                svh[top] = 1.0
                sdl[top] = 0.0
                sdh[top] = 0.0
            else:
                _ipow(svl[top], svh[top], k, &pl, &ph)
                _ipow(svl[top], svh[top], k - 1, &ql, &qh)
                kk = <double>k
                _imul(kk, kk, ql, qh, &ml, &mh)
                _imul(ml, mh, sdl[top], sdh[top], &dl, &dh)
                svl[top] = pl
                svh[top] = ph
                sdl[top] = dl
                sdh[top] = dh
        else:
            bl = svl[top]
            bh = svh[top]
            bdl = sdl[top]
            bdh = sdh[top]
            top -= 1
            al = svl[top]
            ah = svh[top]
            adl = sdl[top]
            adh = sdh[top]
            if op == OP_ADD:
                _iadd(al, ah, bl, bh, &vl, &vh)
                _iadd(adl, adh, bdl, bdh, &dl, &dh)
            elif op == OP_SUB:
                _isub(al, ah, bl, bh, &vl, &vh)
                _isub(adl, adh, bdl, bdh, &dl, &dh)
            elif op == OP_MUL:
                _imul(al, ah, bl, bh, &vl, &vh)
                _imul(adl, adh, bl, bh, &t1l, &t1h)
                _imul(al, ah, bdl, bdh, &t2l, &t2h)
                _iadd(t1l, t1h, t2l, t2h, &dl, &dh)
            else:
                if bl <= DIV_GUARD and bh >= -DIV_GUARD:
                    return 1
                rl = 1.0 / bh
                rh = 1.0 / bl
                rl = rl - fabs(rl) * EPS
                rh = rh + fabs(rh) * EPS
                _imul(al, ah, rl, rh, &vl, &vh)
                _imul(vl, vh, bdl, bdh, &t1l, &t1h)
                _isub(adl, adh, t1l, t1h, &t2l, &t2h)
                _imul(t2l, t2h, rl, rh, &dl, &dh)
            svl[top] = vl
            svh[top] = vh
            sdl[top] = dl
            sdh[top] = dh
    out[0] = svl[top]
    out[1] = svh[top]
    out[2] = sdl[top]
    out[3] = sdh[top]
    return 0


def interval_chain_words(prog, const long long[:, ::1] words, const long long[::1] lengths,
                         los, his):
    cdef const long long[::1] ops = prog[0]
    cdef const double[::1] args = prog[1]
    cdef const long long[::1] offs = prog[2]
    cdef Py_ssize_t n = words.shape[0]
    cdef double[::1] vl = np.array(los, dtype=np.float64)
    cdef double[::1] vh = np.array(his, dtype=np.float64)
    cdef double[::1] dl = np.ones(n)
    cdef double[::1] dh = np.ones(n)
    cdef double out[4]
    cdef Py_ssize_t r, j, letter
    cdef int err = 0
    with nogil:
        for r in range(n):
            out[0] = vl[r]
            out[1] = vh[r]
            out[2] = 1.0
            out[3] = 1.0
            for j in range(lengths[r] - 1, -1, -1):
                letter = words[r, j]
                err = _eval_interval(&ops[0], &args[0], offs[letter], offs[letter + 1],
                                     out[0], out[1], out[2], out[3], out)
                if err:
                    break
            if err:
                break
            vl[r] = out[0]
            vh[r] = out[1]
            dl[r] = out[2]
            dh[r] = out[3]
    if err:
        raise DivisionNearZero("denominator interval meets zero")
    return np.asarray(vl), np.asarray(vh), np.asarray(dl), np.asarray(dh)


def word_sups(prog, int n, long long budget):
    cdef const long long[::1] ops = prog[0]
    cdef const double[::1] args = prog[1]
    cdef const long long[::1] offs = prog[2]
    cdef Py_ssize_t m = offs.shape[0] - 1
    if (<object>m) ** n > budget:
        raise BudgetExceeded(f"{m}^{n} words exceed the budget {budget}")
    cdef double[::1] vl = np.zeros(1)
    cdef double[::1] vh = np.ones(1)
    cdef double[::1] s = np.ones(1)
    cdef double[::1] nvl, nvh, ns
    cdef Py_ssize_t size = 1, level, letter, r, idx
    cdef double out[4]
    cdef double t
    cdef int err = 0
    for level in range(n):
        nvl = np.empty(size * m)
        nvh = np.empty(size * m)
        ns = np.empty(size * m)
        with nogil:
            for letter in range(m):
                for r in range(size):
                    err = _eval_interval(&ops[0], &args[0], offs[letter], offs[letter + 1],
                                         vl[r], vh[r], 1.0, 1.0, out)
                    if err:
                        break
                    idx = letter * size + r
                    t = s[r] * fmax(fabs(out[2]), fabs(out[3]))
                    ns[idx] = t + fabs(t) * EPS
                    nvl[idx] = out[0]
                    nvh[idx] = out[1]
                if err:
                    break
        if err:
            raise DivisionNearZero("denominator interval meets zero")
        vl, vh, s = nvl, nvh, ns
        size = size * m
    return np.asarray(s)


def cut_set(prog, probs, int n, long long budget):
    cdef const long long[::1] ops = prog[0]
    cdef const double[::1] args = prog[1]
    cdef const long long[::1] offs = prog[2]
    cdef const double[::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t m = offs.shape[0] - 1
    cdef double thresh = ldexp(1.0, -n)
    # DFS over words; word[] holds the current path, wstack the weights along it
    cdef list out_words = []
    cdef list out_w = []
    cdef list out_d = []
    cdef list out_p = []
    cdef Py_ssize_t cap = 64
    cdef long long[::1] word = np.zeros(cap, dtype=np.int64)
    cdef double[::1] wpath = np.zeros(cap + 1)
    cdef Py_ssize_t depth = 1, j, letter
    cdef double v, d
    cdef int err = 0
    cdef long long count = 0
    word[0] = 0
    wpath[0] = 1.0
    while depth > 0:
        wpath[depth] = wpath[depth - 1] * p[word[depth - 1]]
        v = 0.0
        d = 1.0
        for j in range(depth - 1, -1, -1):
            letter = word[j]
            err = _eval_point(&ops[0], &args[0], offs[letter], offs[letter + 1], v, d, &v, &d)
            if err:
                raise DivisionNearZero("denominator magnitude below 1e-12")
        if fabs(d) <= thresh:
            count += 1
            if count > budget:
                raise BudgetExceeded(f"cut-set at level {n} exceeds the budget {budget}")
            out_words.append(np.asarray(word[:depth]).copy())
            out_w.append(wpath[depth])
            out_d.append(fabs(d))
            out_p.append(v)
            # advance to the next sibling, backtracking past exhausted letters
            while depth > 0 and word[depth - 1] == m - 1:
                depth -= 1
            if depth > 0:
                word[depth - 1] += 1
        else:
            if depth == cap:
                word = np.concatenate([np.asarray(word), np.zeros(cap, dtype=np.int64)])
                wpath = np.concatenate([np.asarray(wpath), np.zeros(cap)])
                cap *= 2
            word[depth] = 0
            depth += 1
    cdef Py_ssize_t total = len(out_words)
    cdef Py_ssize_t maxlen = max(len(w) for w in out_words)
    letters = np.full((total, maxlen), -1, dtype=np.int64)
    lengths = np.empty(total, dtype=np.int64)
    for j in range(total):
        w = out_words[j]
        letters[j, : len(w)] = w
        lengths[j] = len(w)
    return (letters, lengths, np.array(out_w), np.array(out_d), np.array(out_p))


# -- Chebyshev all-pairs search ---------------------------------------------

def chebyshev_min(features):
    cdef const double[:, ::1] f = np.ascontiguousarray(features, dtype=np.float64)
    cdef Py_ssize_t n = f.shape[0], dim = f.shape[1]
    if n < 2:
        raise ValueError("need at least two points")
    cdef const long long[::1] order = np.argsort(np.asarray(f)[:, 0], kind="stable").astype(np.int64)
    cdef double best = INFINITY, d, t
    cdef long long bi = -1, bj = -1, i, jj, pp, qq
    cdef Py_ssize_t a, b, g
    with nogil:
        for a in range(n - 1):
            i = order[a]
            for b in range(a + 1, n):
                jj = order[b]
                if f[jj, 0] - f[i, 0] > best:
                    break
                d = 0.0
                for g in range(dim):
                    t = fabs(f[i, g] - f[jj, g])
                    if t > d:
                        d = t
                        if d > best:
                            break
                if d > best:
                    continue
                if i < jj:
                    pp = i
                    qq = jj
                else:
                    pp = jj
                    qq = i
                if d < best or pp < bi or (pp == bi and qq < bj):
                    best = d
                    bi = pp
                    bj = qq
    return int(bi), int(bj), float(best)


def chebyshev_pairs(features, double threshold):
    cdef const double[:, ::1] f = np.ascontiguousarray(features, dtype=np.float64)
    cdef Py_ssize_t n = f.shape[0], dim = f.shape[1]
    cdef const long long[::1] order = np.argsort(np.asarray(f)[:, 0], kind="stable").astype(np.int64)
    cdef Py_ssize_t cap = 1024, size = 0
    cdef long long[::1] I = np.empty(cap, dtype=np.int64)
    cdef long long[::1] J = np.empty(cap, dtype=np.int64)
    cdef double[::1] D = np.empty(cap)
    cdef double d, t
    cdef long long i, jj
    cdef Py_ssize_t a, b, g
    for a in range(n - 1):
        i = order[a]
        for b in range(a + 1, n):
            jj = order[b]
            if f[jj, 0] - f[i, 0] > threshold:
                break
            d = 0.0
            for g in range(dim):
                t = fabs(f[i, g] - f[jj, g])
                if t > d:
                    d = t
                    if d > threshold:
                        break
            if d > threshold:
                continue
            if size == cap:
                I = np.concatenate([np.asarray(I), np.empty(cap, dtype=np.int64)])
                J = np.concatenate([np.asarray(J), np.empty(cap, dtype=np.int64)])
                D = np.concatenate([np.asarray(D), np.empty(cap)])
                cap *= 2
            I[size] = i if i < jj else jj
            J[size] = jj if i < jj else i
            D[size] = d
            size += 1
    Ia = np.asarray(I)[:size].copy()
    Ja = np.asarray(J)[:size].copy()
    Da = np.asarray(D)[:size].copy()
    o = np.lexsort((Ja, Ia))
    return Ia[o], Ja[o], Da[o]
