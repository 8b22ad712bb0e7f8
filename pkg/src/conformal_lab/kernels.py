"""Backend selection for the hot kernels.

The compiled Cython core is used when it has been built; otherwise the
numpy implementation takes over.  Setting ``CONFORMAL_LAB_PURE_PYTHON=1``
forces the fallback.  Both backends produce bit-identical results.
"""
import os
from typing import NamedTuple

import numpy as np

from . import _pykernels

CONST, VAR, ADD, SUB, MUL, DIV, NEG, POW = range(8)
MAX_STACK = 64

if os.environ.get("CONFORMAL_LAB_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"


class Program(NamedTuple):
    """Postfix bytecode for one or more maps; map ``i`` is ``ops[offs[i]:offs[i+1]]``."""

    ops: np.ndarray
    args: np.ndarray
    offs: np.ndarray

    @property
    def n_maps(self):
        return len(self.offs) - 1


def compile_tree(root):
    """Compile an expression tree in ``x`` into a single-map Program."""
    # local import: expr imports this module
    from .expr import Add, Const, Div, Mul, Neg, Pow, Sub, Var

    ops, args = [], []
    depth = [0, 0]

    def push(op, arg, delta):
        ops.append(op)
        args.append(arg)
        depth[0] += delta
        depth[1] = max(depth[1], depth[0])

    def walk(node):
        if isinstance(node, Const):
            push(CONST, node.value, 1)
        elif isinstance(node, Var):
            if node.name != "x":
                raise ValueError(f"cannot compile free variable {node.name!r}")
            push(VAR, 0.0, 1)
        elif isinstance(node, Neg):
            walk(node.arg)
            push(NEG, 0.0, 0)
        elif isinstance(node, Pow):
            walk(node.base)
            push(POW, float(node.exponent), 0)
        else:
            walk(node.left)
            walk(node.right)
            code = {Add: ADD, Sub: SUB, Mul: MUL, Div: DIV}[type(node)]
            push(code, 0.0, -1)

    walk(root)
    if depth[1] > MAX_STACK:
        raise ValueError(f"expression nests deeper than {MAX_STACK}")
    return Program(np.array(ops, dtype=np.int64), np.array(args, dtype=float),
                   np.array([0, len(ops)], dtype=np.int64))


def combine(programs):
    ops = np.concatenate([p.ops for p in programs])
    args = np.concatenate([p.args for p in programs])
    sizes = [len(p.ops) for p in programs]
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    return Program(ops, args, offs)


def _words(words, lengths):
    return (np.ascontiguousarray(words, dtype=np.int64),
            np.ascontiguousarray(lengths, dtype=np.int64))


def point_chain(prog, word, xs, impl=None):
    impl = impl or _impl
    return impl.point_chain(prog, np.ascontiguousarray(word, dtype=np.int64),
                            np.atleast_1d(np.asarray(xs, dtype=float)))


def log_derivative_chain(prog, words, lengths, x0=0.0, impl=None):
    impl = impl or _impl
    return impl.log_derivative_chain(prog, *_words(words, lengths), float(x0))


def interval_chain_words(prog, words, lengths, los, his, impl=None):
    impl = impl or _impl
    return impl.interval_chain_words(prog, *_words(words, lengths),
                                     np.asarray(los, dtype=float), np.asarray(his, dtype=float))


def word_sups(prog, n, budget, impl=None):
    impl = impl or _impl
    return impl.word_sups(prog, int(n), int(budget))


def cut_set(prog, probs, n, budget, impl=None):
    impl = impl or _impl
    return impl.cut_set(prog, np.asarray(probs, dtype=float), int(n), int(budget))


def chebyshev_min(features, impl=None):
    impl = impl or _impl
    return impl.chebyshev_min(np.ascontiguousarray(features, dtype=float))


def chebyshev_pairs(features, threshold, impl=None):
    impl = impl or _impl
    return impl.chebyshev_pairs(np.ascontiguousarray(features, dtype=float), float(threshold))


def available_backends():
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
