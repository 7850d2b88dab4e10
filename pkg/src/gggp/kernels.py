"""Evaluation kernels for compiled postfix programs.

Two interchangeable backends produce bit-identical results:

* ``numba``: a stack machine compiled with ``@njit`` that runs each opcode
  as one loop over rows, with no temporary arrays.
* ``numpy``: column-at-a-time evaluation with whole-array operations.

Set ``GGGP_DISABLE_NUMBA=1`` to force the numpy path (also used when numba
is not importable).
"""

from __future__ import annotations

import os

import numpy as np

CONST, VAR, ADD, SUB, MUL, DIV = 0, 1, 2, 3, 4, 5
OPCODES = {"+": ADD, "-": SUB, "*": MUL, "/": DIV}

PROTECT_EPS = 1e-9
CLAMP = 1e30

_disabled = os.environ.get("GGGP_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError
    from numba import njit
except ImportError:
    njit = None

BACKEND = "numba" if njit is not None else "numpy"


def _eval_program_numpy(code, arg, consts, X):
    n = X.shape[0]
    stack = []
    for k in range(code.shape[0]):
        c = code[k]
        if c == CONST:
            stack.append(np.full(n, consts[arg[k]]))
        elif c == VAR:
            stack.append(X[:, arg[k]].copy())
        else:
            b = stack.pop()
            a = stack.pop()
            if c == ADD:
                v = a + b
            elif c == SUB:
                v = a - b
            elif c == MUL:
                v = a * b
            else:
                small = np.abs(b) < PROTECT_EPS
                v = np.where(small, 1.0, a / np.where(small, 1.0, b))
            np.clip(v, -CLAMP, CLAMP, out=v)
            stack.append(v)
    return stack[0]


if njit is not None:
    @njit(cache=True)
    def _eval_program_numba(code, arg, consts, X):
        n = X.shape[0]
        m = code.shape[0]
        depth = 0
        top = 0
        for k in range(m):
            top += 1 if code[k] <= 1 else -1
            depth = max(depth, top)
        # one buffer row per stack slot; each opcode runs as a tight loop over rows
        buf = np.empty((depth, n))
        sp = 0
        for k in range(m):
            c = code[k]
            if c == 0:
                v = consts[arg[k]]
                for r in range(n):
                    buf[sp, r] = v
                sp += 1
            elif c == 1:
                j = arg[k]
                for r in range(n):
                    buf[sp, r] = X[r, j]
                sp += 1
            else:
                sp -= 1
                a = buf[sp - 1]
                b = buf[sp]
                if c == 2:
                    for r in range(n):
                        a[r] = a[r] + b[r]
                elif c == 3:
                    for r in range(n):
                        a[r] = a[r] - b[r]
                elif c == 4:
                    for r in range(n):
                        a[r] = a[r] * b[r]
                else:
                    for r in range(n):
                        a[r] = 1.0 if abs(b[r]) < 1e-9 else a[r] / b[r]
                for r in range(n):
                    if a[r] > 1e30:
                        a[r] = 1e30
                    elif a[r] < -1e30:
                        a[r] = -1e30
        return buf[0].copy()
else:
    _eval_program_numba = None


def eval_program(code, arg, consts, X, backend: str | None = None) -> np.ndarray:
    backend = backend or BACKEND
    if backend == "numba":
        if _eval_program_numba is None:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return _eval_program_numba(code, arg, consts, X)
    if backend == "numpy":
        return _eval_program_numpy(code, arg, consts, X)
    raise ValueError(f"unknown backend {backend!r}")
