"""Fixed-step classical RK4 kernels for the first-order companion system.

The system is x' = A(t) x with A in companion form: rows 0..n-2 shift, and
row n-1 equal to -(c_0(t)+M, c_1(t), ..., c_{n-1}(t)) where c_i is the
coefficient multiplying u^(i) in the scalar operator.  Coefficient values
are pre-sampled on the half-step grid t_j = a + j*h/2 (carr[j, i] = c_i).

Kernels are compiled with numba when available; a vectorized numpy path
with identical semantics is used otherwise.
"""

from __future__ import annotations

import numpy as np

OVERFLOW_LIMIT = 1e300

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _rk4_final_states_nb(carr, ms, h, steps):  # pragma: no cover - numba
    L = ms.shape[0]
    n = carr.shape[1]
    out = np.empty((L, n, n))
    y = np.empty((n, n))
    s2 = np.empty((n, n))
    k1 = np.empty((n, n))
    k2 = np.empty((n, n))
    k3 = np.empty((n, n))
    k4 = np.empty((n, n))
    for l in range(L):
        m = ms[l]
        for i in range(n):
            for c in range(n):
                y[i, c] = 1.0 if i == c else 0.0
        for step in range(steps):
            c0 = 2 * step
            c1 = 2 * step + 1
            c2 = 2 * step + 2
            for col in range(n):
                for i in range(n - 1):
                    k1[i, col] = y[i + 1, col]
                acc = m * y[0, col]
                for i in range(n):
                    acc += carr[c0, i] * y[i, col]
                k1[n - 1, col] = -acc
            for i in range(n):
                for col in range(n):
                    s2[i, col] = y[i, col] + 0.5 * h * k1[i, col]
            for col in range(n):
                for i in range(n - 1):
                    k2[i, col] = s2[i + 1, col]
                acc = m * s2[0, col]
                for i in range(n):
                    acc += carr[c1, i] * s2[i, col]
                k2[n - 1, col] = -acc
            for i in range(n):
                for col in range(n):
                    s2[i, col] = y[i, col] + 0.5 * h * k2[i, col]
            for col in range(n):
                for i in range(n - 1):
                    k3[i, col] = s2[i + 1, col]
                acc = m * s2[0, col]
                for i in range(n):
                    acc += carr[c1, i] * s2[i, col]
                k3[n - 1, col] = -acc
            for i in range(n):
                for col in range(n):
                    s2[i, col] = y[i, col] + h * k3[i, col]
            for col in range(n):
                for i in range(n - 1):
                    k4[i, col] = s2[i + 1, col]
                acc = m * s2[0, col]
                for i in range(n):
                    acc += carr[c2, i] * s2[i, col]
                k4[n - 1, col] = -acc
            big = 0.0
            for i in range(n):
                for col in range(n):
                    y[i, col] += (h / 6.0) * (
                        k1[i, col] + 2.0 * k2[i, col] + 2.0 * k3[i, col] + k4[i, col]
                    )
                    v = abs(y[i, col])
                    if v > big:
                        big = v
            if big > OVERFLOW_LIMIT:
                return 1, out
        for i in range(n):
            for c in range(n):
                out[l, i, c] = y[i, c]
    return 0, out


@njit(cache=True)
def _rk4_snapshots_nb(carr, m, h, steps, stride):  # pragma: no cover - numba
    n = carr.shape[1]
    n_out = steps // stride + 1
    out = np.empty((n_out, n, n))
    y = np.empty((n, n))
    s2 = np.empty((n, n))
    k1 = np.empty((n, n))
    k2 = np.empty((n, n))
    k3 = np.empty((n, n))
    k4 = np.empty((n, n))
    for i in range(n):
        for c in range(n):
            y[i, c] = 1.0 if i == c else 0.0
            out[0, i, c] = y[i, c]
    for step in range(steps):
        c0 = 2 * step
        c1 = 2 * step + 1
        c2 = 2 * step + 2
        for col in range(n):
            for i in range(n - 1):
                k1[i, col] = y[i + 1, col]
            acc = m * y[0, col]
            for i in range(n):
                acc += carr[c0, i] * y[i, col]
            k1[n - 1, col] = -acc
        for i in range(n):
            for col in range(n):
                s2[i, col] = y[i, col] + 0.5 * h * k1[i, col]
        for col in range(n):
            for i in range(n - 1):
                k2[i, col] = s2[i + 1, col]
            acc = m * s2[0, col]
            for i in range(n):
                acc += carr[c1, i] * s2[i, col]
            k2[n - 1, col] = -acc
        for i in range(n):
            for col in range(n):
                s2[i, col] = y[i, col] + 0.5 * h * k2[i, col]
        for col in range(n):
            for i in range(n - 1):
                k3[i, col] = s2[i + 1, col]
            acc = m * s2[0, col]
            for i in range(n):
                acc += carr[c1, i] * s2[i, col]
            k3[n - 1, col] = -acc
        for i in range(n):
            for col in range(n):
                s2[i, col] = y[i, col] + h * k3[i, col]
        for col in range(n):
            for i in range(n - 1):
                k4[i, col] = s2[i + 1, col]
            acc = m * s2[0, col]
            for i in range(n):
                acc += carr[c2, i] * s2[i, col]
            k4[n - 1, col] = -acc
        big = 0.0
        for i in range(n):
            for col in range(n):
                y[i, col] += (h / 6.0) * (
                    k1[i, col] + 2.0 * k2[i, col] + 2.0 * k3[i, col] + k4[i, col]
                )
                v = abs(y[i, col])
                if v > big:
                    big = v
        if big > OVERFLOW_LIMIT:
            return 1, out
        if (step + 1) % stride == 0:
            idx = (step + 1) // stride
            for i in range(n):
                for c in range(n):
                    out[idx, i, c] = y[i, c]
    return 0, out


def _derivative_np(carr_row, ms, state):
    """Companion derivative, vectorized over the leading M axis."""
    out = np.empty_like(state)
    out[:, :-1, :] = state[:, 1:, :]
    out[:, -1, :] = -(
        np.einsum("i,lij->lj", carr_row, state) + ms[:, None] * state[:, 0, :]
    )
    return out


def _rk4_final_states_np(carr, ms, h, steps):
    L = ms.shape[0]
    n = carr.shape[1]
    y = np.broadcast_to(np.eye(n), (L, n, n)).copy()
    for step in range(steps):
        c0, c1, c2 = carr[2 * step], carr[2 * step + 1], carr[2 * step + 2]
        k1 = _derivative_np(c0, ms, y)
        k2 = _derivative_np(c1, ms, y + 0.5 * h * k1)
        k3 = _derivative_np(c1, ms, y + 0.5 * h * k2)
        k4 = _derivative_np(c2, ms, y + h * k3)
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.max(np.abs(y)) > OVERFLOW_LIMIT:
            return 1, y
    return 0, y


def _rk4_snapshots_np(carr, m, h, steps, stride):
    n = carr.shape[1]
    ms = np.array([m])
    y = np.eye(n)[None, :, :].copy()
    out = np.empty((steps // stride + 1, n, n))
    out[0] = y[0]
    for step in range(steps):
        c0, c1, c2 = carr[2 * step], carr[2 * step + 1], carr[2 * step + 2]
        k1 = _derivative_np(c0, ms, y)
        k2 = _derivative_np(c1, ms, y + 0.5 * h * k1)
        k3 = _derivative_np(c1, ms, y + 0.5 * h * k2)
        k4 = _derivative_np(c2, ms, y + h * k3)
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.max(np.abs(y)) > OVERFLOW_LIMIT:
            return 1, out
        if (step + 1) % stride == 0:
            out[(step + 1) // stride] = y[0]
    return 0, out


def rk4_final_states(carr, ms, h, steps):
    """Endpoint state matrices for a batch of shift values.

    Returns (status, states) with states of shape (len(ms), n, n); status 1
    signals that some state magnitude exceeded the overflow guard.
    """
    carr = np.ascontiguousarray(carr, dtype=float)
    ms = np.ascontiguousarray(ms, dtype=float)
    if HAVE_NUMBA:
        return _rk4_final_states_nb(carr, ms, float(h), int(steps))
    return _rk4_final_states_np(carr, ms, float(h), int(steps))


def rk4_snapshots(carr, m, h, steps, stride=1):
    """Node-state snapshots every `stride` steps for a single shift value."""
    if steps % stride != 0:
        raise ValueError(f"stride {stride} must divide steps {steps}")
    carr = np.ascontiguousarray(carr, dtype=float)
    if HAVE_NUMBA:
        return _rk4_snapshots_nb(carr, float(m), float(h), int(steps), int(stride))
    return _rk4_snapshots_np(carr, float(m), float(h), int(steps), int(stride))
