"""Compiled inner loops for template optimization.

Parameter layout (``n`` two-qubit layers):

* ``x[6*k : 6*k + 3]``  U3 angles (alpha, beta, lambda) on the first qubit of
  single-qubit layer ``k`` (``k = 0`` is applied first),
* ``x[6*k + 3 : 6*k + 6]`` the same for the second qubit,
* continuous modes append per-layer gate angles: ``(theta, phi)`` pairs for
  ``GATE_FSIM``, a single ``theta`` per layer for ``GATE_XY`` (phi pinned at 0).

The template unitary is ``L_n G_n L_{n-1} ... G_1 L_0`` with ``L_k`` the
Kronecker product of the two U3 gates of layer ``k``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

GATE_FIXED = 0
GATE_FSIM = 1
GATE_XY = 2

STALL_RTOL = 1e-12
STALL_ITERS = 3

_JIT = dict(cache=True, nogil=True, fastmath=False)


@njit(**_JIT)
def n_params(n_layers, gate_mode):
    n = 6 * (n_layers + 1)
    if gate_mode == GATE_FSIM:
        n += 2 * n_layers
    elif gate_mode == GATE_XY:
        n += n_layers
    return n


@njit(**_JIT)
def _u3_and_derivs(alpha, beta, lam, out):
    # out[0] = U3, out[1..3] = d/dalpha, d/dbeta, d/dlambda
    c = np.cos(alpha / 2)
    s = np.sin(alpha / 2)
    eb = np.exp(1j * beta)
    el = np.exp(1j * lam)
    ebl = eb * el
    out[0, 0, 0] = c
    out[0, 0, 1] = -el * s
    out[0, 1, 0] = eb * s
    out[0, 1, 1] = ebl * c
    out[1, 0, 0] = -s / 2
    out[1, 0, 1] = -el * c / 2
    out[1, 1, 0] = eb * c / 2
    out[1, 1, 1] = -ebl * s / 2
    out[2, 0, 0] = 0.0
    out[2, 0, 1] = 0.0
    out[2, 1, 0] = 1j * eb * s
    out[2, 1, 1] = 1j * ebl * c
    out[3, 0, 0] = 0.0
    out[3, 0, 1] = -1j * el * s
    out[3, 1, 0] = 0.0
    out[3, 1, 1] = 1j * ebl * c


@njit(**_JIT)
def _fsim_and_derivs(theta, phi, out):
    # out[0] = fSim, out[1] = d/dtheta, out[2] = d/dphi
    out[:] = 0.0
    c = np.cos(theta)
    s = np.sin(theta)
    ep = np.exp(-1j * phi)
    out[0, 0, 0] = 1.0
    out[0, 1, 1] = c
    out[0, 1, 2] = -1j * s
    out[0, 2, 1] = -1j * s
    out[0, 2, 2] = c
    out[0, 3, 3] = ep
    out[1, 1, 1] = -s
    out[1, 1, 2] = -1j * c
    out[1, 2, 1] = -1j * c
    out[1, 2, 2] = -s
    out[2, 3, 3] = -1j * ep


@njit(**_JIT)
def _kron2(a, b, out):
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    out[2 * i + k, 2 * j + l] = a[i, j] * b[k, l]


@njit(**_JIT)
def _matmul4(a, b, out):
    for i in range(4):
        for j in range(4):
            acc = 0j
            for k in range(4):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


@njit(**_JIT)
def _trace_prod4(a, b):
    # Tr(a @ b)
    acc = 0j
    for i in range(4):
        for k in range(4):
            acc += a[i, k] * b[k, i]
    return acc


@njit(**_JIT)
def _trace_prod2(a, b):
    return a[0, 0] * b[0, 0] + a[0, 1] * b[1, 0] + a[1, 0] * b[0, 1] + a[1, 1] * b[1, 1]


@njit(**_JIT)
def overlap_and_grad(x, n_layers, gate_mode, gate, target_dag, dz):
    """Return ``z = Tr(T^dagger U(x))`` and write ``dz/dx`` into ``dz``."""
    n_single = n_layers + 1
    n_fact = 2 * n_layers + 1
    u3s = np.empty((n_single, 2, 4, 2, 2), dtype=np.complex128)
    for k in range(n_single):
        for q in range(2):
            o = 6 * k + 3 * q
            _u3_and_derivs(x[o], x[o + 1], x[o + 2], u3s[k, q])
    gates = np.empty((max(n_layers, 1), 3, 4, 4), dtype=np.complex128)
    base = 6 * n_single
    for k in range(n_layers):
        if gate_mode == GATE_FIXED:
            gates[k, 0] = gate
        elif gate_mode == GATE_FSIM:
            _fsim_and_derivs(x[base + 2 * k], x[base + 2 * k + 1], gates[k])
        else:
            _fsim_and_derivs(x[base + k], 0.0, gates[k])

    factors = np.empty((n_fact, 4, 4), dtype=np.complex128)
    for j in range(n_fact):
        if j % 2 == 0:
            k = j // 2
            _kron2(u3s[k, 0, 0], u3s[k, 1, 0], factors[j])
        else:
            factors[j] = gates[j // 2, 0]

    # right[j] = F_{j-1} ... F_0
    right = np.empty((n_fact + 1, 4, 4), dtype=np.complex128)
    right[0] = np.eye(4, dtype=np.complex128)
    for j in range(n_fact):
        _matmul4(factors[j], right[j], right[j + 1])
    z = _trace_prod4(target_dag, right[n_fact])

    left = np.eye(4, dtype=np.complex128)
    tmp = np.empty((4, 4), dtype=np.complex128)
    env = np.empty((4, 4), dtype=np.complex128)
    new_left = np.empty((4, 4), dtype=np.complex128)
    na = np.empty((2, 2), dtype=np.complex128)
    nb = np.empty((2, 2), dtype=np.complex128)
    for j in range(n_fact - 1, -1, -1):
        # env = R_j T^dagger Lf_j so that dz = Tr(dF_j env)
        _matmul4(target_dag, left, tmp)
        _matmul4(right[j], tmp, env)
        if j % 2 == 0:
            k = j // 2
            a = u3s[k, 0, 0]
            b = u3s[k, 1, 0]
            for p in range(2):
                for r in range(2):
                    acc_a = 0j
                    acc_b = 0j
                    for s in range(2):
                        for t in range(2):
                            # na[p, r] = sum_{s,t} b[s, t] env[2p + t, 2r + s]
                            acc_a += b[s, t] * env[2 * p + t, 2 * r + s]
                            # nb[p, r] = sum_{s,t} a[s, t] env[2t + p, 2s + r]
                            acc_b += a[s, t] * env[2 * t + p, 2 * s + r]
                    na[p, r] = acc_a
                    nb[p, r] = acc_b
            for d in range(3):
                dz[6 * k + d] = _trace_prod2(u3s[k, 0, d + 1], na)
                dz[6 * k + 3 + d] = _trace_prod2(u3s[k, 1, d + 1], nb)
        else:
            k = j // 2
            if gate_mode == GATE_FSIM:
                dz[base + 2 * k] = _trace_prod4(gates[k, 1], env)
                dz[base + 2 * k + 1] = _trace_prod4(gates[k, 2], env)
            elif gate_mode == GATE_XY:
                dz[base + k] = _trace_prod4(gates[k, 1], env)
        _matmul4(left, factors[j], new_left)
        left[:] = new_left
    return z


@njit(**_JIT)
def objective_and_grad(x, n_layers, gate_mode, gate, target_dag, grad):
    """``1 - |Tr(T^dagger U)| / 4`` and its gradient (written into ``grad``)."""
    dz = np.empty(x.shape[0], dtype=np.complex128)
    z = overlap_and_grad(x, n_layers, gate_mode, gate, target_dag, dz)
    mag = abs(z)
    if mag > 1e-300:
        for p in range(x.shape[0]):
            grad[p] = -(z.real * dz[p].real + z.imag * dz[p].imag) / (4.0 * mag)
    else:
        grad[:] = 0.0
    return 1.0 - mag / 4.0


@njit(**_JIT)
def objective(x, n_layers, gate_mode, gate, target_dag):
    grad = np.empty(x.shape[0])
    return objective_and_grad(x, n_layers, gate_mode, gate, target_dag, grad)


@njit(**_JIT)
def bfgs(x0, n_layers, gate_mode, gate, target_dag, max_iters, gtol, f_floor):
    """Minimize the template objective from ``x0``.

    Quasi-Newton BFGS on the inverse Hessian with a backtracking line search
    enforcing the Armijo condition. Stops on gradient norm <= ``gtol``,
    objective <= ``f_floor``, ``max_iters`` iterations, when no step
    satisfying Armijo exists, or after ``STALL_ITERS`` consecutive steps
    with relative decrease below ``STALL_RTOL``. Returns ``(x, f, iterations)``.
    """
    n = x0.shape[0]
    x = x0.copy()
    g = np.empty(n)
    f = objective_and_grad(x, n_layers, gate_mode, gate, target_dag, g)
    hinv = np.eye(n)
    x_new = np.empty(n)
    g_new = np.empty(n)
    p = np.empty(n)
    c1 = 1e-4
    first = True
    stalled = 0
    it = 0
    while it < max_iters:
        gnorm = np.sqrt(np.dot(g, g))
        if gnorm <= gtol or f <= f_floor:
            break
        p[:] = -(hinv @ g)
        slope = np.dot(g, p)
        if slope >= 0.0:
            hinv[:] = np.eye(n)
            p[:] = -g
            slope = -gnorm * gnorm
        step = 1.0
        accepted = False
        f_new = f
        for _ in range(60):
            x_new[:] = x + step * p
            f_new = objective_and_grad(x_new, n_layers, gate_mode, gate, target_dag, g_new)
            if f_new <= f + c1 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        s = x_new - x
        y = g_new - g
        sy = np.dot(s, y)
        if sy > 1e-16 * np.sqrt(np.dot(s, s) * np.dot(y, y)) and sy > 0.0:
            if first:
                hinv[:] = np.eye(n) * (sy / np.dot(y, y))
                first = False
            rho = 1.0 / sy
            hy = hinv @ y
            yhy = np.dot(y, hy)
            # H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
            hinv += (rho * rho * yhy + rho) * np.outer(s, s) - rho * (
                np.outer(s, hy) + np.outer(hy, s)
            )
        if f - f_new <= STALL_RTOL * f:
            stalled += 1
        else:
            stalled = 0
        x[:] = x_new
        g[:] = g_new
        f = f_new
        it += 1
        if stalled >= STALL_ITERS:
            break
    return x, f, it


@njit(**_JIT)
def multistart(x0s, n_layers, gate_mode, gate, target_dag, max_iters, gtol, f_floor, stop_at):
    """Run BFGS from every row of ``x0s``; keep the best.

    If ``stop_at > 0`` the remaining starts are skipped once one reaches an
    objective value ``<= stop_at``. Returns ``(best_x, best_f, starts_run)``.
    """
    best_f = np.inf
    best_x = x0s[0].copy()
    ran = 0
    for r in range(x0s.shape[0]):
        x, f, _ = bfgs(x0s[r], n_layers, gate_mode, gate, target_dag, max_iters, gtol, f_floor)
        ran += 1
        if f < best_f:
            best_f = f
            best_x = x
        if stop_at > 0.0 and best_f <= stop_at:
            break
    return best_x, best_f, ran
