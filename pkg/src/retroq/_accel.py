"""Ensemble path kernels in two interchangeable flavors.

The numba flavor compiles a per-trajectory loop and parallelizes across
trajectories; the numpy flavor vectorizes the identical update over the
trajectory axis. RETROQ_BACKEND selects one explicitly ("numba" or
"numpy"); when unset, numba wins if it imports. Noise increments are always
drawn by the caller, so a given seed feeds the same numbers to either
backend, and cross-trajectory reductions happen outside the kernels.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is available in CI
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap

    prange = range


def backend() -> str:
    """Resolve the active kernel flavor from RETROQ_BACKEND."""
    choice = os.environ.get("RETROQ_BACKEND", "").strip().lower()
    if choice:
        if choice not in ("numba", "numpy"):
            raise ValueError(f"RETROQ_BACKEND={choice!r}; expected 'numba' or 'numpy'")
        if choice == "numba" and not HAVE_NUMBA:
            raise RuntimeError("RETROQ_BACKEND=numba, but numba is not importable")
        return choice
    return "numba" if HAVE_NUMBA else "numpy"


def _sample_positions(steps: int, sample_indices) -> np.ndarray:
    pos = np.full(steps + 1, -1, dtype=np.int64)
    for out_i, s in enumerate(sample_indices):
        s = int(s)
        if not 0 <= s <= steps:
            raise ValueError(f"sample index {s} outside the 0..{steps} grid")
        if pos[s] >= 0:
            raise ValueError(f"duplicate sample index {s}")
        pos[s] = out_i
    return pos


def _homodyne_numpy(h, jumps, jtj, c, sq, rho0, dt, incr, from_record, pos, n_samples):
    n, steps = incr.shape
    d = rho0.shape[0]
    cdag = c.conj().T
    xc = c + cdag
    states = np.zeros((n, n_samples, d, d), dtype=complex)
    dys = np.zeros((n, steps))
    xbars = np.zeros((n, steps))
    rho = np.broadcast_to(rho0, (n, d, d)).copy()
    if pos[0] >= 0:
        states[:, pos[0]] = rho
    for k in range(steps):
        xbar = np.einsum("ij,nji->n", xc, rho).real
        dy = incr[:, k] if from_record else 2.0 * sq * xbar * dt + incr[:, k]
        dw = dy - 2.0 * sq * xbar * dt
        lr = -1j * (h @ rho - rho @ h)
        for a in range(jumps.shape[0]):
            lr = lr + jumps[a] @ rho @ jumps[a].conj().T
            lr = lr - 0.5 * (jtj[a] @ rho + rho @ jtj[a])
        hc = c @ rho + rho @ cdag - xbar[:, None, None] * rho
        rho = rho + dt * lr + (sq * dw)[:, None, None] * hc
        rho = 0.5 * (rho + rho.conj().transpose(0, 2, 1))
        w, v = np.linalg.eigh(rho)
        rho = (v * np.clip(w, 0.0, None)[:, None, :]) @ v.conj().transpose(0, 2, 1)
        tr = np.einsum("nii->n", rho).real
        if np.any(tr <= 0.0):
            raise ValueError("a trajectory collapsed to zero trace; reduce dt")
        rho = rho / tr[:, None, None]
        dys[:, k] = dy
        xbars[:, k] = xbar
        if pos[k + 1] >= 0:
            states[:, pos[k + 1]] = rho
    return states, dys, xbars


@njit(parallel=True, cache=True)
def _homodyne_numba(h, jumps, jtj, c, cdag, xc, sq, rho0, dt, incr, from_record, pos, states, dys, xbars, flags):
    n, steps = incr.shape
    d = rho0.shape[0]
    for i in prange(n):
        rho = rho0.copy()
        if pos[0] >= 0:
            states[i, pos[0]] = rho
        for k in range(steps):
            xr = xc @ rho
            xbar = 0.0
            for q in range(d):
                xbar += xr[q, q].real
            if from_record:
                dy = incr[i, k]
            else:
                dy = 2.0 * sq * xbar * dt + incr[i, k]
            dw = dy - 2.0 * sq * xbar * dt
            lr = -1j * (h @ rho - rho @ h)
            for a in range(jumps.shape[0]):
                ja = jumps[a]
                lr = lr + ja @ rho @ ja.conj().T
                lr = lr - 0.5 * (jtj[a] @ rho + rho @ jtj[a])
            hc = c @ rho + rho @ cdag - xbar * rho
            rho = rho + dt * lr + (sq * dw) * hc
            rho = 0.5 * (rho + rho.conj().T)
            w, v = np.linalg.eigh(rho)
            w = np.maximum(w, 0.0)
            rho = (v * w.astype(np.complex128)) @ v.conj().T
            tr = 0.0
            for q in range(d):
                tr += rho[q, q].real
            if tr <= 0.0:
                flags[i] = 1
                break
            rho = rho / tr
            dys[i, k] = dy
            xbars[i, k] = xbar
            if pos[k + 1] >= 0:
                states[i, pos[k + 1]] = rho


def homodyne_paths(h, jumps, c, sq, rho0, dt, incr, from_record, sample_indices, which=None):
    """Integrate diffusive trajectories; returns (sampled states, dY, <X_c>).

    incr holds per-step dW draws, or recorded dY when from_record is true.
    jumps must include the monitored channel with its sqrt(kappa) weight.
    """
    which = which or backend()
    incr = np.ascontiguousarray(incr, dtype=float)
    steps = incr.shape[1]
    pos = _sample_positions(steps, sample_indices)
    h = np.ascontiguousarray(h, dtype=complex)
    c = np.ascontiguousarray(c, dtype=complex)
    rho0 = np.ascontiguousarray(rho0, dtype=complex)
    d = rho0.shape[0]
    jumps = (
        np.ascontiguousarray(np.stack(jumps), dtype=complex)
        if len(jumps)
        else np.zeros((0, d, d), dtype=complex)
    )
    jtj = np.stack([j.conj().T @ j for j in jumps]) if len(jumps) else jumps.copy()
    n_samples = len(sample_indices)
    if which == "numpy":
        return _homodyne_numpy(
            h, jumps, jtj, c, sq, rho0, dt, incr, bool(from_record), pos, n_samples
        )
    n = incr.shape[0]
    states = np.zeros((n, n_samples, d, d), dtype=complex)
    dys = np.zeros((n, steps))
    xbars = np.zeros((n, steps))
    flags = np.zeros(n, dtype=np.int64)
    _homodyne_numba(
        h, jumps, jtj, c, np.ascontiguousarray(c.conj().T),
        np.ascontiguousarray(c + c.conj().T), float(sq), rho0, float(dt),
        incr, bool(from_record), pos, states, dys, xbars, flags,
    )
    if flags.any():
        raise ValueError("a trajectory collapsed to zero trace; reduce dt")
    return states, dys, xbars


def _counting_numpy(a0, a1, sjumps, ctck, rho0, dt, incr, from_record, pos, n_samples):
    n, steps = incr.shape
    d = rho0.shape[0]
    states = np.zeros((n, n_samples, d, d), dtype=complex)
    counts = np.zeros((n, steps), dtype=np.int64)
    rho = np.broadcast_to(rho0, (n, d, d)).copy()
    if pos[0] >= 0:
        states[:, pos[0]] = rho
    for k in range(steps):
        if from_record:
            fire = incr[:, k] > 0.5
        else:
            p1 = np.einsum("ij,nji->n", ctck, rho).real * dt
            if np.any(p1 > 1.0):
                raise ValueError("jump probability exceeded 1; reduce dt")
            fire = incr[:, k] < p1
        jumped = a1 @ rho @ a1.conj().T
        stayed = a0 @ rho @ a0.conj().T
        for a in range(sjumps.shape[0]):
            stayed = stayed + sjumps[a] @ rho @ sjumps[a].conj().T
        rho = np.where(fire[:, None, None], jumped, stayed)
        tr = np.einsum("nii->n", rho).real
        if np.any(tr <= 0.0):
            raise ValueError("a record branch has zero weight; the record is infeasible")
        rho = rho / tr[:, None, None]
        counts[:, k] = fire
        if pos[k + 1] >= 0:
            states[:, pos[k + 1]] = rho
    return states, counts


@njit(parallel=True, cache=True)
def _counting_numba(a0, a1, sjumps, ctck, rho0, dt, incr, from_record, pos, states, counts, flags):
    n, steps = incr.shape
    d = rho0.shape[0]
    for i in prange(n):
        rho = rho0.copy()
        if pos[0] >= 0:
            states[i, pos[0]] = rho
        for k in range(steps):
            if from_record:
                fire = incr[i, k] > 0.5
            else:
                lr = ctck @ rho
                p1 = 0.0
                for q in range(d):
                    p1 += lr[q, q].real
                p1 *= dt
                if p1 > 1.0:
                    flags[i] = 2
                    break
                fire = incr[i, k] < p1
            if fire:
                rho = a1 @ rho @ a1.conj().T
            else:
                nxt = a0 @ rho @ a0.conj().T
                for a in range(sjumps.shape[0]):
                    nxt = nxt + sjumps[a] @ rho @ sjumps[a].conj().T
                rho = nxt
            tr = 0.0
            for q in range(d):
                tr += rho[q, q].real
            if tr <= 0.0:
                flags[i] = 1
                break
            rho = rho / tr
            counts[i, k] = 1 if fire else 0
            if pos[k + 1] >= 0:
                states[i, pos[k + 1]] = rho


def counting_paths(a0, a1, sjumps, ctck, rho0, dt, incr, from_record, sample_indices, which=None):
    """Integrate jump trajectories; returns (sampled states, counts).

    incr holds per-step uniform draws, or a recorded 0/1 count sequence when
    from_record is true. a0/a1 are the no-jump and jump branch operators,
    sjumps the sqrt(dt)-scaled unmonitored channels, ctck = kappa * c†c.
    """
    which = which or backend()
    incr = np.ascontiguousarray(incr, dtype=float)
    steps = incr.shape[1]
    pos = _sample_positions(steps, sample_indices)
    a0 = np.ascontiguousarray(a0, dtype=complex)
    a1 = np.ascontiguousarray(a1, dtype=complex)
    ctck = np.ascontiguousarray(ctck, dtype=complex)
    rho0 = np.ascontiguousarray(rho0, dtype=complex)
    d = rho0.shape[0]
    sjumps = (
        np.ascontiguousarray(np.stack(sjumps), dtype=complex)
        if len(sjumps)
        else np.zeros((0, d, d), dtype=complex)
    )
    n_samples = len(sample_indices)
    if which == "numpy":
        return _counting_numpy(
            a0, a1, sjumps, ctck, rho0, dt, incr, bool(from_record), pos, n_samples
        )
    n = incr.shape[0]
    states = np.zeros((n, n_samples, d, d), dtype=complex)
    counts = np.zeros((n, steps), dtype=np.int64)
    flags = np.zeros(n, dtype=np.int64)
    _counting_numba(
        a0, a1, sjumps, ctck, rho0, float(dt), incr, bool(from_record), pos,
        states, counts, flags,
    )
    if (flags == 2).any():
        raise ValueError("jump probability exceeded 1; reduce dt")
    if (flags == 1).any():
        raise ValueError("a record branch has zero weight; the record is infeasible")
    return states, counts
