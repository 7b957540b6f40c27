"""Markovian generators and fixed-step propagation of states (forward) and effects (backward).

States follow d rho/dt = L(rho); effects follow dE/dt = -L†(E) with a terminal
condition, integrated here as dE/ds = +L†(E) in reversed time s. Both passes use
classic RK4 on the same grid, which makes the discrete backward flow the exact
algebraic adjoint of the discrete forward flow.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .algebra import DEFAULT_TOL, asoperator, dagger, hermitian_part, hermiticity_defect, validate_state

PROJECTION_FAIL_TOL = 1e-10


@dataclass(frozen=True)
class Bath:
    """One dissipation channel: jump operators with rates absorbed (sqrt(rate) * op).

    beta is the inverse temperature tag used by thermodynamic bookkeeping; leave
    None for channels with no thermal interpretation (e.g. a monitoring port).
    """

    label: str
    jumps: tuple
    beta: float | None = None

    def __post_init__(self):
        ops = tuple(asoperator(j) for j in self.jumps)
        if not ops:
            raise ValueError(f"bath {self.label!r} has no jump operators")
        d = ops[0].shape[0]
        if any(j.shape != (d, d) for j in ops):
            raise ValueError(f"bath {self.label!r} jump operators must share one dimension")
        object.__setattr__(self, "jumps", ops)


@dataclass(frozen=True)
class LindbladGenerator:
    hamiltonian: np.ndarray
    baths: tuple = ()
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        h = asoperator(self.hamiltonian)
        if hermiticity_defect(h) > self.tol * max(1.0, float(np.max(np.abs(h)))):
            raise ValueError("Hamiltonian is not Hermitian within tolerance")
        baths = tuple(self.baths)
        labels = [b.label for b in baths]
        if len(set(labels)) != len(labels):
            raise ValueError("bath labels must be unique")
        if any(b.jumps[0].shape != h.shape for b in baths):
            raise ValueError("bath jump operators must match the Hamiltonian dimension")
        object.__setattr__(self, "hamiltonian", hermitian_part(h))
        object.__setattr__(self, "baths", baths)
        # precompute L†L per jump for the anticommutator terms
        jj = tuple((j, dagger(j) @ j) for b in baths for j in b.jumps)
        object.__setattr__(self, "_jumps_sq", jj)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def bath(self, label: str) -> Bath:
        for b in self.baths:
            if b.label == label:
                return b
        raise KeyError(f"no bath labelled {label!r}; have {[b.label for b in self.baths]}")

    def apply(self, rho) -> np.ndarray:
        """Schrodinger-picture generator L(rho), hbar = 1."""
        r = asoperator(rho)
        h = self.hamiltonian
        out = -1j * (h @ r - r @ h)
        for j, jsq in self._jumps_sq:
            out += j @ r @ dagger(j) - 0.5 * (jsq @ r + r @ jsq)
        return out

    def adjoint(self, x) -> np.ndarray:
        """Heisenberg-picture generator L†(X); annihilates the identity."""
        xm = asoperator(x)
        h = self.hamiltonian
        out = 1j * (h @ xm - xm @ h)
        for j, jsq in self._jumps_sq:
            out += dagger(j) @ xm @ j - 0.5 * (jsq @ xm + xm @ jsq)
        return out

    def dissipator(self, label: str, rho) -> np.ndarray:
        """The labelled bath's dissipator alone, no Hamiltonian part."""
        r = asoperator(rho)
        out = np.zeros_like(r)
        for j in self.bath(label).jumps:
            jd = dagger(j)
            jsq = jd @ j
            out += j @ r @ jd - 0.5 * (jsq @ r + r @ jsq)
        return out

    def superoperator(self) -> np.ndarray:
        """Dense matrix of L acting on row-major vec(rho)."""
        d = self.dim
        eye = np.eye(d, dtype=complex)
        h = self.hamiltonian
        mat = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for j, jsq in self._jumps_sq:
            mat += np.kron(j, j.conj()) - 0.5 * (np.kron(jsq, eye) + np.kron(eye, jsq.T))
        return mat


@dataclass(frozen=True)
class Timeline:
    """Operators sampled on a uniform grid; kind is 'state' or 'effect'."""

    times: np.ndarray
    mats: np.ndarray
    kind: str

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        m = np.asarray(self.mats, dtype=complex)
        if self.kind not in ("state", "effect"):
            raise ValueError(f"timeline kind must be 'state' or 'effect', got {self.kind!r}")
        if t.ndim != 1 or m.ndim != 3 or m.shape[0] != t.shape[0] or m.shape[1] != m.shape[2]:
            raise ValueError("timeline needs times (n,) and matching operators (n, d, d)")
        if t.size > 1:
            steps = np.diff(t)
            if steps.min() <= 0 or steps.max() - steps.min() > 1e-9 * max(1.0, steps.max()):
                raise ValueError("timeline grid must be uniform and increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "mats", m)

    @property
    def dim(self) -> int:
        return self.mats.shape[1]

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the stored grid")
        return k

    def at(self, t: float) -> np.ndarray:
        return self.mats[self.index(t)]

    def to_csv(self, path):
        d = self.dim
        header = ["time"]
        for i in range(d):
            for j in range(d):
                header += [f"re_{i}{j}", f"im_{i}{j}"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([self.kind])
            w.writerow(header)
            for t, m in zip(self.times, self.mats):
                row = [repr(float(t))]
                flat = m.ravel()
                for z in flat:
                    row += [repr(float(z.real)), repr(float(z.imag))]
                w.writerow(row)


def timeline_from_csv(path) -> Timeline:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    kind = rows[0][0]
    ncol = len(rows[1]) - 1
    d = int(round(np.sqrt(ncol / 2)))
    times, mats = [], []
    for row in rows[2:]:
        times.append(float(row[0]))
        vals = np.array([float(x) for x in row[1:]])
        mats.append((vals[0::2] + 1j * vals[1::2]).reshape(d, d))
    return Timeline(np.array(times), np.array(mats), kind)


def _grid(t0: float, t1: float, dt: float) -> tuple[int, float]:
    span = t1 - t0
    if span <= 0 or dt <= 0:
        raise ValueError("need t1 > t0 and dt > 0")
    n = int(round(span / dt))
    if n < 1 or abs(n * dt - span) > 1e-9 * max(1.0, span):
        raise ValueError(f"span {span} is not an integer number of steps of dt={dt}")
    return n, span / n


def _rk4(flow, y, h):
    k1 = flow(y)
    k2 = flow(y + 0.5 * h * k1)
    k3 = flow(y + 0.5 * h * k2)
    k4 = flow(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _project_state(mat):
    """Symmetrize, clamp negative eigenvalues, renormalize. Returns (mat, magnitude)."""
    sym = hermitian_part(mat)
    w, v = np.linalg.eigh(sym)
    neg = max(0.0, -float(w.min()))
    w = np.clip(w, 0.0, None)
    tr = float(w.sum())
    mag = neg + abs(tr - 1.0)
    if tr <= 0.0:
        raise ValueError("state collapsed to zero trace during propagation")
    return (v * (w / tr)) @ dagger(v), mag


def _project_effect(mat):
    sym = hermitian_part(mat)
    w, v = np.linalg.eigh(sym)
    mag = max(0.0, -float(w.min())) + max(0.0, float(w.max()) - 1.0)
    w = np.clip(w, 0.0, 1.0)
    return (v * w) @ dagger(v), mag


def propagate_forward(gen: LindbladGenerator, rho0, t0: float, t1: float, dt: float) -> Timeline:
    """RK4-integrate a state from t0 to t1; each step is projected back onto
    valid states and the run aborts if any projection exceeds 1e-10."""
    n, h = _grid(t0, t1, dt)
    rho = validate_state(rho0).mat
    d = rho.shape[0]
    mats = np.empty((n + 1, d, d), dtype=complex)
    mats[0] = rho
    for k in range(n):
        rho = _rk4(gen.apply, rho, h)
        rho, mag = _project_state(rho)
        if mag > PROJECTION_FAIL_TOL:
            raise ValueError(
                f"state projection of magnitude {mag:.3e} at step {k + 1} "
                f"exceeds {PROJECTION_FAIL_TOL:.0e}; reduce dt"
            )
        mats[k + 1] = rho
    return Timeline(t0 + h * np.arange(n + 1), mats, "state")


def propagate_backward(gen: LindbladGenerator, effect_final, t1: float, t0: float, dt: float) -> Timeline:
    """Integrate an effect from its terminal condition at t1 down to t0.

    Runs dE/ds = +L†(E) in s = t1 - t; the identity is a fixed point, and the
    [0, 1] spectrum is preserved up to per-step projections bounded like the
    forward pass.
    """
    n, h = _grid(t0, t1, dt)
    e = asoperator(effect_final)
    if hermiticity_defect(e) > DEFAULT_TOL:
        raise ValueError("terminal effect is not Hermitian within tolerance")
    d = e.shape[0]
    mats = np.empty((n + 1, d, d), dtype=complex)
    mats[n] = e
    for k in range(n):
        e = _rk4(gen.adjoint, e, h)
        e, mag = _project_effect(e)
        if mag > PROJECTION_FAIL_TOL:
            raise ValueError(
                f"effect projection of magnitude {mag:.3e} at step {k + 1} "
                f"exceeds {PROJECTION_FAIL_TOL:.0e}; reduce dt"
            )
        mats[n - 1 - k] = e
    return Timeline(t0 + h * np.arange(n + 1), mats, "effect")


def evolve_state(gen: LindbladGenerator, rho, duration: float, dt: float = 1e-3) -> np.ndarray:
    """Raw RK4 composition over a duration (no per-step projection).

    Used for chain stages, where the matching effect evolution must be the
    exact algebraic adjoint; duration 0 is the identity.
    """
    if duration == 0.0:
        return asoperator(rho).copy()
    n, h = _grid(0.0, duration, dt)
    out = asoperator(rho)
    for _ in range(n):
        out = _rk4(gen.apply, out, h)
    return out


def evolve_effect(gen: LindbladGenerator, effect, duration: float, dt: float = 1e-3) -> np.ndarray:
    """Adjoint companion of evolve_state: same grid, generator L†."""
    if duration == 0.0:
        return asoperator(effect).copy()
    n, h = _grid(0.0, duration, dt)
    out = asoperator(effect)
    for _ in range(n):
        out = _rk4(gen.adjoint, out, h)
    return out


def stationary_state(gen: LindbladGenerator, sv_tol: float = 1e-10):
    """Null space of the vectorized generator; errors if the kernel is degenerate."""
    mat = gen.superoperator()
    _, s, vh = np.linalg.svd(mat)
    smax = float(s.max()) if s.size else 1.0
    null = [vh[i].conj() for i in range(len(s)) if s[i] < sv_tol * max(smax, 1.0)]
    if not null:
        raise ValueError("no stationary state found (empty null space)")
    if len(null) > 1:
        raise ValueError(
            f"stationary subspace is {len(null)}-fold degenerate; "
            "pick a component or perturb the generator"
        )
    d = gen.dim
    cand = null[0].reshape(d, d)
    tr = complex(np.trace(cand))
    if abs(tr) < 1e-12:
        raise ValueError("stationary null vector is traceless, cannot normalize")
    state = validate_state(hermitian_part(cand / tr), tol=1e-8)
    resid = float(np.max(np.abs(gen.apply(state.mat))))
    if resid > 1e-8:
        raise ValueError(f"stationary candidate has residual {resid:.3e}")
    return state


def pairing_drift(gen: LindbladGenerator, rho0, effect_final, t0: float, t1: float, dt: float) -> float:
    """Worst-case deviation of Tr[E_t rho_t] from the exactly conserved pairing.

    The reference value pairs the terminal effect with a dense-exponential
    propagation of the initial state, so the returned number measures true
    integrator error rather than a telescoping identity.
    """
    fwd = propagate_forward(gen, rho0, t0, t1, dt)
    bwd = propagate_backward(gen, effect_final, t1, t0, dt)
    prop = scipy.linalg.expm((t1 - t0) * gen.superoperator())
    rho_exact = (prop @ validate_state(rho0).mat.ravel()).reshape(gen.dim, gen.dim)
    ref = float(np.trace(asoperator(effect_final) @ rho_exact).real)
    vals = np.einsum("kij,kji->k", bwd.mats, fwd.mats).real
    return float(np.max(np.abs(vals - ref)))
