"""Entropy and heat bookkeeping along forward state timelines.

All entropies are in nats. Heat currents are signed positive INTO the bath,
so the Clausius combination reads dS/dt + sum_r beta_r J^(r) and equals the
summed per-bath entropy production. Backward effects never enter any formula
here; backward_neutrality_check turns that architectural fact into a test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    asoperator,
    dagger,
    hermitian_eig,
    hermiticity_defect,
    pairing,
    psd_log,
    validate_state,
)
from .dynamics import (
    Bath,
    LindbladGenerator,
    Timeline,
    propagate_backward,
    propagate_forward,
    stationary_state,
)

STATIONARY_TOL = 1e-8
SUPPORT_TOL = 1e-12


def von_neumann_entropy(rho) -> float:
    """-Tr[rho ln rho] with 0 ln 0 = 0."""
    w = np.linalg.eigvalsh(validate_state(rho).mat)
    w = w[w > 0.0]
    return float(-np.sum(w * np.log(w)))


def relative_entropy(rho, sigma) -> float:
    """D(rho||sigma) in nats; +inf when rho leaks outside sigma's support."""
    r = validate_state(rho).mat
    s = validate_state(sigma).mat
    if r.shape != s.shape:
        raise ValueError(f"dimension mismatch: {r.shape[0]} vs {s.shape[0]}")
    ws, vs = hermitian_eig(s)
    null = vs[:, ws <= SUPPORT_TOL]
    if null.shape[1]:
        leak = float(np.einsum("ij,jk,ki->", dagger(null), r, null).real)
        if leak > SUPPORT_TOL:
            return float("inf")
    wr = np.linalg.eigvalsh(r)
    wr = wr[wr > 0.0]
    val = float(np.sum(wr * np.log(wr)) - np.trace(r @ psd_log(s)).real)
    return max(val, 0.0) if val > -1e-10 else val


def gibbs_state(hamiltonian, beta: float) -> np.ndarray:
    """exp(-beta H) / Z."""
    w, v = hermitian_eig(hamiltonian)
    p = np.exp(-beta * (w - w.min()))
    p = p / p.sum()
    return (v * p) @ dagger(v)


def thermal_bath(omega: float, beta: float, gamma_down: float, label: str = "thermal") -> Bath:
    """Qubit emission/absorption pair in detailed balance at inverse temperature beta.

    Pairs with the Hamiltonian -(omega/2) sigma_z (index 1 is the excited
    level); the matching Gibbs state is then stationary for this bath alone.
    """
    if omega <= 0 or gamma_down <= 0:
        raise ValueError("need omega > 0 and gamma_down > 0")
    gamma_up = gamma_down * np.exp(-beta * omega)
    sm = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    return Bath(label, (np.sqrt(gamma_down) * sm, np.sqrt(gamma_up) * sm.conj().T), beta=beta)


def _check_stationary(gen: LindbladGenerator, sigma: np.ndarray) -> None:
    defect = float(np.max(np.abs(gen.apply(sigma))))
    if defect > STATIONARY_TOL:
        raise ValueError(f"sigma is not stationary: max |L(sigma)| = {defect:.3e}")


def entropy_production_rate(gen: LindbladGenerator, rho, sigma) -> float:
    """Spohn's rate -Tr[L(rho)(ln rho - ln sigma)]; nonnegative for stationary sigma."""
    r = validate_state(rho).mat
    s = validate_state(sigma).mat
    _check_stationary(gen, s)
    grad = psd_log(r) - psd_log(s)
    return float(-np.trace(gen.apply(r) @ grad).real)


def heat_current(gen: LindbladGenerator, bath_label: str, rho, hamiltonian=None) -> float:
    """-Tr[H L^(r)(rho)] for one labelled dissipator: energy flowing into that bath."""
    h = gen.hamiltonian if hamiltonian is None else asoperator(hamiltonian)
    r = validate_state(rho).mat
    return float(-np.trace(h @ gen.dissipator(bath_label, r)).real)


def work_rate(rho, dh_dt) -> float:
    """Tr[rho dH/dt] for an explicitly driven Hamiltonian."""
    dh = asoperator(dh_dt)
    if hermiticity_defect(dh) > 1e-10 * max(1.0, float(np.max(np.abs(dh)))):
        raise ValueError("dH/dt must be Hermitian")
    return pairing(dh, validate_state(rho).mat)


def _gibbs_check(gen: LindbladGenerator, label: str, sigma: np.ndarray, beta: float) -> None:
    want = gibbs_state(gen.hamiltonian, beta)
    if np.max(np.abs(asoperator(sigma) - want)) > 1e-8:
        raise ValueError(f"sigma for bath {label!r} is not the Gibbs state at beta={beta}")
    defect = float(np.max(np.abs(gen.dissipator(label, sigma))))
    if defect > STATIONARY_TOL:
        raise ValueError(
            f"bath {label!r} does not hold its Gibbs state stationary (defect {defect:.3e})"
        )


def clausius_gap(gen: LindbladGenerator, states: Timeline, sigma_per_bath: dict, betas: dict):
    """dS/dt + sum_r beta_r J^(r) per grid point.

    dS/dt comes from central differences, second-order one-sided at the ends.

    Each bath's sigma must be its own Gibbs state and stationary under that
    dissipator alone; the result is the summed per-bath Spohn production and
    is nonnegative up to discretization.
    """
    if states.kind != "state":
        raise ValueError("clausius_gap wants a state timeline")
    for label, beta in betas.items():
        _gibbs_check(gen, label, asoperator(sigma_per_bath[label]), float(beta))
    entropies = np.array([von_neumann_entropy(m) for m in states.mats])
    sdot = np.gradient(entropies, states.times, edge_order=2)
    gap = sdot.copy()
    for label, beta in betas.items():
        currents = np.array([heat_current(gen, label, m) for m in states.mats])
        gap = gap + float(beta) * currents
    return gap


@dataclass(frozen=True)
class ThermoReport:
    """Per-time entropic quantities for one forward timeline.

    heat_currents maps bath label to the per-time current into that bath.
    clausius_gap is None when some bath carries no inverse-temperature tag.
    """

    times: np.ndarray
    entropy: np.ndarray
    relative_entropy: np.ndarray
    production_rate: np.ndarray
    heat_currents: dict
    clausius_gap: np.ndarray | None

    def to_csv(self, path) -> None:
        labels = list(self.heat_currents)
        cols = ["time", "entropy", "relative_entropy", "production_rate"]
        cols += [f"j_{label}" for label in labels]
        if self.clausius_gap is not None:
            cols.append("clausius_gap")
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for k, t in enumerate(self.times):
                row = [self.entropy[k], self.relative_entropy[k], self.production_rate[k]]
                row += [self.heat_currents[label][k] for label in labels]
                if self.clausius_gap is not None:
                    row.append(self.clausius_gap[k])
                fh.write(",".join([repr(float(t))] + [repr(float(x)) for x in row]) + "\n")


def thermo_report(gen: LindbladGenerator, states: Timeline, sigma) -> ThermoReport:
    """Assemble entropy, D(rho_t||sigma), Spohn rate, and heat currents.

    The Clausius column appears when every bath carries a beta tag, pairing
    each bath with its own Gibbs state.
    """
    if states.kind != "state":
        raise ValueError("thermo_report wants a state timeline")
    s = validate_state(sigma).mat
    _check_stationary(gen, s)
    entropy = np.array([von_neumann_entropy(m) for m in states.mats])
    rel = np.array([relative_entropy(m, s) for m in states.mats])
    prod = np.array([entropy_production_rate(gen, m, s) for m in states.mats])
    currents = {
        b.label: np.array([heat_current(gen, b.label, m) for m in states.mats])
        for b in gen.baths
    }
    gap = None
    if gen.baths and all(b.beta is not None for b in gen.baths):
        betas = {b.label: b.beta for b in gen.baths}
        sigmas = {b.label: gibbs_state(gen.hamiltonian, b.beta) for b in gen.baths}
        gap = clausius_gap(gen, states, sigmas, betas)
    return ThermoReport(states.times.copy(), entropy, rel, prod, currents, gap)


@dataclass(frozen=True)
class NeutralityReport:
    pairing_drift: float
    reports_identical: bool
    report: ThermoReport


def backward_neutrality_check(
    gen: LindbladGenerator, rho0, effect_final, horizon: float, dt: float, sigma=None
) -> NeutralityReport:
    """Show the backward pass is thermodynamically inert.

    Propagates the state forward, assembles the ThermoReport, then runs the
    backward pass and assembles it again: the two reports must be identical
    arrays (no effect enters any formula), and the pairing Tr[E_t rho_t]
    must be conserved along the pair.
    """
    states = propagate_forward(gen, rho0, 0.0, horizon, dt)
    ref = asoperator(sigma) if sigma is not None else stationary_state(gen)
    before = thermo_report(gen, states, ref)
    effects = propagate_backward(gen, effect_final, horizon, 0.0, dt)
    after = thermo_report(gen, states, ref)
    vals = np.array([pairing(e, s) for e, s in zip(effects.mats, states.mats)])
    drift = float(np.max(np.abs(vals - vals[-1])))
    same = (
        np.array_equal(before.entropy, after.entropy)
        and np.array_equal(before.relative_entropy, after.relative_entropy)
        and np.array_equal(before.production_rate, after.production_rate)
        and all(
            np.array_equal(before.heat_currents[k], after.heat_currents[k])
            for k in before.heat_currents
        )
    )
    return NeutralityReport(drift, same, after)
