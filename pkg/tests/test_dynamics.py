import numpy as np
import pytest

from retroq import algebra as al
from retroq import dynamics as dyn


def rng(seed=0):
    return np.random.default_rng(seed)


def random_state(g, d, mix=0.3):
    a = g.normal(size=(d, d)) + 1j * g.normal(size=(d, d))
    m = a @ a.conj().T
    m = m / np.trace(m)
    return (1 - mix) * m + mix * np.eye(d) / d  # keep well inside the cone


def random_effect_interior(g, d, lo=0.2, hi=0.8):
    a = g.normal(size=(d, d)) + 1j * g.normal(size=(d, d))
    h = 0.5 * (a + a.conj().T)
    w, v = np.linalg.eigh(h)
    w = lo + (hi - lo) * (w - w.min()) / (w.max() - w.min())
    return (v * w) @ v.conj().T


def random_generator(g, d, h_scale=1.0, j_scale=1.0, n_jumps=2, label="bath"):
    h = g.normal(size=(d, d)) + 1j * g.normal(size=(d, d))
    h = h_scale * 0.5 * (h + h.conj().T)
    jumps = tuple(
        j_scale * (g.normal(size=(d, d)) + 1j * g.normal(size=(d, d))) / np.sqrt(d)
        for _ in range(n_jumps)
    )
    return dyn.LindbladGenerator(h, (dyn.Bath(label, jumps),))


def amplitude_damping(gamma):
    return dyn.LindbladGenerator(np.zeros((2, 2)), (dyn.Bath("decay", (np.sqrt(gamma) * al.SM,)),))


def test_generator_matches_hand_expanded_dissipator():
    g = rng(20)
    gen = random_generator(g, 3)
    rho = random_state(g, 3)
    h = gen.hamiltonian
    want = -1j * (h @ rho - rho @ h)
    for b in gen.baths:
        for j in b.jumps:
            jd = j.conj().T
            want += j @ rho @ jd - 0.5 * (jd @ j @ rho + rho @ jd @ j)
    assert np.allclose(gen.apply(rho), want, atol=1e-13)


def test_adjoint_duality_and_unitality():
    g = rng(21)
    gen = random_generator(g, 4)
    rho = random_state(g, 4)
    x = g.normal(size=(4, 4)) + 1j * g.normal(size=(4, 4))
    lhs = np.trace(x @ gen.apply(rho))
    rhs = np.trace(gen.adjoint(x) @ rho)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert np.max(np.abs(gen.adjoint(np.eye(4)))) < 1e-13
    assert abs(np.trace(gen.apply(rho))) < 1e-13


def test_superoperator_agrees_with_apply():
    g = rng(22)
    gen = random_generator(g, 3)
    rho = random_state(g, 3)
    vec = gen.superoperator() @ rho.ravel()
    assert np.allclose(vec.reshape(3, 3), gen.apply(rho), atol=1e-12)


def test_amplitude_damping_closed_form():
    gamma = 1.3
    gen = amplitude_damping(gamma)
    psi = np.array([0.6, 0.8], dtype=complex)
    rho0 = np.outer(psi, psi.conj())
    tl = dyn.propagate_forward(gen, rho0, 0.0, 1.0, 1e-3)
    for t in (0.25, 0.5, 1.0):
        r = tl.at(t)
        assert r[1, 1].real == pytest.approx(0.64 * np.exp(-gamma * t), abs=1e-10)
        assert r[0, 1] == pytest.approx(0.48 * np.exp(-gamma * t / 2), abs=1e-10)
    assert np.allclose([np.trace(m) for m in tl.mats], 1.0, atol=1e-12)


def test_pure_dephasing_closed_form():
    gamma = 0.7
    gen = dyn.LindbladGenerator(np.zeros((2, 2)), (dyn.Bath("phase", (np.sqrt(gamma) * al.SZ,)),))
    rho0 = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    tl = dyn.propagate_forward(gen, rho0, 0.0, 0.8, 1e-3)
    r = tl.at(0.8)
    assert r[0, 1].real == pytest.approx(0.5 * np.exp(-2 * gamma * 0.8), abs=1e-10)
    assert r[0, 0].real == pytest.approx(0.5, abs=1e-12)


def test_backward_identity_is_fixed_point():
    g = rng(23)
    gen = random_generator(g, 3)
    tl = dyn.propagate_backward(gen, np.eye(3), 1.0, 0.0, 1e-2)
    assert np.allclose(tl.mats, np.eye(3), atol=1e-12)


def test_forward_backward_pairing_telescopes_on_shared_grid():
    g = rng(24)
    gen = random_generator(g, 3)
    rho0 = random_state(g, 3)
    ef = random_effect_interior(g, 3)
    fwd = dyn.propagate_forward(gen, rho0, 0.0, 1.0, 2e-3)
    bwd = dyn.propagate_backward(gen, ef, 1.0, 0.0, 2e-3)
    vals = np.einsum("kij,kji->k", bwd.mats, fwd.mats).real
    assert np.max(np.abs(vals - vals[-1])) < 1e-12


def test_evolve_state_effect_are_exact_adjoints():
    g = rng(25)
    gen = random_generator(g, 4)
    rho0 = random_state(g, 4)
    ef = random_effect_interior(g, 4)
    lhs = np.trace(ef @ dyn.evolve_state(gen, rho0, 0.7, 1e-3))
    rhs = np.trace(dyn.evolve_effect(gen, ef, 0.7, 1e-3) @ rho0)
    assert lhs == pytest.approx(rhs, abs=1e-13)


def test_propagation_semigroup_composition():
    g = rng(26)
    gen = random_generator(g, 2)
    rho0 = random_state(g, 2)
    once = dyn.propagate_forward(gen, rho0, 0.0, 1.0, 1e-3)
    first = dyn.propagate_forward(gen, rho0, 0.0, 0.4, 1e-3)
    second = dyn.propagate_forward(gen, first.at(0.4), 0.4, 1.0, 1e-3)
    assert np.allclose(second.at(1.0), once.at(1.0), atol=1e-12)


def test_pairing_drift_small_and_rk4_order():
    # Weak damping keeps the truncation error from being contracted away
    # before the horizon ends, so the fourth-order step is visible.
    g = rng(27)
    drifts = {}
    for d in (2, 3):
        gen = random_generator(g, d, h_scale=4.0, j_scale=0.4)
        rho0 = random_state(g, d)
        ef = random_effect_interior(g, d)
        drifts[d] = (
            dyn.pairing_drift(gen, rho0, ef, 0.0, 1.0, 1e-3),
            dyn.pairing_drift(gen, rho0, ef, 0.0, 1.0, 5e-4),
        )
    for d, (coarse, fine) in drifts.items():
        assert coarse < 1e-8
        assert coarse / fine >= 8.0, f"dim {d}: {coarse:.3e} vs {fine:.3e}"


def test_stationary_state_thermal_qubit_detailed_balance():
    gdn, gup = 1.0, 0.5
    gen = dyn.LindbladGenerator(
        np.diag([0.0, 1.0]),
        (dyn.Bath("thermal", (np.sqrt(gdn) * al.SM, np.sqrt(gup) * al.SP), beta=np.log(2.0)),),
    )
    ss = dyn.stationary_state(gen)
    assert np.allclose(ss.mat, np.diag([2.0 / 3.0, 1.0 / 3.0]), atol=1e-10)


def test_stationary_state_degenerate_kernel_rejected():
    gen = dyn.LindbladGenerator(np.zeros((2, 2)), ())
    with pytest.raises(ValueError, match="degenerate"):
        dyn.stationary_state(gen)


def test_projection_failure_reported_loudly():
    gen = amplitude_damping(40.0)
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    with pytest.raises(ValueError, match="reduce dt"):
        dyn.propagate_forward(gen, rho0, 0.0, 1.0, 0.1)


def test_grid_rejects_fractional_spans():
    gen = amplitude_damping(1.0)
    with pytest.raises(ValueError, match="integer number of steps"):
        dyn.propagate_forward(gen, np.eye(2) / 2, 0.0, 1.0005, 1e-2)


def test_timeline_csv_roundtrip(tmp_path):
    g = rng(28)
    gen = random_generator(g, 2)
    tl = dyn.propagate_forward(gen, random_state(g, 2), 0.0, 0.1, 1e-2)
    path = tmp_path / "tl.csv"
    tl.to_csv(path)
    back = dyn.timeline_from_csv(path)
    assert back.kind == "state"
    assert np.allclose(back.times, tl.times)
    assert np.allclose(back.mats, tl.mats, atol=0)


def test_timeline_grid_lookup():
    tl = dyn.Timeline(np.array([0.0, 0.1, 0.2]), np.stack([np.eye(2)] * 3), "effect")
    assert tl.index(0.1) == 1
    with pytest.raises(ValueError, match="not on the stored grid"):
        tl.at(0.15)
