import itertools

import numpy as np
import pytest

from retroq import _accel
from retroq import algebra as al
from retroq import dynamics as dyn
from retroq import trajectories as tr
from retroq.channels import Instrument, projective


def rng(seed=0):
    return np.random.default_rng(seed)


GROUND = np.diag([1.0, 0.0]).astype(complex)
EXCITED = np.diag([0.0, 1.0]).astype(complex)


def decay_model(kappa=1.0, eta=1.0, mode="diffusive", omega=0.0, extra=()):
    return tr.monitoring_model(
        omega * al.SX, al.SM, kappa, eta=eta, mode=mode, extra_baths=extra
    )


def proj_z():
    return projective({"g": GROUND, "e": EXCITED})


def test_monitoring_model_validation():
    with pytest.raises(ValueError, match="mode"):
        tr.monitoring_model(np.zeros((2, 2)), al.SM, 1.0, mode="laser")
    with pytest.raises(ValueError, match="kappa"):
        tr.monitoring_model(np.zeros((2, 2)), al.SM, 0.0)
    with pytest.raises(ValueError, match="eta"):
        tr.monitoring_model(np.zeros((2, 2)), al.SM, 1.0, eta=1.5)
    gen = dyn.LindbladGenerator(np.zeros((2, 2)), (dyn.Bath("b", (al.SM,)),))
    with pytest.raises(ValueError, match="monitored channel"):
        tr.MonitoringModel(gen, al.SM, 2.0, 1.0, "diffusive")


def test_unmonitored_jumps_drop_exactly_one_copy():
    # the dephasing bath deliberately repeats the monitored operator
    extra = (dyn.Bath("dephase", (0.5 * al.SZ, np.sqrt(2.0) * al.SM)),)
    m = tr.monitoring_model(np.zeros((2, 2)), al.SM, 2.0, mode="counting", extra_baths=extra)
    rest = m.unmonitored_jumps()
    assert len(rest) == 2
    assert any(np.allclose(j, 0.5 * al.SZ) for j in rest)
    assert any(np.allclose(j, np.sqrt(2.0) * al.SM) for j in rest)


def test_record_validation():
    with pytest.raises(ValueError, match="uniform"):
        tr.MeasurementRecord("diffusive", np.array([0.0, 0.1, 0.3]), np.zeros(2), 0, 1.0, 1.0)
    with pytest.raises(ValueError, match="one increment per step"):
        tr.MeasurementRecord("diffusive", np.linspace(0, 1, 5), np.zeros(3), 0, 1.0, 1.0)
    with pytest.raises(ValueError, match="0 or 1"):
        tr.MeasurementRecord("counting", np.linspace(0, 1, 5), np.array([0, 2, 0, 1]), 0, 1.0, 1.0)
    with pytest.raises(ValueError, match="mode"):
        tr.MeasurementRecord("pointer", np.linspace(0, 1, 5), np.zeros(4), 0, 1.0, 1.0)


def test_record_csv_roundtrip(tmp_path):
    model = decay_model(eta=0.4)
    _, rec = tr.simulate_homodyne(model, GROUND, 0.05, 1e-3, seed=7)
    rec.to_csv(tmp_path / "rec.csv")
    back = tr.record_from_csv(tmp_path / "rec.csv")
    assert back.mode == rec.mode and back.seed == rec.seed
    assert back.kappa == rec.kappa and back.eta == rec.eta
    assert np.array_equal(back.increments, rec.increments)
    assert np.allclose(back.times, rec.times, atol=1e-12)

    cm = decay_model(mode="counting")
    _, crec = tr.simulate_counting(cm, EXCITED, 0.05, 1e-3, seed=8)
    crec.to_csv(tmp_path / "crec.csv")
    cback = tr.record_from_csv(tmp_path / "crec.csv")
    assert cback.increments.dtype == np.int64
    assert np.array_equal(cback.increments, crec.increments)


def test_fixed_seed_reproduces_record_bitwise():
    model = decay_model(eta=0.8, omega=0.9)
    rho0 = 0.5 * np.eye(2) + 0.2 * al.SX
    a_states, a_rec = tr.simulate_homodyne(model, rho0, 0.2, 1e-3, seed=42)
    b_states, b_rec = tr.simulate_homodyne(model, rho0, 0.2, 1e-3, seed=42)
    assert np.array_equal(a_rec.increments, b_rec.increments)
    assert np.array_equal(a_states.mats, b_states.mats)
    _, c_rec = tr.simulate_homodyne(model, rho0, 0.2, 1e-3, seed=43)
    assert not np.array_equal(a_rec.increments, c_rec.increments)


def test_replay_homodyne_matches_simulation_exactly():
    """The stored dY drives the same arithmetic the simulator ran."""
    model = decay_model(eta=0.6, omega=1.1)
    rho0 = 0.5 * np.eye(2) + 0.15 * al.SY
    states, rec = tr.simulate_homodyne(model, rho0, 0.15, 1e-3, seed=5)
    again = tr.replay_homodyne(model, rho0, rec)
    assert np.array_equal(states.mats, again.mats)


def test_replay_counting_matches_simulation_exactly():
    model = decay_model(mode="counting", omega=1.0)
    states, rec = tr.simulate_counting(model, EXCITED, 0.3, 1e-3, seed=77)
    again = tr.replay_counting(model, EXCITED, rec)
    assert np.array_equal(states.mats, again.mats)


def test_eta_zero_homodyne_is_deterministic_lindblad():
    model = decay_model(kappa=1.0, eta=0.0, omega=0.7)
    rho0 = 0.5 * np.eye(2) + 0.3 * al.SZ
    states, rec = tr.simulate_homodyne(model, rho0, 0.3, 1e-3, seed=3)
    ref = dyn.propagate_forward(model.gen, rho0, 0.0, 0.3, 1e-3)
    assert np.max(np.abs(states.mats - ref.mats)) < 5e-3
    # the record decouples: innovations are the raw increments
    inn = tr.innovations(model, states, rec)
    assert np.array_equal(inn, rec.increments)
    # and the likelihood no longer depends on the states
    other = dyn.propagate_forward(model.gen, GROUND, 0.0, 0.3, 1e-3)
    assert tr.record_log_likelihood(model, states, rec) == tr.record_log_likelihood(
        model, other, rec
    )


def test_eta_zero_backward_matches_deterministic_adjoint():
    model = decay_model(kappa=1.0, eta=0.0, omega=0.7)
    _, rec = tr.simulate_homodyne(model, GROUND, 0.3, 1e-3, seed=11)
    effects = tr.backward_homodyne(model, rec, np.eye(2))
    assert np.max(np.abs(effects.mats - np.eye(2))) < 5e-3
    ef = np.array([[0.7, 0.1], [0.1, 0.25]], dtype=complex)
    effects = tr.backward_homodyne(model, rec, ef)
    ref = dyn.propagate_backward(model.gen, ef, 0.3, 0.0, 1e-3)
    for got, want in zip(effects.mats, ref.mats):
        a = got / al.spectral_norm_hermitian(got)
        b = want / al.spectral_norm_hermitian(want)
        assert np.max(np.abs(a - b)) < 5e-3


def test_eta_zero_smoothed_equals_filtered():
    model = decay_model(kappa=1.0, eta=0.0, omega=0.4)
    rho0 = np.array([[0.3, 0.1], [0.1, 0.7]], dtype=complex)
    states, rec = tr.simulate_homodyne(model, rho0, 0.2, 1e-3, seed=9)
    effects = tr.backward_homodyne(model, rec, np.eye(2))
    pair = tr.PqsPair(states, effects, rec)
    ins = proj_z()
    for t in (0.0, 0.1, 0.2):
        sm = tr.smoothed_probability(pair, t, ins)
        rho = states.at(t)
        assert abs(sm["g"] - rho[0, 0].real) < 5e-3
        assert abs(sm["e"] - rho[1, 1].real) < 5e-3


def test_backward_pass_is_exact_adjoint_of_linear_filter():
    """The unnormalized pairing telescopes exactly: pairing the raw backward
    recursion with the raw record-driven Kraus filter gives the same number
    at every grid point. The module's per-step rescaling only changes scale,
    so its output equals the raw recursion normalized."""
    eta, kappa = 0.5, 1.0
    model = decay_model(kappa=kappa, eta=eta, omega=0.8)
    states, rec = tr.simulate_homodyne(model, 0.5 * np.eye(2), 0.2, 1e-3, seed=21)
    effects = tr.backward_homodyne(model, rec, np.eye(2))
    dt = rec.dt
    base = np.eye(2) - (1j * model.gen.hamiltonian + 0.5 * kappa * al.SP @ al.SM) * dt
    leak = (1.0 - eta) * kappa * dt
    sq = np.sqrt(eta * kappa)
    raw_e = [np.eye(2, dtype=complex)]
    for k in range(rec.steps - 1, -1, -1):
        m = base + sq * al.SM * rec.increments[k]
        raw_e.append(m.conj().T @ raw_e[-1] @ m + leak * (al.SP @ raw_e[-1] @ al.SM))
    raw_e = raw_e[::-1]
    rho = np.array(0.5 * np.eye(2), dtype=complex)
    raw_r = [rho]
    for k in range(rec.steps):
        m = base + sq * al.SM * rec.increments[k]
        rho = m @ rho @ m.conj().T + leak * (al.SM @ rho @ al.SP)
        raw_r.append(rho)
    vals = [al.pairing(e, r) for e, r in zip(raw_e, raw_r)]
    assert np.max(np.abs(np.array(vals) / vals[-1] - 1.0)) < 1e-12
    for got, raw in zip(effects.mats, raw_e):
        assert np.max(np.abs(got - raw / al.spectral_norm_hermitian(raw))) < 1e-10


def test_pairing_ratio_stays_near_one_without_post_selection():
    """With Ef = I the normalized pairing is conserved only up to the spread
    the record imprints on the effect spectrum (per-step rescaling tracks the
    top eigenvalue, the pairing tracks the state-weighted one); over a short
    weakly informative record that stays a small band around 1."""
    model = decay_model(kappa=1.0, eta=0.5, omega=0.8)
    states, rec = tr.simulate_homodyne(model, 0.5 * np.eye(2), 0.2, 1e-3, seed=21)
    effects = tr.backward_homodyne(model, rec, np.eye(2))
    pair = tr.PqsPair(states, effects, rec)
    final = pair.pairing_at(0.2)
    for t in states.times[::40]:
        ratio = pair.pairing_at(t) / final
        assert 0.75 < ratio <= 1.0 + 1e-12


def test_backward_homodyne_effects_stay_valid():
    model = decay_model(kappa=1.0, eta=0.9, omega=1.0)
    _, rec = tr.simulate_homodyne(model, EXCITED, 0.2, 1e-3, seed=6)
    effects = tr.backward_homodyne(model, rec, np.array([[0.6, 0.2], [0.2, 0.5]]))
    assert effects.kind == "effect"
    for e in effects.mats:
        w = np.linalg.eigvalsh(e)
        assert w.min() > -1e-10
        assert w.max() <= 1.0 + 1e-12


def test_dark_state_homodyne_record_is_pure_noise():
    model = decay_model(kappa=1.0, eta=1.0)
    states, rec = tr.simulate_homodyne(model, GROUND, 0.1, 1e-3, seed=8)
    assert np.allclose(states.mats, GROUND, atol=1e-12)
    inn = tr.innovations(model, states, rec)
    assert np.allclose(inn, rec.increments, atol=1e-15)


def test_dark_state_counting_yields_no_counts():
    model = decay_model(kappa=1.0, mode="counting")
    states, rec = tr.simulate_counting(model, GROUND, 0.5, 1e-3, seed=2)
    assert rec.increments.sum() == 0
    assert np.allclose(states.mats, GROUND, atol=1e-12)


def test_backward_counting_quiet_record_hand_recursion():
    """Quiet steps square the no-jump factor onto the excited subspace;
    the spectral norm stays 1 so no rescaling kicks in."""
    kappa, dt = 0.8, 0.01
    model = decay_model(kappa=kappa, mode="counting")
    rec = tr.MeasurementRecord("counting", dt * np.arange(6), np.zeros(5, dtype=int), 0, kappa, 1.0)
    effects = tr.backward_counting(model, rec, np.eye(2))
    decay = (1.0 - 0.5 * kappa * dt) ** 2
    for k in range(6):
        want = np.diag([1.0, decay ** (5 - k)])
        assert np.allclose(effects.mats[k], want, atol=1e-13)


def test_counting_smoothed_matches_enumeration_exactly():
    """Insert a projective readout at every grid point of every feasible
    6-step record: the smoothed distribution must equal exact Bayesian
    retrodiction. Records with adjacent jumps carry weight exactly zero,
    because a jump lands on the ground state and the emitter operator
    annihilates it."""
    dt = 0.05
    model = decay_model(kappa=1.0, mode="counting", omega=1.3)
    rho0 = np.array([[0.35, 0.2 - 0.1j], [0.2 + 0.1j, 0.65]])
    ef = np.array([[0.8, 0.15], [0.15, 0.45]])
    oracle = tr.enumerate_counting(model, rho0, ef, steps=6, dt=dt)
    ins = proj_z()
    feasible = 0
    for bits in itertools.product((0, 1), repeat=6):
        w = oracle.record_weight(bits)
        if "11" in "".join(map(str, bits)):
            assert w == 0.0
            continue
        assert w > 0.0
        feasible += 1
        rec = tr.MeasurementRecord("counting", dt * np.arange(7), np.array(bits), 0, 1.0, 1.0)
        pair = tr.PqsPair(
            tr.replay_counting(model, rho0, rec),
            tr.backward_counting(model, rec, ef),
            rec,
        )
        for j in range(7):
            sm = tr.smoothed_probability(pair, j * dt, ins)
            ex = oracle.conditional(bits, j, ins)
            assert abs(sm["g"] - ex["g"]) < 1e-10
            assert abs(sm["e"] - ex["e"]) < 1e-10
    assert feasible == 21


def test_enumeration_weights_sum_near_one():
    model = decay_model(kappa=1.0, mode="counting", omega=1.3)
    rho0 = 0.5 * np.eye(2) + 0.2 * al.SX
    for steps, dt in ((1, 0.01), (6, 0.01)):
        oracle = tr.enumerate_counting(model, rho0, np.eye(2), steps=steps, dt=dt)
        assert abs(sum(oracle.weights.values()) - 1.0) < 2e-3 * steps


def test_record_frequencies_match_enumeration():
    dt, steps = 0.008, 6
    model = decay_model(kappa=1.0, mode="counting", omega=1.3)
    rho0 = np.array([[0.35, 0.2 - 0.1j], [0.2 + 0.1j, 0.65]])
    oracle = tr.enumerate_counting(model, rho0, np.eye(2), steps=steps, dt=dt)
    total = sum(oracle.weights.values())
    n = 4000
    ens = tr.ensemble_counting(model, rho0, steps * dt, dt, n_traj=n, seed=19)
    seen = {}
    for row in ens.counts:
        key = tuple(int(x) for x in row)
        seen[key] = seen.get(key, 0) + 1
    for bits, w in oracle.weights.items():
        p = w / total
        freq = seen.get(bits, 0) / n
        se = np.sqrt(max(p * (1.0 - p), 1e-12) / n)
        assert abs(freq - p) < 4.0 * se + 1.5e-3


def test_infeasible_record_raises():
    model = decay_model(kappa=1.0, mode="counting", omega=1.3)
    rec = tr.MeasurementRecord(
        "counting", 0.05 * np.arange(7), np.array([1, 1, 0, 0, 0, 0]), 0, 1.0, 1.0
    )
    with pytest.raises(ValueError, match="zero weight"):
        tr.replay_counting(model, EXCITED, rec)
    with pytest.raises(ValueError, match="collapsed to zero"):
        tr.backward_counting(model, rec, np.eye(2))
    oracle = tr.enumerate_counting(model, EXCITED, np.eye(2), steps=6, dt=0.05)
    with pytest.raises(ValueError, match="zero weight"):
        oracle.conditional([1, 1, 0, 0, 0, 0], 3, proj_z())


def test_enumeration_guards():
    model = decay_model(mode="counting")
    with pytest.raises(ValueError, match="cap"):
        tr.enumerate_counting(model, EXCITED, np.eye(2), steps=11, dt=0.01)
    oracle = tr.enumerate_counting(model, EXCITED, np.eye(2), steps=3, dt=0.01)
    with pytest.raises(ValueError, match="record length"):
        oracle.conditional([0, 1], 1, proj_z())
    with pytest.raises(IndexError, match="step index"):
        oracle.conditional([0, 0, 0], 4, proj_z())


def test_total_count_mean_matches_emission_probability():
    model = decay_model(kappa=1.0, mode="counting")
    ens = tr.ensemble_counting(model, EXCITED, 1.0, 2e-3, n_traj=3000, seed=31)
    totals = ens.total_counts()
    want = 1.0 - np.exp(-1.0)
    se = totals.std(ddof=1) / np.sqrt(totals.size)
    assert abs(totals.mean() - want) < 3.0 * se + 2e-3


def test_ensemble_mean_reproduces_lindblad_decay():
    model = decay_model(kappa=1.0, eta=1.0)
    ens = tr.ensemble_homodyne(model, EXCITED, 0.5, 2e-3, n_traj=2000, seed=17)
    pops = ens.states[:, :, 1, 1].real
    for j, t in enumerate(ens.sample_times):
        se = pops[:, j].std(ddof=1) / np.sqrt(pops.shape[0])
        assert abs(pops[:, j].mean() - np.exp(-t)) < 3.0 * se + 5 * ens.dt


def test_innovation_increments_are_white():
    model = decay_model(kappa=1.0, eta=0.7, omega=0.6)
    ens = tr.ensemble_homodyne(model, EXCITED, 0.5, 2e-3, n_traj=2000, seed=23)
    dws = ens.innovations().ravel()
    assert abs(dws.mean()) < 3.0 * np.sqrt(ens.dt / dws.size)
    assert abs(dws.var() - ens.dt) < 0.05 * ens.dt


def test_ensemble_row_matches_single_simulation(monkeypatch):
    monkeypatch.setenv("RETROQ_BACKEND", "numpy")
    model = decay_model(kappa=1.0, eta=0.7, omega=0.9)
    states, rec = tr.simulate_homodyne(model, EXCITED, 0.1, 1e-3, seed=55)
    ens = tr.ensemble_homodyne(
        model, EXCITED, 0.1, 1e-3, n_traj=1, seed=55, sample_times=(0.0, 0.05, 0.1)
    )
    assert np.array_equal(ens.dys[0], rec.increments)
    assert np.array_equal(ens.states[0, 2], states.at(0.1))


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba unavailable")
def test_backend_parity_is_exact(monkeypatch):
    model = decay_model(kappa=1.0, eta=0.5, omega=1.0)
    cmodel = decay_model(kappa=1.0, mode="counting", omega=0.8)

    def run():
        h = tr.ensemble_homodyne(model, EXCITED, 0.05, 1e-3, n_traj=6, seed=4)
        c = tr.ensemble_counting(cmodel, EXCITED, 0.05, 1e-3, n_traj=6, seed=4)
        return h, c

    monkeypatch.setenv("RETROQ_BACKEND", "numpy")
    h_np, c_np = run()
    monkeypatch.setenv("RETROQ_BACKEND", "numba")
    h_nb, c_nb = run()
    assert np.array_equal(h_np.states, h_nb.states)
    assert np.array_equal(h_np.dys, h_nb.dys)
    assert np.array_equal(c_np.states, c_nb.states)
    assert np.array_equal(c_np.counts, c_nb.counts)


def test_ensemble_sample_times_selection():
    model = decay_model(eta=0.3)
    ens = tr.ensemble_homodyne(
        model, EXCITED, 0.1, 1e-3, n_traj=3, seed=2, sample_times=(0.0, 0.05, 0.1)
    )
    assert np.allclose(ens.sample_times, (0.0, 0.05, 0.1), atol=1e-12)
    assert ens.states.shape == (3, 3, 2, 2)
    with pytest.raises(ValueError, match="not on the integration grid"):
        tr.ensemble_homodyne(model, EXCITED, 0.1, 1e-3, n_traj=3, seed=2, sample_times=(0.0335,))


def test_zero_innovation_record_maximizes_likelihood():
    model = decay_model(kappa=1.0, eta=0.8, omega=0.5)
    states, rec = tr.simulate_homodyne(model, EXCITED, 0.1, 1e-3, seed=14)
    xb = np.einsum("ij,kji->k", model.x_c, states.mats[:-1]).real
    flat = tr.MeasurementRecord(
        "diffusive", rec.times, 2.0 * np.sqrt(0.8) * xb * rec.dt, 0, 1.0, 0.8
    )
    best = tr.record_log_likelihood(model, states, flat)
    assert best == 0.0
    g = rng(3)
    for _ in range(5):
        noisy = tr.MeasurementRecord(
            "diffusive", rec.times, flat.increments + 1e-2 * g.normal(size=rec.steps), 0, 1.0, 0.8
        )
        assert tr.record_log_likelihood(model, states, noisy) < best


def test_likelihood_ratio_reweighting_recovers_means():
    """Records drawn under drive A, reweighted by exp(llB - llA), must
    estimate drive-B record expectations (the weights are an exact discrete
    likelihood ratio, so only Monte Carlo error remains)."""
    dt, horizon, n = 5e-3, 0.3, 400
    ma = decay_model(kappa=1.0, eta=0.8, omega=0.7)
    mb = decay_model(kappa=1.0, eta=0.8, omega=1.2)
    ws = np.zeros(n)
    fa = np.zeros(n)
    for i in range(n):
        states_a, rec = tr.simulate_homodyne(ma, EXCITED, horizon, dt, seed=1000 + i)
        lla = tr.record_log_likelihood(ma, states_a, rec)
        states_b = tr.replay_homodyne(mb, EXCITED, rec)
        llb = tr.record_log_likelihood(mb, states_b, rec)
        ws[i] = np.exp(llb - lla)
        fa[i] = rec.increments.sum()
    fb = np.zeros(n)
    for i in range(n):
        _, rec = tr.simulate_homodyne(mb, EXCITED, horizon, dt, seed=5000 + i)
        fb[i] = rec.increments.sum()
    assert abs(ws.mean() - 1.0) < 4.0 * ws.std(ddof=1) / np.sqrt(n)
    est = float((ws * fa).mean() / ws.mean())
    direct = float(fb.mean())
    se_est = np.std(ws * (fa - est), ddof=1) / (np.sqrt(n) * ws.mean())
    se_dir = fb.std(ddof=1) / np.sqrt(n)
    assert abs(est - direct) < 4.0 * (se_est + se_dir)


def test_trivial_instrument_gives_probability_one():
    model = decay_model(eta=0.6)
    states, rec = tr.simulate_homodyne(model, EXCITED, 0.03, 1e-3, seed=44)
    effects = tr.backward_homodyne(model, rec, np.array([[0.9, 0.0], [0.0, 0.4]]))
    pair = tr.PqsPair(states, effects, rec)
    ident = Instrument(("pass",), ((np.eye(2),),))
    p = tr.smoothed_probability(pair, 0.01, ident)
    assert abs(p["pass"] - 1.0) < 1e-12


def test_null_post_selection_surfaces_and_eps_rescues():
    model = decay_model(kappa=1.0, mode="counting")
    states, rec = tr.simulate_counting(model, GROUND, 0.05, 1e-3, seed=3)
    effects = tr.backward_counting(model, rec, EXCITED)
    pair = tr.PqsPair(states, effects, rec)
    with pytest.raises(ValueError, match="null post-selection"):
        tr.smoothed_probability(pair, 0.02, proj_z())
    out = tr.smoothed_probability(pair, 0.02, proj_z(), eps=1e-9)
    assert abs(sum(out.values()) - 1.0) < 1e-12
    assert out["g"] > 0.99


def test_pqs_pair_grid_checks():
    model = decay_model(eta=0.5)
    states, rec = tr.simulate_homodyne(model, EXCITED, 0.05, 1e-3, seed=1)
    effects = tr.backward_homodyne(model, rec, np.eye(2))
    pair = tr.PqsPair(states, effects, rec)
    with pytest.raises(ValueError, match="state timeline and an effect"):
        tr.PqsPair(effects, states, rec)
    shifted = tr.MeasurementRecord("diffusive", rec.times + 1.0, rec.increments, 0, 1.0, 0.5)
    with pytest.raises(ValueError, match="record grid"):
        tr.PqsPair(states, effects, shifted)
    with pytest.raises(ValueError, match="not on the stored grid"):
        tr.smoothed_probability(pair, 0.0123, proj_z())


def test_mode_guards_and_coarse_dt_warning():
    dm = decay_model(eta=0.5)
    cm = decay_model(mode="counting")
    with pytest.raises(ValueError, match="needs 'counting'"):
        tr.simulate_counting(dm, EXCITED, 0.1, 1e-3, seed=0)
    with pytest.raises(ValueError, match="needs 'diffusive'"):
        tr.simulate_homodyne(cm, EXCITED, 0.1, 1e-3, seed=0)
    with pytest.warns(UserWarning, match="poorly"):
        tr.simulate_homodyne(decay_model(kappa=30.0, eta=0.5), GROUND, 0.05, 5e-3, seed=0)
    with pytest.warns(UserWarning, match="poorly"):
        with pytest.raises(ValueError, match="jump probability"):
            tr.simulate_counting(decay_model(kappa=30.0, mode="counting"), EXCITED, 0.1, 0.05, seed=0)


def test_pqs_summary_csv(tmp_path):
    model = decay_model(kappa=1.0, eta=0.5, omega=0.8)
    states, rec = tr.simulate_homodyne(model, 0.5 * np.eye(2), 0.02, 1e-3, seed=12)
    effects = tr.backward_homodyne(model, rec, np.eye(2))
    pair = tr.PqsPair(states, effects, rec)
    path = tmp_path / "summary.csv"
    tr.pqs_summary_csv(pair, proj_z(), path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "time,pairing,p_g,p_e"
    assert len(rows) == rec.steps + 2
    probs = np.array([[float(x) for x in r.split(",")[2:]] for r in rows[1:]])
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
