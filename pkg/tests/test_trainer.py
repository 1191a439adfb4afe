"""MAE loss arithmetic and the three-point FDSA training loop."""

import numpy as np
import pytest

from chiptrain.chip import (
    InvariantError,
    build_planar_geometry,
    build_triangular_geometry,
    direct_control_model,
    mesh_control_model,
    sample_target_parameters,
)
from chiptrain.photonics import OutputDistribution
from chiptrain.trainer import (
    DELTA_FLOOR,
    TrainerConfig,
    TrainingState,
    WindowUnreachableError,
    _delta_for_loss,
    build_target_dataset,
    default_schedule,
    epoch_step,
    evaluate_loss,
    flag_stuck,
    generate_instance,
    intermediate_unitaries_train,
    mae_loss,
    train,
)
from chiptrain.unitary import fidelity, unitary_from_control, unitary_from_parameters


def _planar_problem(m=6, seed=0):
    geom = build_planar_geometry(m)
    model = direct_control_model()
    rng = np.random.default_rng(seed)
    params = sample_target_parameters(geom, rng)
    u_t = unitary_from_parameters(geom, params)
    return geom, model, params, u_t


class _FakeTargets:
    """Minimal TargetDataset stand-in for pure loss arithmetic."""

    def __init__(self, dists):
        self.dists = {d.input: d for d in dists}
        self.singles = [k for k in self.dists if len(k) == 1]
        self.pairs = [k for k in self.dists if len(k) == 2]


def test_mae_loss_single_block_hand_value():
    target = _FakeTargets([OutputDistribution((1,), {(1,): 0.5, (2,): 0.5})])
    est = [OutputDistribution((1,), {(1,): 0.6, (2,): 0.4})]
    assert mae_loss(est, target) == pytest.approx(0.2, abs=1e-15)


def test_mae_loss_blocks_divided_by_input_count():
    target = _FakeTargets(
        [
            OutputDistribution((1,), {(1,): 0.5, (2,): 0.5}),
            OutputDistribution((2,), {(1,): 1.0, (2,): 0.0}),
        ]
    )
    est = [
        OutputDistribution((1,), {(1,): 0.6, (2,): 0.4}),
        OutputDistribution((2,), {(1,): 0.9, (2,): 0.1}),
    ]
    # (0.2 + 0.2) / 2 inputs
    assert mae_loss(est, target) == pytest.approx(0.2, abs=1e-15)


def test_mae_loss_sums_photon_number_blocks():
    target = _FakeTargets(
        [
            OutputDistribution((1,), {(1,): 1.0, (2,): 0.0}),
            OutputDistribution((1, 2), {(1, 1): 1.0, (1, 2): 0.0, (2, 2): 0.0}),
        ]
    )
    est = [
        OutputDistribution((1,), {(1,): 0.8, (2,): 0.2}),
        OutputDistribution((1, 2), {(1, 1): 0.5, (1, 2): 0.5, (2, 2): 0.0}),
    ]
    assert mae_loss(est, target) == pytest.approx(0.4 + 1.0, abs=1e-15)


def test_mae_loss_union_of_outcome_keys():
    # estimated counts can miss outcomes entirely; they score as zero probability
    target = _FakeTargets([OutputDistribution((1,), {(1,): 0.7, (2,): 0.3})])
    est = [OutputDistribution((1,), {(1,): 1.0})]
    assert mae_loss(est, target) == pytest.approx(0.3 + 0.3, abs=1e-15)


def test_mae_loss_rejects_unknown_input():
    target = _FakeTargets([OutputDistribution((1,), {(1,): 1.0})])
    with pytest.raises(InvariantError):
        mae_loss([OutputDistribution((2,), {(1,): 1.0})], target)


def test_mae_loss_zero_at_exact_match():
    geom, model, params, u_t = _planar_problem()
    targets = build_target_dataset(u_t, geom)
    loss = evaluate_loss(
        params.beta[0], targets, targets.singles + targets.pairs, geom, model,
        params.couplings, shots=None,
    )
    assert loss < 1e-12


def test_evaluate_loss_shot_seeding_reproducible():
    geom, model, params, u_t = _planar_problem(seed=4)
    targets = build_target_dataset(u_t, geom)
    inputs = targets.singles + targets.pairs
    rng = np.random.default_rng(8)
    cand = params.beta[0] + rng.uniform(-0.05, 0.05, size=geom.m)
    l1 = evaluate_loss(cand, targets, inputs, geom, model, params.couplings, 500,
                       np.random.SeedSequence(77))
    l2 = evaluate_loss(cand, targets, inputs, geom, model, params.couplings, 500,
                       np.random.SeedSequence(77))
    l3 = evaluate_loss(cand, targets, inputs, geom, model, params.couplings, 500,
                       np.random.SeedSequence(78))
    assert l1 == l2
    assert l1 != l3
    assert l1 > 0


def test_trainer_config_validation():
    with pytest.raises(InvariantError):
        TrainerConfig(epochs=0, shots=None)
    with pytest.raises(InvariantError):
        TrainerConfig(epochs=10, shots=None, update_method="newton")
    with pytest.raises(InvariantError):
        TrainerConfig(epochs=10, shots=None, delta_schedule=((np.inf, 0.02), (0.5, 0.04)))
    with pytest.raises(InvariantError):
        TrainerConfig(epochs=10, shots=None, delta_schedule=((np.inf, -0.02),))


def test_default_schedule_and_delta_selection():
    sched = default_schedule(0.8, 0.02)
    assert _delta_for_loss(sched, 0.9) == 0.02
    assert _delta_for_loss(sched, 0.41) == 0.02  # above the 0.4 threshold
    assert _delta_for_loss(sched, 0.39) == 0.01
    assert _delta_for_loss(sched, 0.19) == 0.005
    assert _delta_for_loss(sched, 0.05) == DELTA_FLOOR
    # a loss above every finite threshold falls back to the largest delta
    assert _delta_for_loss(((0.5, 0.02), (0.25, 0.01)), 0.9) == 0.02


def test_delta_floor_applies():
    sched = default_schedule(0.01, 0.02)
    assert _delta_for_loss(sched, 0.0001) == DELTA_FLOOR


def test_epoch_step_moves_downhill_exact():
    geom, model, params, u_t = _planar_problem(seed=1)
    targets = build_target_dataset(u_t, geom)
    rng = np.random.default_rng(2)
    start = np.clip(params.beta[0] + rng.uniform(-0.08, 0.08, size=geom.m), 0.7, 1.3)
    config = TrainerConfig(epochs=1, shots=None, seed=0)
    state = TrainingState(
        epoch=0, params=start.copy(), order=np.arange(geom.m), cursor=0, current_loss=None
    )
    state = epoch_step(
        state, targets, geom, model, params.couplings, config,
        np.random.SeedSequence(5), u_t,
    )
    rec = state.trajectory[0]
    assert rec.action in ("up", "down", "stay")
    assert rec.loss <= rec.l_prev + 1e-15
    if rec.action == "up":
        assert rec.loss == rec.l_up
        assert state.params[0] == pytest.approx(min(start[0] + rec.delta, 1.3))
    elif rec.action == "down":
        assert rec.loss == rec.l_down
        assert state.params[0] == pytest.approx(max(start[0] - rec.delta, 0.7))
    else:
        assert np.array_equal(state.params, start)


def test_round_robin_visits_every_parameter():
    geom, model, params, u_t = _planar_problem(m=5, seed=3)
    config = TrainerConfig(epochs=10, shots=None, seed=12)
    rng = np.random.default_rng(6)
    start = np.clip(params.beta[0] + rng.uniform(-0.05, 0.05, size=5), 0.7, 1.3)
    result = train(start, u_t, geom, model, params.couplings, config)
    first_round = [r.i0 for r in result.trajectory[:5]]
    second_round = [r.i0 for r in result.trajectory[5:]]
    assert sorted(first_round) == list(range(5))
    assert sorted(second_round) == list(range(5))


def test_train_exact_mode_monotone_and_converges():
    geom, model, params, u_t = _planar_problem(m=6, seed=10)
    rng = np.random.default_rng(20)
    start = np.clip(params.beta[0] + rng.uniform(-0.08, 0.08, size=6), 0.7, 1.3)
    config = TrainerConfig(epochs=150, shots=None, seed=1)
    result = train(start, u_t, geom, model, params.couplings, config)
    losses = [r.loss for r in result.trajectory]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert result.final_loss == losses[-1]
    assert result.final_fidelity > fidelity(
        u_t, unitary_from_control(geom, model, params.couplings, start)
    )


def test_train_deterministic_given_seed():
    geom, model, params, u_t = _planar_problem(m=5, seed=30)
    rng = np.random.default_rng(31)
    start = np.clip(params.beta[0] + rng.uniform(-0.1, 0.1, size=5), 0.7, 1.3)
    config = TrainerConfig(epochs=40, shots=200, seed=9)
    r1 = train(start, u_t, geom, model, params.couplings, config)
    r2 = train(start, u_t, geom, model, params.couplings, config)
    assert np.array_equal(r1.final_params, r2.final_params)
    assert [t.loss for t in r1.trajectory] == [t.loss for t in r2.trajectory]


def test_train_gradient_proportional_stays_in_bounds():
    geom, model, params, u_t = _planar_problem(m=5, seed=14)
    rng = np.random.default_rng(15)
    start = np.clip(params.beta[0] + rng.uniform(-0.1, 0.1, size=5), 0.7, 1.3)
    # unlike fixed_step, this method may overshoot; only a gentle gain converges
    config = TrainerConfig(
        epochs=100, shots=None, update_method="gradient_proportional", eta=0.01, seed=3
    )
    result = train(start, u_t, geom, model, params.couplings, config)
    assert np.all(result.final_params >= 0.7) and np.all(result.final_params <= 1.3)
    assert result.final_loss < result.trajectory[0].l_prev


def test_train_records_fidelity_when_asked():
    geom, model, params, u_t = _planar_problem(m=4, seed=16)
    config = TrainerConfig(epochs=3, shots=None, seed=0, record_fidelity=True)
    result = train(params.beta[0], u_t, geom, model, params.couplings, config)
    assert all(r.fidelity is not None for r in result.trajectory)
    config = TrainerConfig(epochs=3, shots=None, seed=0, record_fidelity=False)
    result = train(params.beta[0], u_t, geom, model, params.couplings, config)
    assert all(r.fidelity is None for r in result.trajectory)


def test_pairs_per_epoch_subsets_triangular_inputs():
    geom = build_triangular_geometry("direct")
    model = direct_control_model()
    rng = np.random.default_rng(40)
    params = sample_target_parameters(geom, rng)
    u_t = unitary_from_parameters(geom, params)
    config = TrainerConfig(epochs=2, shots=None, pairs_per_epoch=5, seed=2)
    result = train(params.beta[0], u_t, geom, model, params.couplings, config)
    assert result.final_loss < 1e-10  # exact start on the target stays put


def test_flag_stuck():
    class R:
        def __init__(self, loss):
            self.loss = loss

    flat = [R(0.5)] * 100
    assert flag_stuck(flat, 0.4)
    assert not flag_stuck(flat, 0.6)
    descending = [R(0.5)] * 90 + [R(0.01)] * 10
    assert not flag_stuck(descending, 0.4)
    with pytest.raises(InvariantError):
        flag_stuck([], 0.1)


def test_generate_instance_direct_window():
    geom = build_planar_geometry(10)
    model = direct_control_model()
    rng = np.random.default_rng(50)
    inst = generate_instance(geom, model, (0.68, 0.72), rng)
    assert 0.68 <= inst.initial_fidelity <= 0.72
    f = fidelity(
        inst.u_target,
        unitary_from_control(geom, model, inst.couplings, inst.initial_controls),
    )
    assert f == pytest.approx(inst.initial_fidelity, abs=1e-12)
    f_t = fidelity(
        inst.u_target,
        unitary_from_control(geom, model, inst.couplings, inst.target_controls),
    )
    assert f_t == pytest.approx(1.0, abs=1e-12)


def test_generate_instance_unreachable_window():
    geom = build_planar_geometry(4)
    model = direct_control_model()
    rng = np.random.default_rng(51)
    # a tiny perturbation cannot drop the fidelity to 0.1
    with pytest.raises(WindowUnreachableError):
        generate_instance(geom, model, (0.0, 0.1), rng, perturb_range=0.001)


def test_generate_instance_mesh_random_start():
    geom = build_triangular_geometry("multi_phase")
    model = mesh_control_model(geom)
    rng = np.random.default_rng(52)
    inst = generate_instance(geom, model, None, rng)
    assert inst.target_controls.shape == (16,)
    assert inst.initial_controls.shape == (16,)
    assert np.all(inst.target_controls >= 0.0) and np.all(inst.target_controls <= 0.6)
    assert 0.0 <= inst.initial_fidelity <= 1.0


def test_intermediate_unitaries_train_smoke():
    geom, model, params, u_t = _planar_problem(m=4, seed=60)
    rng = np.random.default_rng(61)
    start = np.clip(params.beta[0] + rng.uniform(-0.05, 0.05, size=4), 0.7, 1.3)
    config = TrainerConfig(epochs=30, shots=None, seed=7)
    staged = intermediate_unitaries_train(
        start, u_t, 2, geom, model, params.couplings, config
    )
    assert len(staged.step_fidelities) == 2
    assert staged.aborted_at is None
    assert 0.0 <= staged.final_fidelity <= 1.0
    with pytest.raises(InvariantError):
        intermediate_unitaries_train(start, u_t, 0, geom, model, params.couplings, config)
