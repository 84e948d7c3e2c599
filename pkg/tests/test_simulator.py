from dataclasses import replace

import numpy as np
import pytest

from cognn.core import ConfigError, NumericalError
from cognn.simulator import (
    SimSchedule,
    SpringSystem,
    energy,
    generate_stream,
    init_system,
    rewire,
    sample_adjacency,
    simulate_run,
    step_integrate,
    stream_length,
)


def _pair_system(**kw):
    base = dict(
        positions=np.array([[-0.5, 0.0], [0.5, 0.0]]),
        velocities=np.array([[0.0, 0.3], [0.0, -0.3]]),
        adjacency=np.array([[0.0, 1.0], [1.0, 0.0]]),
        spring_k=0.1,
        dt=0.001,
        sample_every=100,
        box_half=5.0,
        edge_prob=0.2,
    )
    base.update(kw)
    return SpringSystem(**base)


def test_same_seed_same_system():
    a, _ = init_system(SimSchedule(), 3)
    b, _ = init_system(SimSchedule(), 3)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.adjacency, b.adjacency)


def test_adjacency_shape_and_symmetry():
    sys_, _ = init_system(SimSchedule(n=20), 0)
    adj = sys_.adjacency
    assert adj.shape == (20, 20)
    assert np.array_equal(adj, adj.T) and not np.any(np.diag(adj))
    assert np.all(np.abs(sys_.positions) <= 1.0)


def test_near_zero_edge_probability():
    sys_, _ = init_system(SimSchedule(edge_prob=1e-9), 0)
    assert not sys_.adjacency.any()


def test_rewire_keeps_state_and_is_deterministic():
    sys_, rng = init_system(SimSchedule(), 1)
    a = rewire(sys_, np.random.default_rng(5))
    b = rewire(sys_, np.random.default_rng(5))
    assert np.array_equal(a.adjacency, b.adjacency)
    assert np.array_equal(a.positions, sys_.positions) and np.array_equal(a.velocities, sys_.velocities)


def test_rewire_density_law_of_large_numbers():
    rng = np.random.default_rng(0)
    n = 20
    dens = [sample_adjacency(n, 0.2, rng)[np.triu_indices(n, 1)].mean() for _ in range(1000)]
    assert abs(np.mean(dens) - 0.2) <= 0.02


def test_free_motion_is_exact():
    s = _pair_system(adjacency=np.zeros((2, 2)))
    nxt = step_integrate(s)
    assert np.array_equal(nxt.positions, s.positions + s.dt * s.velocities)


def test_center_of_mass_fixed():
    s = _pair_system()
    com = s.positions.mean(axis=0)
    for _ in range(50):
        s = step_integrate(s)
        assert np.allclose(s.positions.mean(axis=0), com, atol=1e-12)


def test_energy_drift_is_small():
    s = _pair_system()
    e0 = energy(s)
    from cognn.simulator import _advance

    s = _advance(s, 100_000)
    assert np.all(np.abs(s.positions) < s.box_half)
    assert abs(energy(s) - e0) / e0 <= 0.01


def test_walls_reflect():
    s = _pair_system(positions=np.array([[4.9995, 0.0], [-4.0, 0.0]]), velocities=np.array([[1.0, 0.0], [0.0, 0.0]]),
                     adjacency=np.zeros((2, 2)))
    nxt = step_integrate(s)
    assert nxt.positions[0, 0] == pytest.approx(2 * 5.0 - (4.9995 + 0.001), abs=1e-12)
    assert nxt.velocities[0, 0] == -1.0


def test_blow_up_reports_dt():
    s = _pair_system(spring_k=1e300, dt=1e10, box_half=1e308)
    with pytest.raises(NumericalError, match="dt"):
        step_integrate(s)


def test_positions_stay_in_box():
    run = simulate_run(SimSchedule(num_rewirings=2, frames_per_segment=50, length_unit=1.0), 0)
    assert np.all(np.abs(run.frames) <= 5.0)


def test_stream_windows_and_determinism():
    sched = SimSchedule(n=4, num_rewirings=3, frames_per_segment=12, window=3)
    a = list(generate_stream(sched, 2))
    b = list(generate_stream(sched, 2))
    assert len(a) == stream_length(sched) == 3 * 12 - (2 * 3 - 1)
    run = simulate_run(sched, 2)
    inp, tgt, adj = a[0]
    assert np.array_equal(inp.data, run.frames[0:3].transpose(1, 0, 2))
    assert np.array_equal(tgt.data, run.frames[3:6].transpose(1, 0, 2))
    for (i1, t1, g1), (i2, t2, g2) in zip(a, b):
        assert np.array_equal(i1.data, i2.data) and np.array_equal(t1.data, t2.data) and np.array_equal(g1, g2)
    # a window starting in segment 1 carries segment 1's graph
    assert np.array_equal(a[12][2], run.adjacencies[1])


def test_rewiring_count():
    run = simulate_run(SimSchedule(n=5, num_rewirings=4, frames_per_segment=5), 0)
    assert run.adjacencies.shape == (4, 5, 5) and run.frames.shape == (20, 5, 2)


@pytest.mark.parametrize("kw", [{"edge_prob": 1.0}, {"num_rewirings": 0}, {"dt": 0.0}, {"init_pos": 6.0}])
def test_schedule_validation(kw):
    with pytest.raises(ConfigError):
        SimSchedule(**kw)


def test_length_unit_scales_frames():
    a = simulate_run(SimSchedule(n=3, num_rewirings=1, frames_per_segment=5, length_unit=1.0), 0)
    b = simulate_run(SimSchedule(n=3, num_rewirings=1, frames_per_segment=5, length_unit=30.0), 0)
    assert np.allclose(b.frames, 30.0 * a.frames, rtol=0, atol=1e-12)
