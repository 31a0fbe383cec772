from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mprk_lab.errors import NonPositiveState, StageSolveFailure
from mprk_lab.mprk import (
    SchemeConfig,
    convergence_order,
    convergence_study,
    euler_step,
    heun_step,
    integrate,
    mprk22_matrices,
    mprk22_stages_linear,
    mprk22_step,
    mprk22_step_linear,
    step_times,
)
from mprk_lab.pds import ProductionDestructionSystem, linear_pds_from_matrix
from mprk_lab.problems import STIFF_PROBLEMS, problem_2d, problem_dahlquist_adapted

BOTH_FORMS = [mprk22_step, mprk22_step_linear]


# -- exact rational oracle ----------------------------------------------------

def frac_solve(M, b):
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(M)]
    for k in range(n):
        p = next(i for i in range(k, n) if M[i][k] != 0)
        M[k], M[p] = M[p], M[k]
        for i in range(n):
            if i != k and M[i][k] != 0:
                f = M[i][k] / M[k][k]
                M[i] = [a - f * c for a, c in zip(M[i], M[k])]
    return [M[i][n] / M[i][i] for i in range(n)]


def frac_mprk22_alpha1(A, y, dt):
    """One MPRK22(1) step of a conservative linear system in exact arithmetic.

    With alpha = 1 the Patankar weights involve no fractional powers: the
    stage is ``(I - dt A) y2 = y`` and the update is
    ``(I - dt A diag((y + y2) / (2 y2))) y_new = y``.
    """
    n = len(y)
    eye = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    y2 = frac_solve([[eye[i][j] - dt * A[i][j] for j in range(n)] for i in range(n)], y)
    tau = [(y[j] + y2[j]) / (2 * y2[j]) for j in range(n)]
    return frac_solve([[eye[i][j] - dt * A[i][j] * tau[j] for j in range(n)] for i in range(n)], y), y2


def to_float(v):
    return np.array([float(x) for x in v])


def test_rational_oracle_two_species():
    A = [[Fraction(-1), Fraction(1)], [Fraction(1), Fraction(-1)]]
    y_new, y2 = frac_mprk22_alpha1(A, [Fraction(3, 2), Fraction(1, 2)], Fraction(1))
    assert y2 == [Fraction(7, 6), Fraction(5, 6)]
    assert y_new == [Fraction(217, 206), Fraction(195, 206)]


@pytest.mark.parametrize("step", BOTH_FORMS)
def test_two_species_step(step):
    prob = problem_2d(1.0, 1.0)
    y = step(prob.system, [1.5, 0.5], SchemeConfig(1.0, 1.0))
    assert np.allclose(y, [217 / 206, 195 / 206], rtol=1e-15, atol=0.0)


def test_two_species_stage():
    ws = mprk22_stages_linear(problem_2d(1.0, 1.0).system, [1.5, 0.5], SchemeConfig(1.0, 1.0))
    assert np.allclose(ws.y_stage2, [7 / 6, 5 / 6], rtol=1e-15, atol=0.0)
    assert np.allclose(ws.sigma, ws.y_stage2, rtol=1e-15)
    off = ws.step_matrix - np.diag(np.diag(ws.step_matrix))
    assert np.all(np.diag(ws.step_matrix) > 0.0) and np.all(off <= 0.0)


@st.composite
def integer_conservative(draw):
    n = draw(st.integers(2, 4))
    off = [[draw(st.integers(0, 5)) if i != j else 0 for j in range(n)] for i in range(n)]
    A = [[Fraction(off[i][j]) for j in range(n)] for i in range(n)]
    for j in range(n):
        A[j][j] = -sum(Fraction(off[i][j]) for i in range(n))
    y = [Fraction(draw(st.integers(1, 9))) for _ in range(n)]
    dt = draw(st.sampled_from([Fraction(1, 10), Fraction(1), Fraction(10)]))
    return A, y, dt


@settings(max_examples=60, deadline=None)
@given(integer_conservative())
def test_matches_rational_oracle(case):
    A, y, dt = case
    want = to_float(frac_mprk22_alpha1(A, y, dt)[0])
    Af = np.array([[float(a) for a in row] for row in A])
    sys = linear_pds_from_matrix(Af)
    for step in BOTH_FORMS:
        got = step(sys, to_float(y), SchemeConfig(1.0, float(dt)))
        assert np.allclose(got, want, rtol=1e-13, atol=0.0)


# -- structural properties --------------------------------------------------------

@pytest.mark.parametrize("step", BOTH_FORMS)
def test_zero_field_is_fixed(step):
    sys = linear_pds_from_matrix(np.zeros((3, 3)))
    y = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(step(sys, y, SchemeConfig(0.75, 10.0)), y)


def test_zero_field_general_pds():
    zero = lambda y: np.zeros((2, 2))
    sys = ProductionDestructionSystem(2, zero, zero)
    y = np.array([0.5, 4.0])
    assert np.array_equal(mprk22_step(sys, y, SchemeConfig(2.0, 3.0)), y)
    assert np.array_equal(euler_step(sys, y, SchemeConfig(1.0, 3.0)), y)
    assert np.array_equal(heun_step(sys, y, SchemeConfig(1.0, 3.0)), y)


@pytest.mark.parametrize("label", sorted(STIFF_PROBLEMS))
@pytest.mark.parametrize("alpha", [0.5, 1.0, 5.0])
@pytest.mark.parametrize("dt", [1e-3, 5.0, 1e4])
def test_steady_state_is_fixed_point(label, alpha, dt):
    prob = STIFF_PROBLEMS[label]()
    y_star = prob.steady_state
    cfg = SchemeConfig(alpha, dt)
    for step in BOTH_FORMS:
        assert np.allclose(step(prob.system, y_star, cfg), y_star, rtol=1e-12, atol=0.0)
    ws = mprk22_stages_linear(prob.system, y_star, cfg)
    B, C = mprk22_matrices(prob.A, cfg)
    assert np.allclose(B @ y_star, y_star, rtol=1e-12, atol=0.0)
    assert np.allclose(C @ y_star, y_star, rtol=1e-12, atol=0.0)
    assert np.allclose(ws.sigma, y_star, rtol=1e-12, atol=0.0)
    assert np.allclose(ws.tau, 1.0, rtol=1e-12, atol=0.0)


def test_fixed_points_along_kernel():
    prob = STIFF_PROBLEMS["double-zero"]()
    rng = np.random.default_rng(5)
    v1, v2 = np.array([0.0, 1.0, 4 / 3, 0.0]), np.array([1.0, 0.0, 0.0, 2.0])
    for _ in range(10):
        y = rng.uniform(0.1, 5.0) * v1 + rng.uniform(0.1, 5.0) * v2
        got = mprk22_step(prob.system, y, SchemeConfig(rng.uniform(0.5, 5.0), 5.0))
        assert np.allclose(got, y, rtol=1e-12, atol=0.0)


def test_small_step_limit():
    prob = STIFF_PROBLEMS["complex-eigs"]()
    for h in (1e-8, 1e-12):
        y = mprk22_step_linear(prob.system, prob.y0, SchemeConfig(1.0, h))
        assert np.allclose(y, prob.y0, rtol=0.0, atol=1e3 * h * np.abs(prob.A).max())


@st.composite
def sweep_case(draw):
    n = draw(st.integers(2, 6))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    off = 10.0 ** rng.uniform(-2.0, 2.0, (n, n))
    np.fill_diagonal(off, 0.0)
    A = off - np.diag(off.sum(axis=0))
    y0 = rng.uniform(0.01, 100.0, n)
    dt = draw(st.sampled_from([1e-3, 1.0, 1e3, 1e6]))
    alpha = draw(st.sampled_from([0.5, 0.75, 1.0, 5.0]))
    return A, y0, dt, alpha


@settings(max_examples=50, deadline=None)
@given(sweep_case())
def test_positive_and_conservative(case):
    A, y0, dt, alpha = case
    sys = linear_pds_from_matrix(A)
    cfg = SchemeConfig(alpha, dt)
    traj = integrate(sys, y0, cfg, 10 * dt)
    assert np.all(traj.states > 0.0)
    target = sys.invariant_matrix @ y0
    assert np.all(np.abs(traj.invariants_trace - target) <= 1e-11 * np.abs(target))
    y_a = mprk22_step(sys, y0, cfg)
    y_b = mprk22_step_linear(sys, y0, cfg)
    assert np.allclose(y_a, y_b, rtol=1e-11, atol=0.0)


# -- guards ---------------------------------------------------------------------------

def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(0.4, 1.0)
    with pytest.raises(ValueError):
        SchemeConfig(1.0, 0.0)
    with pytest.raises(ValueError):
        SchemeConfig(float("nan"), 1.0)


def test_nonpositive_input():
    sys = problem_2d().system
    for step in BOTH_FORMS:
        with pytest.raises(NonPositiveState):
            step(sys, [1.0, 0.0], SchemeConfig())


def test_stage_failure_on_negative_destruction():
    sys = ProductionDestructionSystem(1, lambda y: np.zeros((1, 1)), lambda y: -np.array([[y[0]]]))
    with pytest.raises(StageSolveFailure):
        mprk22_step(sys, [1.0], SchemeConfig(1.0, 1.0))


# -- baselines ----------------------------------------------------------------------------

def test_euler_loses_positivity():
    prob = STIFF_PROBLEMS["real-eigs"]()
    y = euler_step(prob.system, prob.y0, SchemeConfig(1.0, 5.0))
    assert np.allclose(y, prob.y0 + 5.0 * prob.A @ prob.y0)
    assert np.any(y < 0.0)


def test_heun_on_decay():
    sys = ProductionDestructionSystem(1, lambda y: np.zeros((1, 1)), lambda y: np.array([[y[0]]]))
    assert heun_step(sys, [1.0], SchemeConfig(1.0, 1.0))[0] == 0.5


# -- integration ----------------------------------------------------------------------------

def test_step_times():
    assert np.array_equal(step_times(5.0, 40.0), np.arange(0.0, 41.0, 5.0))
    t = step_times(0.3, 1.0)
    assert t[-1] == 1.0 and np.isclose(t[-2], 0.9)
    assert np.array_equal(step_times(2.0, 1.0), [0.0, 1.0])
    with pytest.raises(ValueError):
        step_times(1.0, 0.0)


def test_integrate_single_step():
    prob = problem_2d()
    traj = integrate(prob.system, prob.y0, SchemeConfig(1.0, 0.5), 0.5)
    assert len(traj) == 2
    assert traj.metadata == {"scheme": "mprk22", "alpha": 1.0, "dt": 0.5, "underflow": False}


@pytest.mark.parametrize("label", ["real-eigs", "double-zero"])
def test_integrate_reaches_steady_state(label):
    prob = STIFF_PROBLEMS[label]()
    traj = integrate(prob.system, prob.y0, SchemeConfig(1.0, 5.0), 40.0)
    assert np.max(np.abs(traj.final - prob.steady_state)) < 3e-2
    assert traj.invariants_trace.shape == (9, prob.system.k)


def test_integrate_flags_underflow(caplog):
    prob = problem_dahlquist_adapted(-1e6)
    traj = integrate(prob.system, prob.y0, SchemeConfig(1.0, 1.0), 26.0)
    assert traj.metadata["underflow"]
    assert "below" in caplog.text


def test_integrate_schemes_by_name():
    prob = problem_2d()
    for name in ("mprk22", "mprk22-linear", "euler", "heun", "exact"):
        traj = integrate(prob.system, prob.y0, SchemeConfig(1.0, 0.1), 1.0, name)
        assert traj.metadata["scheme"] == name
        assert np.allclose(traj.final, prob.exact(1.0), atol=2e-2)
    with pytest.raises(ValueError):
        integrate(prob.system, prob.y0, SchemeConfig(), 1.0, "rk4")


# -- convergence ------------------------------------------------------------------------------

LADDER = [0.05 / 2**i for i in range(5)]


def test_convergence_orders():
    prob = problem_2d(1.0, 1.0)
    assert 1.8 <= convergence_order(prob.system, prob.y0, "mprk22", LADDER, 1.0) <= 2.2
    assert 1.8 <= convergence_order(prob.system, prob.y0, "mprk22", LADDER, 1.0, alpha=5.0) <= 2.2
    assert 1.8 <= convergence_order(prob.system, prob.y0, "heun", LADDER, 1.0) <= 2.2
    assert 0.8 <= convergence_order(prob.system, prob.y0, "euler", LADDER, 1.0) <= 1.2


def test_convergence_saturation_and_validation():
    prob = problem_2d()
    study = convergence_study(prob.system, prob.y0, "exact", LADDER, 1.0)
    assert study.saturated and np.isnan(study.order)
    with pytest.raises(ValueError):
        convergence_study(prob.system, prob.y0, "mprk22", LADDER[:2], 1.0)
    with pytest.raises(ValueError):
        convergence_study(prob.system, prob.y0, "mprk22", [0.1, 0.03, 0.01], 1.0)
