from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stackdeconv.estimation import stacked_estimate
from stackdeconv.matrices import (
    SeededSampler,
    diag_matrix,
    diag_moments,
    empirical_variance,
    gram_moments,
    observe_additive,
    observe_model2,
    parse_diag,
    read_matrix,
    sample_gaussian,
    stack,
    trace_powers,
    write_matrix,
)
from stackdeconv.moments import ModelDims, StackingScheme, scale_moments

REF_D = diag_matrix([2, 1, 1, 0.5])


def test_gaussian_statistics():
    X = sample_gaussian(4, 4, SeededSampler(1), size=(20_000,))
    n = X.size
    assert abs(X.mean()) < 4 / np.sqrt(n)
    assert np.mean(np.abs(X) ** 2) == pytest.approx(1, abs=4 * 1 / np.sqrt(n))
    # circular: E[x^2] = 0
    assert abs(np.mean(X**2)) < 4 / np.sqrt(n)
    assert np.var(X.real) == pytest.approx(0.5, abs=0.01)


def test_additive_mean_gram_trace():
    obs = observe_additive(REF_D, 1.0, SeededSampler(2), size=(20_000,))
    y1 = trace_powers(obs, 4, 1)[..., 0]
    se = y1.std() / np.sqrt(len(y1))
    assert abs(y1.mean() - 1.390625) < 3 * se


def test_model2_means():
    D = REF_D
    obs = observe_model2(D, 4, SeededSampler(3), size=(20_000,))
    assert obs.shape == (20_000, 4, 4)
    # E tr_n(Y Y^H)/N = tr_n(D D^H) + 1 = 2.5625, row 0 carries |2|^2 + 1 = 5
    g = np.einsum("kij,kij->ki", obs, obs.conj()).real / 4
    assert g.mean() == pytest.approx(2.5625, rel=0.02)
    assert g[:, 0].mean() == pytest.approx(5, rel=0.02)


def test_zero_noise_is_deterministic():
    obs = observe_additive(REF_D, 0, SeededSampler(4), size=(3,))
    assert np.array_equal(obs[1], REF_D)


def test_stack_layout():
    obs = np.arange(6 * 2 * 3).reshape(6, 2, 3)
    Y = stack(obs, StackingScheme(2, 3))
    assert Y.shape == (4, 9)
    for b in range(6):
        r, c = divmod(b, 3)
        assert np.array_equal(Y[2 * r:2 * r + 2, 3 * c:3 * c + 3], obs[b])
    assert stack(obs, StackingScheme(1, 6)).shape == (2, 18)
    assert stack(obs, StackingScheme(6, 1)).shape == (12, 3)
    with pytest.raises(ValueError):
        stack(obs, StackingScheme(2, 2))


def test_stack_batched_matches_loop():
    obs = sample_gaussian(2, 3, SeededSampler(5), size=(4, 6))
    Y = stack(obs, StackingScheme(3, 2))
    for k in range(4):
        assert np.array_equal(Y[k], stack(obs[k], StackingScheme(3, 2)))


@pytest.mark.parametrize("L1, L2", [(1, 1), (2, 3), (3, 1), (1, 4)])
def test_compound_moment_scaling(L1, L2):
    D = diag_matrix([2, 1, 1, 0.5])
    s = StackingScheme(L1, L2)
    Dc = stack(np.broadcast_to(D, (s.L, 4, 4)), s)
    single = trace_powers(D, 4, 4)
    comp = trace_powers(Dc, 4 * L2, 4)
    for q in range(1, 5):
        expected = float(scale_moments((q,), L1)) * single[q - 1]
        assert comp[q - 1] == pytest.approx(expected, rel=1e-10)


def test_gram_moments_example():
    vals = gram_moments(REF_D, 4, [(3,), (2, 1), ()])
    assert vals[(3,)] == pytest.approx(0.25787353515625, rel=1e-13)
    assert vals[(2, 1)] == pytest.approx(0.2822265625 * 0.390625, rel=1e-13)
    assert vals[()] == 1.0
    with pytest.raises(ValueError):
        gram_moments(REF_D, 0, [(1,)])


def test_trace_powers_wide_and_tall_agree():
    Y = sample_gaussian(3, 7, SeededSampler(6))
    # the spectrum of Y^H Y is that of Y Y^H plus zeros
    a = trace_powers(Y, 7, 3) * 3
    b = trace_powers(Y.conj().T, 7, 3) * 7
    assert np.allclose(a, b)


def test_diag_moments_exact():
    m = diag_moments([2, 1, 1, Fraction(1, 2)], 4, 3)
    assert m[(1,)] == Fraction(25, 64)
    assert m[(3,)] == Fraction("0.25787353515625")
    rect = diag_moments([1, 1], 3, 1, n=4)
    assert rect[(1,)] == Fraction(2, 12)


def test_empirical_variance():
    assert empirical_variance([1.0, 2.0, 3.0, 4.0]) == pytest.approx(5 / 3)
    with pytest.raises(ValueError):
        empirical_variance([1.0])


def test_matrix_file_round_trip(tmp_path):
    M = sample_gaussian(3, 2, SeededSampler(7))
    path = tmp_path / "m.txt"
    write_matrix(path, M)
    assert np.array_equal(read_matrix(path), M)
    path.write_text("2 2\n1 0 0 0\n")
    with pytest.raises(ValueError):
        read_matrix(path)


def test_parse_diag():
    assert parse_diag("2, 1,0.5") == [2, 1, Fraction(1, 2)]
    with pytest.raises(ValueError):
        parse_diag("2,x")


def test_seeded_streams_reproduce():
    a = sample_gaussian(2, 2, SeededSampler(9, (1, 4)), size=(3,))
    b = sample_gaussian(2, 2, SeededSampler(9, (1, 4)), size=(3,))
    c = sample_gaussian(2, 2, SeededSampler(9, (1, 5)), size=(3,))
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert SeededSampler(9).substream(1, 4) == SeededSampler(9, (1, 4))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_stacked_estimate_is_finite_and_deterministic(n, N, L1, L2, p):
    obs = observe_additive(np.ones((n, N)), 1.0, SeededSampler(11, (n, N, L1, L2)), size=(L1 * L2,))
    est = stacked_estimate(obs, (p,), ModelDims(n, N), StackingScheme(L1, L2))
    assert np.isfinite(est)
    again = stacked_estimate(obs.copy(), (p,), ModelDims(n, N), StackingScheme(L1, L2))
    assert est == again
