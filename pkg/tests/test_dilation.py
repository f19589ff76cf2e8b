import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavitydamp.channel import damp_closed_form, damp_kraus, survival
from cavitydamp.dilation import (
    EpochError,
    JointState,
    apply_epoch,
    embed,
    loss_weight,
    trace_out_env,
)
from cavitydamp.fock import make_fock, outer, random_state


class TestLossWeight:
    def test_single_photon(self):
        gamma_t = 0.7
        mu = math.exp(-gamma_t / 2)
        assert loss_weight(1, 1, mu) == pytest.approx(math.exp(-gamma_t / 2))
        assert loss_weight(1, 0, mu) == pytest.approx(math.sqrt(1 - math.exp(-gamma_t)))

    def test_vacuum(self):
        assert loss_weight(0, 0, 0.3) == 1

    def test_two_photons_one_survivor(self):
        mu = 0.6
        assert loss_weight(2, 1, mu) == pytest.approx(math.sqrt(2) * mu * math.sqrt(1 - mu**2))

    def test_k_above_n(self):
        with pytest.raises(ValueError):
            loss_weight(1, 2, 0.5)

    @pytest.mark.parametrize("n", range(9))
    def test_weights_normalized(self, n):
        total = sum(loss_weight(n, k, 0.77) ** 2 for k in range(n + 1))
        assert total == pytest.approx(1, abs=1e-14)


class TestApplyEpoch:
    def test_single_photon_half(self):
        j = apply_epoch(embed(make_fock(1, 2)), math.sqrt(0.5), 0)
        assert j.amplitude(1, (0,)) == pytest.approx(1 / math.sqrt(2))
        assert j.amplitude(0, (1,)) == pytest.approx(1 / math.sqrt(2))
        assert j.norm_sq() == pytest.approx(1, abs=1e-12)

    def test_vacuum_unchanged(self):
        for mu in [1.0, 0.3, 0.01j]:
            j = apply_epoch(embed(make_fock(0, 3)), mu, 0)
            assert dict(j.items()) == {(0, (0,)): 1}

    def test_two_photons(self):
        x = 0.4
        j = apply_epoch(embed(make_fock(2, 3)), math.sqrt(x), 0)
        weights = [abs(j.amplitude(k, (2 - k,))) ** 2 for k in (2, 1, 0)]
        np.testing.assert_allclose(weights, [x**2, 2 * x * (1 - x), (1 - x) ** 2], atol=1e-15)
        rho_k = damp_kraus(outer(make_fock(2, 3)), math.sqrt(x))
        np.testing.assert_allclose(weights[::-1], np.diag(rho_k).real, atol=1e-15)

    def test_epoch_reuse(self):
        j = apply_epoch(embed(make_fock(1, 2)), 0.5, 3)
        with pytest.raises(EpochError):
            apply_epoch(j, 0.5, 3)
        with pytest.raises(EpochError):
            apply_epoch(j, 0.5, 1)

    def test_loss_record_bookkeeping(self, rng):
        c = random_state(5, rng)
        j = apply_epoch(apply_epoch(embed(c), 0.8, 0), 0.6, 1)
        for (n, record), _ in j.items():
            assert len(record) == 2
            # photons still in the field plus photons lost never exceed the top level
            assert n + sum(record) <= 4


class TestTraceOut:
    def test_undamped(self, rng):
        c = random_state(4, rng)
        np.testing.assert_allclose(trace_out_env(embed(c)), outer(c), atol=0)

    def test_single_photon(self):
        gamma_t = 0.9
        rho = trace_out_env(apply_epoch(embed(make_fock(1, 2)), survival(1.0, gamma_t), 0))
        np.testing.assert_allclose(
            rho, np.diag([1 - math.exp(-gamma_t), math.exp(-gamma_t)]), atol=1e-15
        )

    def test_plus_state(self):
        c = np.array([1, 1]) / math.sqrt(2)
        rho = trace_out_env(apply_epoch(embed(c), 0.45, 0))
        np.testing.assert_allclose(rho, damp_closed_form(c, 0.45), atol=1e-12)

    def test_epoch_labels_do_not_matter(self, rng):
        c = random_state(4, rng)
        j = apply_epoch(apply_epoch(embed(c), 0.7, 0), 0.5, 1)
        swapped = JointState(j.dim, {r[::-1]: v for r, v in j.branches.items()}, (1, 0))
        np.testing.assert_allclose(trace_out_env(swapped), trace_out_env(j), atol=0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.05, 1.0), st.floats(-3, 3))
def test_purification_matches_closed_form(dim, seed, mag, phase):
    c = random_state(dim, np.random.default_rng(seed))
    mu = mag * np.exp(1j * phase)
    j = apply_epoch(embed(c), mu, 0)
    assert abs(j.norm_sq() - 1) <= 1e-12
    np.testing.assert_allclose(trace_out_env(j), damp_closed_form(c, mu), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1), st.floats(0.1, 1.0), st.floats(0.1, 1.0))
def test_two_epochs_equal_one(dim, seed, m1, m2):
    c = random_state(dim, np.random.default_rng(seed))
    mu1, mu2 = m1 * np.exp(0.3j), m2 * np.exp(-1.1j)
    two = apply_epoch(apply_epoch(embed(c), mu1, 0), mu2, 1)
    one = apply_epoch(embed(c), mu1 * mu2, 0)
    assert abs(two.norm_sq() - 1) <= 1e-12
    np.testing.assert_allclose(trace_out_env(two), trace_out_env(one), atol=1e-10)
