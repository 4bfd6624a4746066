import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from irs_isac import (Geometry, JointBeamformer, LeastSquaresTargetEstimator, PropagationParams, SeparateBeamformer,
                      TransmitOnlyBeamformer, ValidationError, gen_channels, simulate_echo)
from irs_isac.sensing import random_target


@pytest.fixture(scope="module")
def channels():
    return gen_channels(Geometry(), PropagationParams(), 4, 4, 2, seed=21)


def test_params_round_trip_and_clone():
    est = JointBeamformer(gamma_db=12.0, receiver_type="II", max_outer_iters=7)
    params = est.get_params()
    assert params["gamma_db"] == 12.0 and params["max_outer_iters"] == 7
    twin = clone(est)
    assert twin.get_params() == params
    twin.set_params(gamma_db=3.0)
    assert twin.gamma_db == 3.0 and est.gamma_db == 12.0


def test_fit_score_and_sinr(channels):
    est = JointBeamformer(gamma_db=10.0, random_state=21).fit(channels)
    assert est.status_ in ("Converged", "IterCap")
    assert est.score(channels) == pytest.approx(-10 * math.log10(est.crb_))
    assert np.all(est.sinr(channels) >= 10.0 * (1 - 1e-6))
    base = TransmitOnlyBeamformer(gamma_db=10.0, random_state=21).fit(channels)
    sep = SeparateBeamformer(gamma_db=10.0, random_state=21).fit(channels)
    assert est.score(channels) >= max(base.score(channels), sep.score(channels)) - 1e-6


def test_unfitted_and_bad_input(channels):
    with pytest.raises(NotFittedError):
        JointBeamformer().score(channels)
    with pytest.raises(ValidationError):
        JointBeamformer().fit(np.eye(3))
    with pytest.raises(ValidationError):
        JointBeamformer(receiver_type="III").fit(channels)


def test_infeasible_scores_minus_infinity(channels):
    est = TransmitOnlyBeamformer(gamma_db=90.0).fit(channels)
    assert est.status_ == "Infeasible"
    assert est.score(channels) == -math.inf


def test_least_squares_estimator(channels):
    rng = np.random.default_rng(0)
    v = np.exp(2j * np.pi * rng.random(4))
    H = random_target(4, 0).H
    from irs_isac import TransmitDesign

    design = TransmitDesign(np.zeros((2, 4)), np.eye(4) * 0.25)
    batch = simulate_echo(channels, v, design, H, 64, seed=1, noise_r=0.0)
    est = LeastSquaresTargetEstimator(channels=channels, v=v).fit(batch.X.T, batch.Y.T)
    assert np.linalg.norm(est.H_ - H) <= 1e-9 * np.linalg.norm(H)
    assert est.score(batch.X.T, batch.Y.T) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(est.predict(batch.X.T), batch.Y.T, rtol=1e-8, atol=1e-30)
    with pytest.raises(ValidationError):
        est.fit(batch.X.T[:, :3], batch.Y.T)
    with pytest.raises(ValidationError):
        LeastSquaresTargetEstimator(channels=channels).fit(batch.X.T, batch.Y.T)
