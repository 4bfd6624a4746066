"""scikit-learn style wrappers around the beamforming schemes and the LS estimator.

The beamformers are "fit" on one :class:`ChannelSet`; ``score`` returns the
negated CRB in dB so that larger is better, as sklearn expects.
"""
import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ValidationError, check_complex_array, check_receiver_type
from .beamforming import AoConfig, alternating_optimize, benchmark_separate, benchmark_transmit_only
from .channels import ChannelSet
from .system import SystemParams, combined_channel, crb, sinr


def _samples(a, name):
    # sklearn's check_array refuses complex input
    arr = check_complex_array(a, name)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D (samples x antennas), got shape {arr.shape}")
    return arr


def _check_channels(ch):
    if not isinstance(ch, ChannelSet):
        raise ValidationError(f"expected a ChannelSet, got {type(ch).__name__}")
    return ch


class _BeamformerBase(BaseEstimator):
    def __init__(self, gamma_db=10.0, power_dbm=30.0, T=256, receiver_type="I", random_state=0,
                 max_outer_iters=30, rel_tol=1e-3, n_randomizations=256, max_v_resamples=50):
        self.gamma_db = gamma_db
        self.power_dbm = power_dbm
        self.T = T
        self.receiver_type = receiver_type
        self.random_state = random_state
        self.max_outer_iters = max_outer_iters
        self.rel_tol = rel_tol
        self.n_randomizations = n_randomizations
        self.max_v_resamples = max_v_resamples

    def _ao(self):
        return AoConfig(self.max_outer_iters, self.rel_tol, self.n_randomizations, self.max_v_resamples,
                        check_receiver_type(self.receiver_type))

    def _run(self, ch, params, ao):
        raise NotImplementedError

    def fit(self, X, y=None):
        """Design beams for the channel realization ``X``."""
        ch = _check_channels(X)
        params = SystemParams.from_db(self.power_dbm, self.gamma_db, ch.K, self.T)
        sol = self._run(ch, params, self._ao())
        self.solution_ = sol
        self.status_ = sol.status
        self.design_ = sol.design
        self.v_ = sol.v
        self.crb_trace_ = list(sol.crb_trace)
        self.crb_ = sol.crb
        return self

    def sinr(self, X):
        """Achieved SINR per CU on channel ``X`` (usually the one fitted on)."""
        check_is_fitted(self, "design_")
        ch = _check_channels(X)
        return sinr(self.design_, combined_channel(ch, self.v_), ch.noise_k, self.receiver_type)

    def score(self, X, y=None):
        """Negative CRB in dB of the fitted design under ``X``; ``-inf`` if infeasible."""
        check_is_fitted(self, "design_")
        ch = _check_channels(X)
        if self.status_ == "Infeasible":
            return -math.inf
        return -10.0 * math.log10(crb(ch.G, self.design_.Rx, ch.noise_r, self.T))


class JointBeamformer(_BeamformerBase):
    """Alternating transmit / reflective optimization."""

    def _run(self, ch, params, ao):
        return alternating_optimize(ch, params, ao, seed=self.random_state)


class TransmitOnlyBeamformer(_BeamformerBase):
    """Transmit optimization under the first random phases of the joint scheme."""

    def _run(self, ch, params, ao):
        return benchmark_transmit_only(ch, params, ao.receiver_type, seed=self.random_state)


class SeparateBeamformer(_BeamformerBase):
    """Minimum-power information beams, then scaling plus sensing covariance."""

    def _run(self, ch, params, ao):
        return benchmark_separate(ch, params, ao.receiver_type, seed=self.random_state, ao=ao)


class LeastSquaresTargetEstimator(RegressorMixin, BaseEstimator):
    """Estimate the target response from echoes ``Y = A H C``.

    Samples run along rows as sklearn expects: ``X`` is the T x M block of
    transmitted samples and ``y`` the T x M block of received echoes.
    """

    def __init__(self, channels=None, v=None):
        self.channels = channels
        self.v = v

    def _operators(self):
        from .sensing import echo_operator

        ch = _check_channels(self.channels)
        if self.v is None:
            raise ValidationError("v (reflection coefficients) must be set")
        return ch, echo_operator(ch, self.v)

    def fit(self, X, y):
        from .sensing import EchoBatch, ls_estimate

        ch, _ = self._operators()
        X = _samples(X, "X")
        y = _samples(y, "y")
        if X.shape != y.shape or X.shape[1] != ch.M:
            raise ValidationError(f"X{X.shape} and y{y.shape} must both be T x {ch.M}")
        self.H_ = ls_estimate(EchoBatch(X.T, y.T, ch.noise_r), ch, self.v).H
        return self

    def predict(self, X):
        check_is_fitted(self, "H_")
        _, (A, PG) = self._operators()
        X = _samples(X, "X")
        return (A @ self.H_ @ PG @ X.T).T

    def score(self, X, y):
        """Coefficient of determination over all complex entries."""
        y = _samples(y, "y")
        resid = np.sum(np.abs(y - self.predict(X)) ** 2)
        total = np.sum(np.abs(y - y.mean(axis=0)) ** 2)
        return 1.0 - resid / total if total > 0 else 0.0
