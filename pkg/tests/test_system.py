import numpy as np
import pytest

from irs_isac import (ChannelSet, NearSingular, ReflectCoeffs, SystemParams, TransmitDesign, ValidationError,
                      combined_channel, crb, reflect_quadratics, sinr, total_power)
from oracles import combined_channel_loop, crb_explicit, sinr_scalar


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channels(rng, M=4, N=3, K=2):
    return ChannelSet(crandn(rng, N, M), crandn(rng, K, M), crandn(rng, K, N), rng.random(K) + 0.5, 0.3)


def random_design(rng, K=2, M=4):
    a = crandn(rng, M, M)
    return TransmitDesign(crandn(rng, K, M), a @ a.conj().T)


def unit_modulus(rng, N):
    return np.exp(2j * np.pi * rng.random(N))


def test_combined_channel_no_reflection():
    rng = np.random.default_rng(0)
    ch = random_channels(rng)
    ch0 = ChannelSet(ch.G, ch.h_d, np.zeros_like(ch.h_r), ch.noise_k, ch.noise_r)
    np.testing.assert_array_equal(combined_channel(ch0, unit_modulus(rng, 3)), ch.h_d)


def test_combined_channel_scalar_irs():
    rng = np.random.default_rng(1)
    ch = random_channels(rng, N=1)
    expected = ch.h_d + ch.h_r[:, :1] * ch.G.conj()
    np.testing.assert_allclose(combined_channel(ch, np.ones(1)), expected, atol=1e-15)


def test_combined_channel_matches_loop():
    rng = np.random.default_rng(2)
    ch = random_channels(rng, M=5, N=4, K=3)
    v = unit_modulus(rng, 4)
    np.testing.assert_allclose(combined_channel(ch, v), combined_channel_loop(ch.G, ch.h_d, ch.h_r, v), atol=1e-13)
    np.testing.assert_allclose(combined_channel(ch, ReflectCoeffs.from_vector(v)), combined_channel(ch, v),
                               atol=1e-14)


def test_combined_channel_shape_check():
    rng = np.random.default_rng(2)
    with pytest.raises(ValidationError):
        combined_channel(random_channels(rng), np.ones(5))


def test_sinr_single_user_without_sensing():
    rng = np.random.default_rng(3)
    h = crandn(rng, 1, 4)
    d = TransmitDesign(crandn(rng, 1, 4), np.zeros((4, 4)))
    expected = abs(np.vdot(h[0], d.w[0])) ** 2 / 0.7
    for rx in ("I", "II"):
        assert sinr(d, h, [0.7], rx)[0] == pytest.approx(expected, rel=1e-13)


def test_sinr_orthogonal_beam_is_zero():
    h = np.array([[1.0, 0.0]])
    d = TransmitDesign(np.array([[0.0, 1.0]]), np.eye(2))
    assert sinr(d, h, [1.0], "I")[0] == 0.0


def test_sinr_matches_scalar_expansion():
    rng = np.random.default_rng(4)
    h = crandn(rng, 2, 4)
    d = random_design(rng)
    noise = np.array([0.4, 1.3])
    for rx in ("I", "II"):
        np.testing.assert_allclose(sinr(d, h, noise, rx), sinr_scalar(d.w, d.R0, h, noise, rx), rtol=1e-12)


def test_type_two_sinr_dominates():
    rng = np.random.default_rng(5)
    for _ in range(20):
        h = crandn(rng, 2, 4)
        d = random_design(rng)
        assert np.all(sinr(d, h, 1.0, "II") >= sinr(d, h, 1.0, "I"))
    d = TransmitDesign(crandn(rng, 2, 4), np.zeros((4, 4)))
    np.testing.assert_array_equal(sinr(d, h, 1.0, "II"), sinr(d, h, 1.0, "I"))


def test_bad_receiver_type():
    d = TransmitDesign.zeros(1, 2)
    with pytest.raises(ValidationError):
        sinr(d, np.ones((1, 2)), 1.0, "III")


def test_total_power_cases():
    assert total_power(TransmitDesign.zeros(2, 3)) == 0.0
    d = TransmitDesign(np.array([[np.sqrt(2), 0.0]]), np.eye(2))
    assert total_power(d) == pytest.approx(4.0)
    rng = np.random.default_rng(6)
    d = random_design(rng)
    by_entry = sum(abs(x) ** 2 for x in d.w.ravel()) + sum(d.R0[i, i].real for i in range(4))
    assert total_power(d) == pytest.approx(by_entry, rel=1e-13)


def test_crb_identity_case():
    assert crb(np.eye(2), np.eye(2), 1.0, 1) == pytest.approx(4.0)


def test_crb_homogeneity_and_oracle():
    rng = np.random.default_rng(7)
    G = crandn(rng, 4, 4)
    a = crandn(rng, 4, 4)
    Rx = a @ a.conj().T + 0.1 * np.eye(4)
    base = crb(G, Rx, 0.5, 16)
    assert base == pytest.approx(crb_explicit(G, Rx, 0.5, 16), rel=1e-10)
    assert crb(G, 3.0 * Rx, 0.5, 16) == pytest.approx(base / 3.0, rel=1e-12)


def test_crb_rescaling_invariance():
    rng = np.random.default_rng(8)
    G = crandn(rng, 3, 4)
    Rx = random_design(rng, 1).Rx
    c = 7.3
    assert crb(c * G, Rx, c ** 2 * 0.2, 8) * c ** 2 == pytest.approx(crb(G, Rx, 0.2, 8), rel=1e-10)


def test_crb_names_singular_factor():
    G = np.eye(2)
    with pytest.raises(NearSingular, match="G Rx G"):
        crb(G, np.diag([1.0, 0.0]), 1.0, 1)
    with pytest.raises(NearSingular, match="G G"):
        crb(np.array([[1.0, 0.0], [1.0, 0.0]]), np.eye(2), 1.0, 1)


def test_crb_invariant_to_reflection():
    # the CRB has no v dependence: only ReflectCoeffs changes, nothing to recompute
    rng = np.random.default_rng(9)
    ch = random_channels(rng)
    d = random_design(rng)
    values = {crb(ch.G, d.Rx, ch.noise_r, 4) for _ in range(3) if combined_channel(ch, unit_modulus(rng, 3)) is not None}
    assert len(values) == 1


def test_sinr_rescaling_invariance():
    rng = np.random.default_rng(10)
    ch = random_channels(rng)
    d = random_design(rng)
    v = unit_modulus(rng, 3)
    c = 1e-6
    scaled = ChannelSet(c * ch.G, c * ch.h_d, ch.h_r, c ** 2 * ch.noise_k, ch.noise_r)
    for rx in ("I", "II"):
        np.testing.assert_allclose(sinr(d, combined_channel(scaled, v), scaled.noise_k, rx),
                                   sinr(d, combined_channel(ch, v), ch.noise_k, rx), rtol=1e-10)


def quad(Q, u):
    return np.real(u.conj() @ Q @ u)


def test_reflect_quadratics_zero_sensing():
    rng = np.random.default_rng(11)
    ch = random_channels(rng)
    d = TransmitDesign(crandn(rng, 2, 4), np.zeros((4, 4)))
    _, Q0 = reflect_quadratics(ch, d)
    assert np.all(Q0 == 0)


@pytest.mark.parametrize("v", [1.0, -1.0])
def test_reflect_quadratics_two_point(v):
    rng = np.random.default_rng(12)
    ch = random_channels(rng, M=3, N=1, K=1)
    d = random_design(rng, K=1, M=3)
    Q, Q0 = reflect_quadratics(ch, d)
    u = np.array([v, 1.0])
    h = combined_channel(ch, np.array([v]))[0]
    assert quad(Q[0, 0], u) == pytest.approx(abs(np.vdot(h, d.w[0])) ** 2, rel=1e-12)
    assert quad(Q0[0], u) == pytest.approx(np.real(np.vdot(h, d.R0 @ h)), rel=1e-12)


def test_reflect_quadratics_random_identity():
    rng = np.random.default_rng(13)
    ch = random_channels(rng, M=4, N=5, K=3)
    d = random_design(rng, K=3, M=4)
    Q, Q0 = reflect_quadratics(ch, d)
    for _ in range(100):
        v = unit_modulus(rng, 5)
        u = np.append(v, 1.0)
        h = combined_channel(ch, v)
        for k in range(3):
            for i in range(3):
                ref = abs(np.vdot(h[k], d.w[i])) ** 2
                assert abs(quad(Q[k, i], u) - ref) <= 1e-10 * max(ref, 1e-300) + 1e-14
            ref0 = np.real(np.vdot(h[k], d.R0 @ h[k]))
            assert abs(quad(Q0[k], u) - ref0) <= 1e-10 * ref0
        for k in range(3):
            assert np.linalg.eigvalsh(Q0[k])[0] >= -1e-10 * np.abs(Q0[k]).max()


def test_reflect_coeffs_unit_modulus():
    rng = np.random.default_rng(14)
    rc = ReflectCoeffs.random(6, rng)
    np.testing.assert_allclose(np.abs(rc.v), 1.0, rtol=0, atol=1e-15)
    assert np.all((rc.phases >= 0) & (rc.phases < 2 * np.pi))
    np.testing.assert_array_equal(np.diag(rc.phi()), rc.v)
    with pytest.raises(ValidationError):
        ReflectCoeffs.from_vector([1.0, 0.0])


def test_system_params():
    p = SystemParams.from_db(30.0, 10.0, K=3, T=64)
    assert p.P0 == pytest.approx(1.0)
    np.testing.assert_allclose(p.gamma, [10.0] * 3)
    for bad in (dict(P0=0.0, gamma=1.0), dict(P0=1.0, gamma=0.0), dict(P0=1.0, gamma=1.0, T=0)):
        with pytest.raises(ValidationError):
            SystemParams(**bad)


def test_design_validation():
    with pytest.raises(ValidationError):
        TransmitDesign(np.ones((1, 3)), np.eye(2))
    with pytest.raises(ValidationError):
        TransmitDesign(np.array([[np.nan, 0.0]]), np.eye(2))
