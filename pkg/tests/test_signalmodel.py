import dataclasses
import math

import numpy as np
import pytest

from irs_multicast import channel as ch
from irs_multicast import signalmodel as sm

from conftest import random_complex


def naive_stream_terms(combiners, h_effs, tx, groups, zeta, user_k, group_h, stream_i):
    """Scalar-loop reference: signal, I, J for one stream, no matrix slicing."""
    w_col = combiners[user_k][:, stream_i]
    hk = h_effs[user_k]
    sig = abs(np.vdot(w_col, hk @ tx[:, group_h * zeta + stream_i])) ** 2
    i_term = 0.0
    for j in range(zeta):
        if j != stream_i:
            i_term += abs(np.vdot(w_col, hk @ tx[:, group_h * zeta + j])) ** 2
    j_term = 0.0
    for m in range(len(groups)):
        if m == group_h:
            continue
        for l in range(zeta):
            j_term += abs(np.vdot(w_col, hk @ tx[:, m * zeta + l])) ** 2
    return sig, i_term, j_term


def random_digital_bf(cfg, rng):
    b = random_complex(rng, cfg.n_bs, cfg.h_groups * cfg.zeta)
    b *= math.sqrt(cfg.power_w) / np.linalg.norm(b)
    j = [random_complex(rng, cfg.n_ue, cfg.zeta) for _ in range(cfg.k_users)]
    return sm.BeamformerSet(mode="digital", digital_b=b, digital_j=j)


def test_groups_from_sizes():
    assert sm.groups_from_sizes((2, 1, 3)) == ((0, 1), (2,), (3, 4, 5))


def test_validate_groups_rejects_overlap():
    with pytest.raises(ValueError, match="more than one"):
        sm.validate_groups(((0, 1), (1,)), 2)
    with pytest.raises(ValueError, match="empty"):
        sm.validate_groups(((0,), ()), 1)
    with pytest.raises(ValueError, match="every user"):
        sm.validate_groups(((0,),), 2)


def test_single_group_single_stream_sinr_is_signal_over_noise(desk_cfg):
    cfg = dataclasses.replace(desk_cfg, h_groups=1, k_users=1, group_sizes=(1,),
                              zeta=1, m_bs=4, m_ue=4)
    rng = np.random.default_rng(0)
    chset = ch.generate_channels(cfg, rng)
    nu = ch.random_phase_vector(cfg.n_irs, rng)
    bf = random_digital_bf(cfg, rng)
    sinr, i_t, j_t = sm.stream_sinr(bf, chset, nu, cfg, 0, 0, 0)
    assert i_t == 0.0 and j_t == 0.0
    h_eff = ch.effective_channels(chset, nu, cfg)[0]
    sig = abs(np.vdot(bf.digital_j[0][:, 0], h_eff @ bf.digital_b[:, 0])) ** 2
    assert math.isclose(sinr, sig / cfg.noise_w, rel_tol=1e-12)


def test_zero_tx_column_zero_sinr(desk_cfg):
    rng = np.random.default_rng(1)
    chset = ch.generate_channels(desk_cfg, rng)
    nu = ch.random_phase_vector(desk_cfg.n_irs, rng)
    bf = random_digital_bf(desk_cfg, rng)
    bf.digital_b[:, 0] = 0.0
    sinr, _, _ = sm.stream_sinr(bf, chset, nu, desk_cfg, 0, 0, 0)
    assert sinr == 0.0


def test_stream_sinr_matches_naive_loops(multiuser_cfg):
    rng = np.random.default_rng(2)
    chset = ch.generate_channels(multiuser_cfg, rng)
    nu = ch.random_phase_vector(multiuser_cfg.n_irs, rng)
    bf = random_digital_bf(multiuser_cfg, rng)
    groups = multiuser_cfg.groups()
    h_effs = ch.effective_channels(chset, nu, multiuser_cfg)
    combiners = [bf.combiner(k) for k in range(multiuser_cfg.k_users)]
    for h, members in enumerate(groups):
        for k in members:
            for i in range(multiuser_cfg.zeta):
                sinr, i_t, j_t = sm.stream_sinr(bf, chset, nu, multiuser_cfg, k, h, i)
                sig, i_ref, j_ref = naive_stream_terms(
                    combiners, h_effs, bf.tx_matrix(), groups,
                    multiuser_cfg.zeta, k, h, i)
                assert math.isclose(i_t, i_ref, rel_tol=1e-10, abs_tol=1e-300)
                assert math.isclose(j_t, j_ref, rel_tol=1e-10, abs_tol=1e-300)
                ref = sig / (i_ref + j_ref + multiuser_cfg.noise_w)
                assert math.isclose(sinr, ref, rel_tol=1e-10)


def test_stream_sinr_index_errors(desk_cfg):
    rng = np.random.default_rng(3)
    chset = ch.generate_channels(desk_cfg, rng)
    nu = ch.random_phase_vector(desk_cfg.n_irs, rng)
    bf = random_digital_bf(desk_cfg, rng)
    with pytest.raises(ValueError):
        sm.stream_sinr(bf, chset, nu, desk_cfg, 0, 1, 0)  # user 0 not in group 1
    with pytest.raises(ValueError):
        sm.stream_sinr(bf, chset, nu, desk_cfg, 0, 0, desk_cfg.zeta)


def test_user_rate_values():
    assert sm.user_rate(np.zeros(3), 1e6) == 0.0
    assert math.isclose(sm.user_rate(np.array([1.0]), 1.0), 1.0)
    bw = 251.1886e6  # log2(1+3) = 2
    assert math.isclose(sm.user_rate(np.array([3.0]), bw), 2 * bw)


def test_sum_rate_singleton_groups_sums_user_rates(desk_cfg):
    rng = np.random.default_rng(4)
    chset = ch.generate_channels(desk_cfg, rng)
    nu = ch.random_phase_vector(desk_cfg.n_irs, rng)
    bf = random_digital_bf(desk_cfg, rng)
    rep = sm.sum_rate(bf, chset, nu, desk_cfg)
    assert math.isclose(rep.sum_rate, rep.user_rates.sum(), rel_tol=1e-12)


def test_sum_rate_duplicate_users_min_of_equals(multiuser_cfg):
    rng = np.random.default_rng(5)
    chset = ch.generate_channels(multiuser_cfg, rng)
    # users 0 and 1 share one channel: the group min equals either rate
    h_ue = list(chset.h_irs_ue)
    h_ue[1] = h_ue[0]
    chset = dataclasses.replace(chset, h_irs_ue=tuple(h_ue))
    nu = ch.random_phase_vector(multiuser_cfg.n_irs, rng)
    bf = random_digital_bf(multiuser_cfg, rng)
    bf.digital_j[1] = bf.digital_j[0]
    rep = sm.sum_rate(bf, chset, nu, multiuser_cfg)
    assert math.isclose(rep.group_rates[0], rep.user_rates[0], rel_tol=1e-12)
    assert math.isclose(rep.user_rates[0], rep.user_rates[1], rel_tol=1e-12)


def test_sum_rate_matches_naive_decomposition(multiuser_cfg):
    rng = np.random.default_rng(6)
    chset = ch.generate_channels(multiuser_cfg, rng)
    nu = ch.random_phase_vector(multiuser_cfg.n_irs, rng)
    bf = random_digital_bf(multiuser_cfg, rng)
    groups = multiuser_cfg.groups()
    rep = sm.sum_rate(bf, chset, nu, multiuser_cfg)
    h_effs = ch.effective_channels(chset, nu, multiuser_cfg)
    combiners = [bf.combiner(k) for k in range(multiuser_cfg.k_users)]
    expected_group = []
    for h, members in enumerate(groups):
        rates = []
        for k in members:
            total = 0.0
            for i in range(multiuser_cfg.zeta):
                sig, i_t, j_t = naive_stream_terms(
                    combiners, h_effs, bf.tx_matrix(), groups,
                    multiuser_cfg.zeta, k, h, i)
                total += math.log2(1 + sig / (i_t + j_t + multiuser_cfg.noise_w))
            rates.append(multiuser_cfg.bw_hz * total)
        expected_group.append(min(rates))
    assert np.allclose(rep.group_rates, expected_group, rtol=1e-10)
    assert math.isclose(rep.sum_rate, sum(expected_group), rel_tol=1e-10)


def test_sum_rate_empty_group_rejected(desk_cfg):
    rng = np.random.default_rng(7)
    chset = ch.generate_channels(desk_cfg, rng)
    nu = ch.random_phase_vector(desk_cfg.n_irs, rng)
    bf = random_digital_bf(desk_cfg, rng)
    with pytest.raises(ValueError):
        sm.sum_rate(bf, chset, nu, desk_cfg, groups=((0, 1), ()))


def test_zeroing_interferers_increases_sinr(multiuser_cfg):
    rng = np.random.default_rng(8)
    chset = ch.generate_channels(multiuser_cfg, rng)
    nu = ch.random_phase_vector(multiuser_cfg.n_irs, rng)
    bf = random_digital_bf(multiuser_cfg, rng)
    rep = sm.sum_rate(bf, chset, nu, multiuser_cfg)
    bf.digital_b[:, multiuser_cfg.zeta:] = 0.0  # silence group 1
    rep2 = sm.sum_rate(bf, chset, nu, multiuser_cfg)
    assert np.all(rep2.sinr[0] > rep.sinr[0])


def test_relabeling_within_group_invariant(multiuser_cfg):
    rng = np.random.default_rng(9)
    chset = ch.generate_channels(multiuser_cfg, rng)
    nu = ch.random_phase_vector(multiuser_cfg.n_irs, rng)
    bf = random_digital_bf(multiuser_cfg, rng)
    rep = sm.sum_rate(bf, chset, nu, multiuser_cfg, groups=((0, 1), (2, 3)))
    rep_swapped = sm.sum_rate(bf, chset, nu, multiuser_cfg, groups=((1, 0), (3, 2)))
    assert np.allclose(rep.group_rates, rep_swapped.group_rates, rtol=1e-12)


def test_check_constraints_power_scaling(desk_cfg):
    rng = np.random.default_rng(10)
    bf = random_digital_bf(desk_cfg, rng)
    ratio = sm.check_constraints(bf, desk_cfg).power_ratio
    bf.digital_b *= 2.0
    assert math.isclose(sm.check_constraints(bf, desk_cfg).power_ratio,
                        4.0 * ratio, rel_tol=1e-12)


def test_check_constraints_compliant_hybrid(desk_cfg):
    rng = np.random.default_rng(11)
    f_rf = np.exp(1j * rng.uniform(0, 2 * np.pi, (desk_cfg.n_bs, desk_cfg.m_bs)))
    f_bb = random_complex(rng, desk_cfg.m_bs, desk_cfg.h_groups * desk_cfg.zeta)
    f_bb *= math.sqrt(desk_cfg.power_w) / np.linalg.norm(f_rf @ f_bb)
    w_rf = [np.exp(1j * rng.uniform(0, 2 * np.pi, (desk_cfg.n_ue, desk_cfg.m_ue)))
            for _ in range(desk_cfg.k_users)]
    w_bb = [random_complex(rng, desk_cfg.m_ue, desk_cfg.zeta)
            for _ in range(desk_cfg.k_users)]
    bf = sm.BeamformerSet(mode="hybrid", f_rf=f_rf, f_bb=f_bb, w_rf=w_rf, w_bb=w_bb)
    nu = ch.random_phase_vector(desk_cfg.n_irs, rng)
    rep = sm.check_constraints(bf, desk_cfg, nu)
    assert rep.rf_modulus_dev < 1e-9
    assert rep.power_ratio <= 1.0 + 1e-6
    assert rep.phase_modulus_dev < 1e-12
    assert rep.ok()


def test_beamformer_mode_validation():
    with pytest.raises(ValueError):
        sm.BeamformerSet(mode="nope")
    with pytest.raises(ValueError):
        sm.BeamformerSet(mode="digital")


def test_colored_noise_diagnostic(desk_cfg):
    # orthonormal combiner columns: the colored variant equals the bare one;
    # inflating the combiner shrinks it (noise scales with the column norm)
    from irs_multicast import bd

    rng = np.random.default_rng(12)
    chset = ch.generate_channels(desk_cfg, rng)
    nu = ch.random_phase_vector(desk_cfg.n_irs, rng)
    bf, _ = bd.build_beamformers(chset, desk_cfg.groups(), nu, desk_cfg)
    rep = sm.sum_rate(bf, chset, nu, desk_cfg)
    np.testing.assert_allclose(rep.sinr_colored, rep.sinr, rtol=1e-9)
    bf.digital_j = [2.0 * j for j in bf.digital_j]
    rep2 = sm.sum_rate(bf, chset, nu, desk_cfg)
    assert np.all(rep2.sinr_colored < rep2.sinr)
