import dataclasses
import json
import math

import numpy as np
import pytest

from vacuumqkd.gaussian import (
    TwoModeCovariance,
    UnphysicalError,
    approximate_record,
    cm_from_correlations,
    epr_correlation,
    epr_covariance,
    key_rate,
    rayleigh_eta,
)
from vacuumqkd.protocol import (
    InsufficientDataError,
    Message,
    MessageType,
    ProtocolConfig,
    audit_transcript,
    estimate_channel,
    homodyne_expected_variance,
    homodyne_gaussian_check,
    run_protocol,
    sample_quadratures,
    streams,
)

EXPECTED_ORDER = [
    ("alice", "basis-announce"),
    ("bob", "basis-announce"),
    ("alice", "reveal-indices"),
    ("alice", "reveal-values"),
    ("bob", "reveal-values"),
    ("bob", "estimate-report"),
]


def vacuum_source_cm():
    return cm_from_correlations(approximate_record(40e9, 60e9), rayleigh_eta(0.1925, 3e-6, 1e5))


def revealed_pairs(cm, n, seed):
    s = sample_quadratures(cm, n, seed)
    half = n // 2
    return s[:half][:, [0, 2]], s[half:][:, [1, 3]]


class TestSampler:
    def test_identity_covariance(self):
        n = 100_000
        s = sample_quadratures(TwoModeCovariance(np.eye(4)), n, 11)
        assert s.shape == (n, 4)
        assert np.abs(np.cov(s.T, bias=True) - np.eye(4)).max() < 5 / math.sqrt(n)

    def test_tmsv_correlation(self):
        n = 100_000
        s = sample_quadratures(epr_covariance(2.0), n, 12)
        est = np.var(s[:, 0] - s[:, 2]) / 2
        target = epr_correlation(2.0)
        assert est == pytest.approx(target, abs=4 * target * math.sqrt(2 / n))

    def test_deterministic(self):
        cm = epr_covariance(1.5)
        assert np.array_equal(sample_quadratures(cm, 500, 3), sample_quadratures(cm, 500, 3))
        assert not np.array_equal(sample_quadratures(cm, 500, 3), sample_quadratures(cm, 500, 4))

    def test_rejects_non_positive(self):
        with pytest.raises(UnphysicalError):
            sample_quadratures(np.diag([1.0, 1.0, 1.0, -1.0]), 10, 0)

    def test_streams_independent(self):
        a, b, c = streams(5)
        x, y, z = a.random(4), b.random(4), c.random(4)
        assert not (np.array_equal(x, y) or np.array_equal(y, z))
        assert np.array_equal(streams(5)[1].random(4), y)


class TestHomodyne:
    def test_vacuum(self):
        est = homodyne_gaussian_check(1.0, 1e3, 100_000, 21)
        assert abs(est.variance - 1.0) < 3 * est.stderr

    def test_thermal(self):
        v = 1.0308
        est = homodyne_gaussian_check(v, 1e3, 100_000, 22)
        assert abs(est.variance - homodyne_expected_variance(v, 1e3)) < 3 * est.stderr

    def test_noisy_signal_statistics(self):
        v = 50.0
        est = homodyne_gaussian_check(v, 100.0, 200_000, 23)
        assert abs(est.variance - homodyne_expected_variance(v, 100.0)) < 3 * est.stderr

    def test_correction_scaling(self):
        v = 3.0
        corr = [homodyne_expected_variance(v, b) - v for b in (1e2, 1e3, 1e4)]
        half = homodyne_expected_variance(v, 50.0) - v
        assert half / corr[0] == pytest.approx(4.0, rel=1e-9)
        assert corr[0] / corr[1] == pytest.approx(100.0, rel=1e-9)
        assert corr[2] < 1e-7

    def test_preconditions(self):
        with pytest.raises(ValueError):
            homodyne_gaussian_check(1.0, 10.0, 100, 0)
        with pytest.raises(ValueError):
            homodyne_gaussian_check(0.5, 1e3, 100, 0)


class TestEstimateChannel:
    def _eta_se(self, v, eta, m):
        c = math.sqrt(eta * (v * v - 1))
        vb = eta * v + 1 - eta
        return 2 * c * math.sqrt((v * vb + c * c) / m) / (v * v - 1)

    @pytest.mark.parametrize("eta", [1.0, 0.25])
    def test_recovers_eta(self, eta):
        g = 2.0
        v = 2 * g - 1
        n = 100_000
        px, pp = revealed_pairs(epr_covariance(g, eta), n, 31)
        est = estimate_channel(px, pp, source_variance=v)
        assert abs(est.eta - eta) < 3 * self._eta_se(v, eta, n)
        eta_hat, cm_hat = est
        assert isinstance(cm_hat, TwoModeCovariance) and eta_hat == est.eta

    def test_uncorrelated(self):
        px, pp = revealed_pairs(TwoModeCovariance.from_blocks(2, 2, 1.5, 1.5, 0, 0), 20_000, 32)
        est = estimate_channel(px, pp)
        assert abs(est.cov) < 4 * est.se_cov
        assert est.eta < 1e-3

    def test_floor(self):
        px, pp = revealed_pairs(epr_covariance(2.0), 98, 33)
        with pytest.raises(InsufficientDataError):
            estimate_channel(px, pp)

    def test_local_summaries_used(self):
        px, pp = revealed_pairs(epr_covariance(2.0), 1000, 34)
        est = estimate_channel(px, pp, local_a=(3.1, 10**6), local_b=(2.9, 10**6))
        assert (est.var_a, est.var_b) == (3.1, 2.9)
        assert est.cm.matrix[0, 2] == pytest.approx(est.rho * math.sqrt(3.1 * 2.9))


class TestRunProtocol:
    def test_identity_aborts(self):
        tr = run_protocol(ProtocolConfig(TwoModeCovariance(np.eye(4)), 100_000, 0.5, 41))
        assert not tr.accepted
        assert tr.messages[-1].type is MessageType.ABORT
        assert abs(tr.estimated_cm.matrix[0, 2]) < 0.02

    def test_tmsv_accepts_with_consistent_key(self):
        cfg = ProtocolConfig(epr_covariance(2.0), 100_000, 0.1, 42)
        tr = run_protocol(cfg)
        d = tr.decision
        assert tr.accepted and tr.messages[-1].type is MessageType.ACCEPT
        assert abs(d["key_rate"] - 1.585 * cfg.beta_rec) < 3 * d["key_rate_stderr"]

    def test_message_order_and_types(self):
        tr = run_protocol(ProtocolConfig(epr_covariance(2.0), 2000, 0.5, 43))
        got = [(m.sender, m.type.value) for m in tr.messages]
        assert got[:-1] == EXPECTED_ORDER
        assert got[-1] in (("alice", "accept"), ("alice", "abort"))
        assert all(isinstance(m.type, MessageType) for m in tr.messages)

    def test_sifted_count_binomial(self):
        for n, seed in ((1000, 1), (10_000, 2), (100_000, 3)):
            tr = run_protocol(ProtocolConfig(epr_covariance(2.0), n, 0.5, seed))
            assert abs(tr.sifted_count - n / 2) < 5 * math.sqrt(n / 4)

    def test_byte_identical_and_scheduler_independent(self):
        cfg = ProtocolConfig(vacuum_source_cm(), 20_000, 0.5, 44)
        a = run_protocol(cfg).dumps()
        b = run_protocol(cfg).dumps()
        c = run_protocol(cfg, scheduler="threaded").dumps()
        assert a == b == c
        assert run_protocol(dataclasses.replace(cfg, seed=45)).dumps() != a

    def test_json_schema(self):
        tr = run_protocol(ProtocolConfig(epr_covariance(2.0), 1000, 0.5, 46))
        doc = json.loads(tr.dumps())
        assert {"version", "config", "messages", "decision"} <= set(doc)
        assert doc["config"]["seed"] == 46 and len(doc["messages"]) == 7

    def test_audit(self):
        tr = run_protocol(ProtocolConfig(epr_covariance(2.0), 5000, 0.5, 47))
        assert audit_transcript(tr)
        forged = dataclasses.replace(tr, decision=dict(tr.decision, accepted=not tr.accepted))
        assert not audit_transcript(forged)
        extra = dataclasses.replace(tr, messages=tr.messages + [Message("bob", "raw-data", {})])
        assert not audit_transcript(extra)

    def test_estimator_consistency_slope(self):
        cm = vacuum_source_cm()
        ns = [1000, 10_000, 100_000]
        errs = []
        for n in ns:
            e = [np.abs(run_protocol(ProtocolConfig(cm, n, 0.5, 1000 + r)).estimated_cm.matrix - cm.matrix).max()
                 for r in range(8)]
            errs.append(np.mean(e))
        slope = np.polyfit(np.log10(ns), np.log10(errs), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.15)

    def test_accepted_key_within_three_standard_errors(self):
        for g, eta, seed in ((2.0, 0.3, 51), (5.0, 1.0, 52), (1.5, 0.5, 53)):
            tr = run_protocol(ProtocolConfig(epr_covariance(g, eta), 100_000, 0.5, seed))
            truth = key_rate(epr_covariance(g, eta), lenient=True).key_rate
            assert tr.accepted
            assert abs(tr.decision["key_rate"] - truth) < 3 * tr.decision["key_rate_stderr"]

    def test_config_validation(self):
        cm = epr_covariance(2.0)
        for kw in (dict(n_windows=99), dict(reveal_fraction=1.0), dict(beta_rec=0.0), dict(seed=-1)):
            base = dict(cm=cm, n_windows=1000, reveal_fraction=0.5, seed=1) | kw
            with pytest.raises(ValueError):
                ProtocolConfig(**base)

    def test_small_run_reports_insufficient_data(self):
        tr = run_protocol(ProtocolConfig(epr_covariance(2.0), 150, 0.05, 48))
        assert not tr.accepted and "at least" in tr.decision["reason"]
        assert tr.estimated_cm is None

    def test_unknown_scheduler(self):
        with pytest.raises(ValueError):
            run_protocol(ProtocolConfig(epr_covariance(2.0), 1000, 0.5, 1), scheduler="async")
