import math

import jsonschema
import numpy as np
import pytest
import scipy.stats

from orthoselect import RngStream, sample_unit_vectors
from orthoselect import analytic as an
from orthoselect import harness as hn
from orthoselect.errors import InvalidInput


def test_normal_quantile_against_library():
    for q in (0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999):
        assert hn._normal_quantile(q) == pytest.approx(
            float(scipy.stats.norm.ppf(q)), abs=1e-8
        )


def test_wilson_interval_reference_value():
    lo, hi = hn.wilson_interval(8, 10)
    # classical Wilson endpoints for 8/10 at z = 1.96
    assert lo == pytest.approx(0.49002, abs=5e-4)
    assert hi == pytest.approx(0.94331, abs=5e-4)
    assert hn.wilson_interval(0, 50)[0] == 0.0
    assert hn.wilson_interval(50, 50)[1] == 1.0
    with pytest.raises(InvalidInput):
        hn.wilson_interval(5, 0)


def test_ks_distance_handmade():
    # largest gap is below the first sample: |0 - F(0.25)| = 0.25
    samples = np.array([0.25, 0.5, 0.75])
    assert hn.ks_distance(samples, lambda z: z) == pytest.approx(0.25, abs=1e-12)
    shifted = np.array([1.0 / 6.0, 0.5, 5.0 / 6.0])
    assert hn.ks_distance(shifted, lambda z: z) == pytest.approx(1.0 / 6.0, abs=1e-12)


def test_mechanical_verdict_rules():
    v = hn.mechanical_verdict
    assert v(0.1, "at_most", 0.2, 0.4) == "violated"
    assert v(0.3, "at_most", 0.2, 0.4) == "supported"
    assert v(0.9, "at_least", 0.2, 0.4) == "violated"
    assert v(0.3, "at_least", 0.2, 0.4) == "supported"
    assert v(1.0, "at_most", 0.2, 0.4, vacuous=True) == "untestable-at-scale"
    assert v(0.5, "at_most", 0.2, 0.4, hypotheses_ok=False) == "untestable-at-scale"


def test_report_cell_validation():
    with pytest.raises(InvalidInput):
        hn.ReportCell("x", observed=1.5, claim=0.5, direction="at_most", verdict="supported")
    with pytest.raises(InvalidInput):
        hn.ReportCell("x", observed=0.5, claim=0.5, direction="sideways", verdict="supported")


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("CRI_THREADS", raising=False)
    assert hn.resolve_threads(None) == 1
    monkeypatch.setenv("CRI_THREADS", "4")
    assert hn.resolve_threads(None) == 4
    monkeypatch.setenv("CRI_THREADS", "0")
    assert hn.resolve_threads(None) >= 1
    assert hn.resolve_threads(2) == 2
    monkeypatch.setenv("CRI_THREADS", "zebra")
    with pytest.raises(InvalidInput):
        hn.resolve_threads(None)


def test_order_stat_audit_small():
    rep = hn.run_order_stat_audit(3, 20, 5, 2000, seed=101)
    assert rep.cells[0].verdict == "supported"
    assert rep.extras["ks"] <= 0.03
    assert len(rep.records) == 2000
    with pytest.raises(InvalidInput):
        hn.run_order_stat_audit(3, 20, 5, 50, seed=1)


def test_order_stat_audit_max_statistic_follows_power_law():
    rep = hn.run_order_stat_audit(4, 9, 9, 2000, seed=102)
    assert rep.cells[0].verdict == "supported"  # KS vs G(z)^p via the same CDF


def test_order_stat_audit_deterministic():
    a = hn.run_order_stat_audit(3, 15, 4, 150, seed=7)
    b = hn.run_order_stat_audit(3, 15, 4, 150, seed=7)
    assert a.to_json_dict() == b.to_json_dict()
    assert [r.measures for r in a.records] == [r.measures for r in b.records]


def test_coherence_audit_reports_violation():
    rep = hn.run_coherence_audit(6, 50, 200, seed=11)
    cell = rep.cells[0]
    assert cell.verdict == "violated"
    assert cell.observed == 0.0
    assert cell.ci_low == 0.0 and cell.ci_high < 0.05
    assert rep.extras["median_coherence"] > 10 * cell.params["threshold"]
    # empirical coherence does concentrate near the sqrt(2 log p / n) scale
    assert rep.extras["freq_below_sqrt_2logp_over_n"] >= 0.3


def test_cap_hit_frequency_matches_cdf_complement():
    # frequency of |<X_1, X_2>| >= h for independent uniform columns is
    # 1 - G(h), the two-sided cap mass
    n, h, draws = 6, 0.5, 20_000
    left = sample_unit_vectors(n, draws, RngStream(500, 0))
    right = sample_unit_vectors(n, draws, RngStream(500, 1))
    freq = float(np.mean(np.abs(np.sum(left * right, axis=1)) >= h))
    prob = 1.0 - an.inner_cdf(h, n)
    assert abs(freq - prob) <= 3.0 * math.sqrt(prob * (1.0 - prob) / draws)


def test_norm_audit_supported_and_bounded():
    rep = hn.run_norm_audit(8, 64, 12, 0.5, 150, seed=21)
    cell = rep.cells[0]
    assert cell.verdict == "supported"
    assert cell.observed == 0.0
    assert all(h["satisfied"] for h in rep.hypotheses)
    assert "vacuous" in cell.notes
    for rec in rep.records:
        assert rec.satisfied["at_least_one"]
        assert rec.satisfied["below_frobenius"]


def test_norm_audit_hypothesis_gate():
    rep = hn.run_norm_audit(8, 64, 12, 0.5, 150, seed=21, c_kappa=1.0)  # 12 > 8
    assert rep.cells[0].verdict == "untestable-at-scale"


def test_decoupling_audit_trivial_thresholds():
    rep = hn.run_decoupling_audit(5, 12, 3.0, 2, [0.0, 50.0], 150, seed=31)
    for cell in rep.cells:
        assert cell.verdict == "supported"
    by_r = {(c.params["r"], c.label.startswith("P(|R_s")): c for c in rep.cells}
    zero_cell = by_r[(0.0, True)]
    assert zero_cell.params["freq_subset"] == 1.0
    assert zero_cell.observed == pytest.approx(1.0)  # 2*1 - 1
    huge_cell = by_r[(50.0, True)]
    assert huge_cell.params["freq_subset"] == 0.0
    assert huge_cell.observed == 0.0


def test_decoupling_audit_moderate_grid():
    rep = hn.run_decoupling_audit(6, 16, 4.0, 2, [0.3, 0.6], 400, seed=32)
    assert all(c.verdict == "supported" for c in rep.cells)
    assert rep.extras["bootstrap_resamples"] == hn.BOOTSTRAP_RESAMPLES


def test_decoupling_audit_threads_do_not_change_results():
    a = hn.run_decoupling_audit(6, 16, 4.0, 2, [0.4], 200, seed=33, threads=1)
    b = hn.run_decoupling_audit(6, 16, 4.0, 2, [0.4], 200, seed=33, threads=8)
    assert a.to_json_dict() == b.to_json_dict()


def test_theorem_audit_untestable_with_ledger():
    rep = hn.run_theorem_audit(4, 120, 2, 0.5, 0.5, 20, seed=41)
    cell = rep.cells[0]
    assert cell.verdict == "untestable-at-scale"
    assert any(not h["satisfied"] for h in rep.hypotheses)
    names = {h["constraint"] for h in rep.hypotheses}
    assert "n >= 6" in names
    assert rep.extras["claimed_probability"] is not None
    assert len(rep.records) == 20
    for rec in rep.records:
        cert = rec.measures["certificate"]
        assert cert is None or cert == cert  # not NaN; inf became None in JSON


def test_theorem_audit_deterministic():
    a = hn.run_theorem_audit(4, 120, 2, 0.5, 0.5, 20, seed=42)
    b = hn.run_theorem_audit(4, 120, 2, 0.5, 0.5, 20, seed=42)
    assert a.to_json_dict() == b.to_json_dict()


def test_theorem_audit_negative_claimed_probability_is_vacuous():
    # at (n=3, p=5) the claimed probability 1 - 5n/(p log^{n-1} p) - 9 p^-n
    # is negative, which alone forces untestable-at-scale
    rep = hn.run_theorem_audit(3, 5, 1, 0.5, 0.5, 20, seed=43, probe_count=10, kappa=2.0)
    assert rep.extras["claimed_probability"] < 0.0
    assert rep.cells[0].verdict == "untestable-at-scale"


def test_chernoff_audit_cells():
    rep = hn.run_chernoff_audit([0.05, 0.1, 0.3], [0.2, 0.5, 0.8], 2000, seed=51)
    assert all(c.verdict == "supported" for c in rep.cells)
    rare = [c for c in rep.cells if "rare event" in c.notes]
    assert rare, "expected at least one rare-event cell at this grid"
    for cell in rep.cells:
        assert cell.params["exact_tail"] <= cell.claim + 1e-15
    # bound decreasing in eps at fixed q
    for q in (0.05, 0.1, 0.3):
        claims = [c.claim for c in rep.cells if c.params["q"] == q]
        assert claims == sorted(claims, reverse=True)


def test_chernoff_audit_zero_mean_cell_is_untestable():
    rep = hn.run_chernoff_audit([0.0], [0.5], 150, seed=52)
    assert rep.cells[0].verdict == "untestable-at-scale"


def test_report_schema_validates_all_audits():
    reports = [
        hn.run_order_stat_audit(3, 15, 4, 150, seed=61),
        hn.run_coherence_audit(5, 20, 150, seed=62),
        hn.run_norm_audit(6, 32, 8, 0.5, 150, seed=63),
        hn.run_decoupling_audit(5, 12, 3.0, 2, [0.4], 150, seed=64),
        hn.run_theorem_audit(4, 100, 2, 0.5, 0.5, 20, seed=65),
        hn.run_chernoff_audit([0.1], [0.5], 150, seed=66),
    ]
    for rep in reports:
        jsonschema.validate(rep.to_json_dict(), hn.REPORT_SCHEMA)
        assert rep.confidence == hn.DEFAULT_CONFIDENCE
        for cell in rep.cells:
            assert cell.verdict in ("supported", "violated", "untestable-at-scale")
