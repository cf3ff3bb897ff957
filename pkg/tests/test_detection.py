"""The four assessment methods and the arbitration ordering."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbmengine.detection import (
    AnomalyEvent,
    AssetSnapshot,
    ChannelSnapshot,
    InsufficientPoints,
    LimitRule,
    PatternPredicate,
    PatternRule,
    RuleSet,
    Severity,
    StatisticalConfig,
    anomaly_sort_key,
    check_limits,
    evaluate,
    match_pattern,
    statistical_check,
    trend_analysis,
)
from cbmengine.ingest import Health
from cbmengine.reliability import PFInterval, WeibullModel
from cbmengine.units import hours_to_ms


def upper_rule(upper=10.0, severity=Severity.WARNING):
    return LimitRule(
        asset="A1", channel_kind="point-temperature", upper=upper, severity_on_breach=severity
    )


class TestTrendAnalysis:
    def test_exact_line_and_crossing(self):
        model = trend_analysis([(0, 1), (1, 2), (2, 3)], upper_rule(10.0))
        assert model.slope == pytest.approx(1.0, abs=1e-12)
        assert model.intercept == pytest.approx(1.0, abs=1e-12)
        assert model.predicted_crossing == pytest.approx(9.0, abs=1e-12)
        assert model.n_points == 3

    def test_two_points_insufficient(self):
        with pytest.raises(InsufficientPoints):
            trend_analysis([(0, 1), (1, 2)], upper_rule())

    def test_flat_series_has_no_crossing(self):
        model = trend_analysis([(0, 5), (1, 5), (2, 5)], upper_rule(10.0))
        assert model.slope == 0.0
        assert model.predicted_crossing is None

    def test_slope_away_from_bound_has_no_crossing(self):
        model = trend_analysis([(0, 5), (1, 4), (2, 3)], upper_rule(10.0))
        assert model.predicted_crossing is None

    def test_negative_slope_crosses_lower_bound(self):
        rule = LimitRule(asset="A1", channel_kind="point-temperature", lower=0.0)
        model = trend_analysis([(0, 6), (1, 4), (2, 2)], rule)
        assert model.predicted_crossing == pytest.approx(3.0, abs=1e-12)

    @given(
        st.integers(3, 100),
        st.floats(-100, 100),
        st.floats(-5, 5),
        st.floats(0.1, 10),
    )
    @settings(max_examples=300)
    def test_agrees_with_polyfit_oracle(self, n, intercept, slope, spread):
        rng = np.random.default_rng(n * 7919 + 13)
        xs = np.sort(rng.uniform(0, 100, n))
        while len(np.unique(xs)) < 2:
            xs = np.sort(rng.uniform(0, 100, n))
        ys = intercept + slope * xs + rng.normal(0, spread, n)
        model = trend_analysis(list(zip(xs, ys)), upper_rule(1e9))
        oracle_slope, oracle_intercept = np.polyfit(xs, ys, 1)
        assert model.slope == pytest.approx(oracle_slope, rel=1e-9, abs=1e-9)
        assert model.intercept == pytest.approx(oracle_intercept, rel=1e-9, abs=1e-9)


class TestCheckLimits:
    def test_breach_above(self):
        event = check_limits(80.0, upper_rule(75.0), now=5, asset="A1", channel="temp")
        assert event is not None and event.method == "limit"

    def test_boundary_is_inclusive_pass(self):
        assert check_limits(75.0, upper_rule(75.0), now=5) is None

    def test_inside_range_passes(self):
        rule = LimitRule(asset="A1", channel_kind="point-temperature", lower=0.0, upper=75.0)
        assert check_limits(10.0, rule, now=5) is None

    def test_breach_below(self):
        rule = LimitRule(asset="A1", channel_kind="point-temperature", lower=0.0, upper=75.0)
        event = check_limits(-1.0, rule, now=5)
        assert event is not None and "below" in event.evidence


class TestMatchPattern:
    def rule(self, gap_hours=1.0):
        return PatternRule(
            rule_id="overheat-then-vibe",
            trigger_sequence=(
                PatternPredicate("point-temperature", ">", 90.0),
                PatternPredicate("iso-velocity", ">", 5.0, max_gap_hours=gap_hours),
            ),
            conclusion="bearing distress after overheat",
            severity=Severity.CRITICAL,
        )

    def test_in_order_within_gap_matches(self):
        t = hours_to_ms(10.0)
        history = [
            (t, "point-temperature", 95.0),
            (t + hours_to_ms(0.5), "iso-velocity", 6.0),
        ]
        event = match_pattern(history, self.rule(), now=t + hours_to_ms(1.0), asset="A1")
        assert event is not None and event.method == "pattern"

    def test_gap_exceeded_no_match(self):
        t = hours_to_ms(10.0)
        history = [
            (t, "point-temperature", 95.0),
            (t + hours_to_ms(2.0), "iso-velocity", 6.0),
        ]
        assert match_pattern(history, self.rule(), now=t, asset="A1") is None

    def test_wrong_order_no_match(self):
        t = hours_to_ms(10.0)
        history = [
            (t, "iso-velocity", 6.0),
            (t + hours_to_ms(0.5), "point-temperature", 95.0),
        ]
        assert match_pattern(history, self.rule(), now=t, asset="A1") is None

    def test_backtracks_over_earlier_candidates(self):
        # The first temperature event is too old for the gap; the second works.
        t = hours_to_ms(10.0)
        history = [
            (t, "point-temperature", 95.0),
            (t + hours_to_ms(5.0), "point-temperature", 96.0),
            (t + hours_to_ms(5.5), "iso-velocity", 6.0),
        ]
        assert match_pattern(history, self.rule(), now=t, asset="A1") is not None


class TestStatisticalCheck:
    def test_memoryless_probability_above_threshold(self):
        event = statistical_check(
            37.0, WeibullModel(1.0, 100.0), 100.0, threshold=0.5, now=5, asset="A1"
        )
        assert event is not None
        assert "0.632" in event.evidence

    def test_high_threshold_suppresses(self):
        assert (
            statistical_check(37.0, WeibullModel(1.0, 100.0), 100.0, threshold=0.99)
            is None
        )

    def test_zero_interval_never_fires(self):
        assert (
            statistical_check(37.0, WeibullModel(1.0, 100.0), 0.0, threshold=0.1) is None
        )


def snapshot(channels, now=hours_to_ms(100.0), events=(), **kwargs):
    return AssetSnapshot(
        asset="A1", now=now, channels=tuple(channels), events=tuple(events), **kwargs
    )


def channel(points, channel_id="temp", kind="point-temperature", health=Health.HEALTHY):
    return ChannelSnapshot(
        channel_id=channel_id,
        sensor=f"A1.{channel_id}",
        kind=kind,
        health=health,
        points=tuple(points),
    )


class TestEvaluate:
    def rising_points(self, n=6, start_h=70.0, step_h=5.0, v0=70.0, dv=1.0):
        return [
            (hours_to_ms(start_h + i * step_h), v0 + i * dv) for i in range(n)
        ]

    def test_pure_function_of_snapshot(self):
        snap = snapshot(
            [channel(self.rising_points())],
            pf=PFInterval(120.0),
            inspection_interval_hours=60.0,
        )
        rules = RuleSet(limits=(upper_rule(80.0),))
        assert evaluate(snap, rules) == evaluate(snap, rules)

    def test_faulty_channel_excluded(self):
        snap = snapshot(
            [channel([(hours_to_ms(99.0), 1000.0)], health=Health.FAULTY)],
        )
        rules = RuleSet(limits=(upper_rule(80.0),))
        assert evaluate(snap, rules) == ()

    def test_severity_orders_first(self):
        a = AnomalyEvent("x1", "A1", "trend", Severity.WARNING, 100, 100 + 5)
        b = AnomalyEvent("x2", "A1", "trend", Severity.CRITICAL, 100, 100 + 20)
        assert sorted([a, b], key=anomaly_sort_key)[0] is b

    def test_earliest_predicted_failure_breaks_severity_tie(self):
        a = AnomalyEvent("x1", "A1", "trend", Severity.CRITICAL, 100, 100 + 7 * 24)
        b = AnomalyEvent("x2", "A1", "trend", Severity.CRITICAL, 100, 100 + 2 * 24)
        assert sorted([a, b], key=anomaly_sort_key)[0] is b

    def test_method_priority_breaks_remaining_ties(self):
        a = AnomalyEvent("x1", "A1", "pattern", Severity.CRITICAL, 100)
        b = AnomalyEvent("x2", "A1", "limit", Severity.CRITICAL, 100)
        c = AnomalyEvent("x3", "A1", "statistical", Severity.CRITICAL, 100)
        d = AnomalyEvent("x4", "A1", "trend", Severity.CRITICAL, 100)
        order = [e.method for e in sorted([a, b, c, d], key=anomaly_sort_key)]
        assert order == ["limit", "trend", "statistical", "pattern"]

    def test_absent_prediction_sorts_last(self):
        a = AnomalyEvent("x1", "A1", "trend", Severity.WARNING, 100, None)
        b = AnomalyEvent("x2", "A1", "trend", Severity.WARNING, 100, 10**12)
        assert sorted([a, b], key=anomaly_sort_key)[0] is b

    @given(st.data())
    @settings(max_examples=200)
    def test_ordering_total_and_antisymmetric(self, data):
        events = data.draw(
            st.lists(
                st.builds(
                    AnomalyEvent,
                    anomaly_id=st.text("abc123", min_size=1, max_size=6),
                    asset=st.just("A1"),
                    method=st.sampled_from(["trend", "limit", "pattern", "statistical"]),
                    severity=st.sampled_from(list(Severity)),
                    detected_at=st.just(100),
                    predicted_failure_at=st.one_of(
                        st.none(), st.integers(100, 10_000)
                    ),
                ),
                min_size=2,
                max_size=8,
            )
        )
        ordered = sorted(events, key=anomaly_sort_key)
        for i in range(len(ordered) - 1):
            ka, kb = anomaly_sort_key(ordered[i]), anomaly_sort_key(ordered[i + 1])
            assert ka <= kb
            if ka != kb:
                assert not kb < ka

    def test_all_four_methods_fire_together(self):
        pts = self.rising_points(n=6, v0=78.0, dv=1.0)  # latest 83 > 80
        events_log = [
            (hours_to_ms(95.0), "point-temperature", 95.0),
            (hours_to_ms(95.5), "iso-velocity", 6.0),
        ]
        rules = RuleSet(
            limits=(upper_rule(80.0),),
            patterns=(
                PatternRule(
                    rule_id="p1",
                    trigger_sequence=(
                        PatternPredicate("point-temperature", ">", 90.0),
                        PatternPredicate("iso-velocity", ">", 5.0, max_gap_hours=1.0),
                    ),
                    conclusion="sequence observed",
                ),
            ),
            statistical=StatisticalConfig(model=WeibullModel(1.0, 100.0), threshold=0.1),
        )
        snap = snapshot(
            [channel(pts)],
            events=events_log,
            age_hours=100.0,
            pf=PFInterval(120.0),
            inspection_interval_hours=60.0,
        )
        methods = {e.method for e in evaluate(snap, rules)}
        assert methods == {"limit", "trend", "statistical", "pattern"}

    def test_trend_prediction_respects_invariant(self):
        snap = snapshot(
            [channel(self.rising_points())],
            pf=PFInterval(120.0),
            inspection_interval_hours=60.0,
        )
        rules = RuleSet(limits=(upper_rule(90.0),))
        events = evaluate(snap, rules)
        trend_events = [e for e in events if e.method == "trend"]
        assert trend_events
        assert trend_events[0].predicted_failure_at >= trend_events[0].detected_at
