import numpy as np
import pytest

from deferral.profiles import (
    ActivityProfile,
    SlotScheme,
    TimestampRecord,
    build_profile,
    critical_rate,
    entropy,
    kl_divergence,
    total_variation,
    uniform_pmf,
)

HOUR = 3600.0


def hourly_scheme(n=24):
    return SlotScheme(n, 86400.0)


class TestSlotScheme:
    def test_slot_duration(self):
        assert SlotScheme.day(24).slot_duration == HOUR
        assert SlotScheme.week(7).slot_duration == 86400.0
        assert SlotScheme(10, 100.0).slot_duration == 10.0

    @pytest.mark.parametrize("n", [1, 0, -3, 2.5])
    def test_rejects_bad_slot_count(self, n):
        with pytest.raises(ValueError):
            SlotScheme(n, 86400.0)

    def test_rejects_bad_period(self):
        with pytest.raises(ValueError):
            SlotScheme(24, 0.0)
        with pytest.raises(ValueError):
            SlotScheme(24, -5.0)

    def test_boundary_belongs_to_earlier_slot(self):
        scheme = hourly_scheme()
        # slot i covers (i-1, i] in slot units
        assert scheme.slot_of(1.0) == 1
        assert scheme.slot_of(HOUR) == 1
        assert scheme.slot_of(HOUR + 1) == 2
        assert scheme.slot_of(0.0) == 24      # period boundary wraps to the last slot
        assert scheme.slot_of(86400.0) == 24
        assert scheme.slot_of(86401.0) == 1

    def test_wraps_across_periods(self):
        scheme = hourly_scheme()
        assert scheme.slot_of(3 * 86400.0 + 30 * 60) == 1
        assert scheme.slot_of(3 * 86400.0 + 13.5 * HOUR) == 14


class TestTimestampRecord:
    def test_rejects_negative_timestamp(self):
        with pytest.raises(ValueError):
            TimestampRecord("u", -1.0)

    def test_rejects_non_finite_timestamp(self):
        with pytest.raises(ValueError):
            TimestampRecord("u", float("nan"))


class TestActivityProfile:
    def test_validates_pmf(self):
        scheme = SlotScheme(4, 86400.0)
        with pytest.raises(ValueError, match="not a PMF"):
            ActivityProfile(scheme, [0.5, 0.5, 0.5, -0.5])
        with pytest.raises(ValueError, match="not a PMF"):
            ActivityProfile(scheme, [0.3, 0.3, 0.3, 0.3])
        with pytest.raises(ValueError):
            ActivityProfile(scheme, [0.5, 0.5])

    def test_rejects_negative_count(self):
        with pytest.raises(ValueError):
            ActivityProfile(SlotScheme(2, 10.0), [0.5, 0.5], count=-1)

    def test_roundtrip(self, tmp_path):
        prof = ActivityProfile(hourly_scheme(4), [0.1, 0.2, 0.3, 0.4], count=10)
        again = ActivityProfile.from_dict(prof.to_dict())
        assert np.array_equal(prof.q, again.q)
        assert again.scheme == prof.scheme
        path = tmp_path / "p.json"
        prof.save(path)
        assert np.array_equal(ActivityProfile.load(path).q, prof.q)


class TestBuildProfile:
    def test_hourly_records_give_uniform(self):
        scheme = hourly_scheme()
        records = [TimestampRecord("u", h * HOUR + 60) for h in range(24)]
        prof = build_profile(records, scheme)
        assert np.allclose(prof.q, uniform_pmf(24))
        assert prof.count == 24

    def test_degenerate_mass(self):
        scheme = hourly_scheme()
        records = [TimestampRecord("u", 2 * HOUR + 300)] * 4  # within slot 3
        prof = build_profile(records, scheme)
        expected = np.zeros(24)
        expected[2] = 1.0
        assert np.array_equal(prof.q, expected)
        assert prof.count == 4

    def test_hand_binned_example(self):
        # 00:30, 00:45, 13:10, 13:20, 13:40, 22:05
        minutes = [30, 45, 13 * 60 + 10, 13 * 60 + 20, 13 * 60 + 40, 22 * 60 + 5]
        records = [TimestampRecord("u", m * 60.0) for m in minutes]
        prof = build_profile(records, hourly_scheme())
        expected = np.zeros(24)
        expected[0] = 2 / 6
        expected[13] = 3 / 6
        expected[22] = 1 / 6
        assert np.allclose(prof.q, expected)
        assert prof.count == 6

    def test_empty_records(self):
        with pytest.raises(ValueError, match="no data"):
            build_profile([], hourly_scheme())

    def test_mixed_users(self):
        records = [TimestampRecord("a", 0.0), TimestampRecord("b", 60.0)]
        with pytest.raises(ValueError, match="heterogeneous input"):
            build_profile(records, hourly_scheme())

    def test_order_invariance(self):
        rng = np.random.default_rng(3)
        scheme = hourly_scheme()
        stamps = rng.uniform(0, 86400 * 7, size=200)
        records = [TimestampRecord("u", t) for t in stamps]
        prof = build_profile(records, scheme)
        shuffled = [records[i] for i in rng.permutation(len(records))]
        assert np.array_equal(build_profile(shuffled, scheme).q, prof.q)


class TestEntropy:
    def test_uniform_24(self):
        assert entropy(uniform_pmf(24)) == pytest.approx(np.log2(24), abs=1e-12)
        assert round(entropy(uniform_pmf(24)), 4) == 4.5850

    def test_deterministic_distribution(self):
        p = np.zeros(8)
        p[0] = 1.0
        assert entropy(p) == 0.0

    def test_direct_evaluation(self):
        assert entropy([0.5, 0.25, 0.25]) == pytest.approx(1.5, abs=1e-12)

    def test_rejects_non_pmf(self):
        with pytest.raises(ValueError, match="not a PMF"):
            entropy([0.4, 0.4])

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError, match="not a PMF"):
            entropy([0.5, bad, 0.5])


class TestKLDivergence:
    def test_identity_is_zero(self):
        p = np.array([0.2, 0.5, 0.3])
        assert kl_divergence(p, p) == 0.0

    def test_uniform_reference_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            t = rng.dirichlet(np.ones(24))
            assert kl_divergence(t, uniform_pmf(24)) == pytest.approx(
                np.log2(24) - entropy(t), abs=1e-9
            )

    def test_half_support_against_uniform(self):
        assert kl_divergence([0.5, 0.5, 0, 0], uniform_pmf(4)) == pytest.approx(1.0, abs=1e-12)

    def test_support_violation(self):
        with pytest.raises(ValueError, match="divergence infinite"):
            kl_divergence([0.5, 0.5], [1.0, 0.0])

    def test_alphabet_mismatch(self):
        with pytest.raises(ValueError, match="alphabet mismatch"):
            kl_divergence([0.5, 0.5], [0.25, 0.25, 0.25, 0.25])


class TestTotalVariation:
    def test_equal(self):
        p = [0.3, 0.7]
        assert total_variation(p, p) == 0.0

    def test_disjoint_supports(self):
        assert total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_direct_evaluation(self):
        assert total_variation(uniform_pmf(4), [0.5, 0.5, 0, 0]) == pytest.approx(0.5, abs=1e-12)

    def test_alphabet_mismatch(self):
        with pytest.raises(ValueError, match="alphabet mismatch"):
            total_variation([0.5, 0.5], uniform_pmf(3))


class TestCriticalRate:
    def test_uniform_profile(self):
        prof = ActivityProfile(hourly_scheme(6), uniform_pmf(6))
        assert critical_rate(prof) == 0.0

    def test_point_mass(self):
        prof = ActivityProfile(hourly_scheme(4), [1.0, 0, 0, 0])
        assert critical_rate(prof) == pytest.approx(0.75, abs=1e-12)

    def test_three_slot_example(self):
        prof = ActivityProfile(hourly_scheme(3), [0.5, 0.3, 0.2])
        assert critical_rate(prof) == pytest.approx(1 / 6, abs=1e-12)


class TestProperties:
    def test_entropy_maximized_only_at_uniform(self):
        rng = np.random.default_rng(99)
        top = np.log2(24)
        for _ in range(1000):
            p = rng.dirichlet(np.ones(24))
            h = entropy(p)
            assert h <= top + 1e-9
            if h >= top - 1e-9:
                assert np.abs(p - 1 / 24).max() < 1e-9

    def test_critical_rate_zero_iff_uniform(self):
        scheme = hourly_scheme()
        u = uniform_pmf(24)
        assert critical_rate(ActivityProfile(scheme, u)) < 1e-12
        bumped = u.copy()
        bumped[0] += 1e-6
        bumped[1] -= 1e-6
        prof = ActivityProfile(scheme, bumped)
        assert critical_rate(prof) > 0
        assert np.abs(prof.q - 1 / 24).max() > 1e-9
