"""Supply controllers: fixed cap, constant growth, volume response."""

import random
from fractions import Fraction

import pytest

from progmoney.crypto import KeyDirectory
from progmoney.registry import Registry, SupplyStats
from progmoney.supply import (
    AllowanceExceeded,
    ConstantGrowth,
    FixedCapGeometric,
    SupplyDirective,
    VolumeResponsive,
    issuance,
    render_trajectory,
    run_supply,
)


def stats(live=0, volume=0):
    return SupplyStats(live_supply=live, minted=0, burned=0, tx_count=0, tx_volume=volume)


def fresh_registry(allowance=10**12):
    rng = random.Random(8)
    directory = KeyDirectory()
    registry = Registry(directory, "registry", rng=rng)
    bank = directory.create("central", rng)
    registry.authorize_issuer("central", allowance)
    return registry, bank


class TestIssuance:
    def test_fixed_cap_brute_force_bound(self):
        # oracle: direct summation of floor(r0 / 2^(t//H)) over 200 periods
        rule = FixedCapGeometric(50, 10)
        total = 0
        previous = None
        for t in range(200):
            directive = issuance(rule, t, stats())
            assert directive.burn == 0
            if previous is not None:
                assert directive.mint <= previous  # monotone non-increasing
            previous = directive.mint
            oracle = 50 // (2 ** (t // 10))
            assert directive.mint == oracle
            total += directive.mint
        assert total == 970
        assert total <= 2 * 50 * 10

    def test_constant_growth_definition(self):
        directive = issuance(ConstantGrowth(Fraction(2, 100)), 0, stats(live=1_000_000))
        assert directive.mint == 20_000
        assert directive.burn == 0

    def test_constant_growth_sub_year_periods(self):
        directive = issuance(
            ConstantGrowth(Fraction(2, 100)), 0, stats(live=1_000_000), periods_per_year=4
        )
        assert directive.mint == 5_000

    def test_volume_responsive_at_target_equals_base(self):
        rule = VolumeResponsive(Fraction(2, 100), Fraction(1, 2), 1000)
        directive = issuance(rule, 0, stats(live=1_000_000, volume=1000))
        base = issuance(ConstantGrowth(Fraction(2, 100)), 0, stats(live=1_000_000))
        assert directive.mint == base.mint

    def test_volume_responsive_reacts(self):
        rule = VolumeResponsive(Fraction(2, 100), Fraction(1, 2), 1000)
        hot = issuance(rule, 0, stats(live=1_000_000, volume=2000))
        cold = issuance(rule, 0, stats(live=1_000_000, volume=0))
        assert hot.mint > 20_000
        assert cold.burn > 0 or cold.mint < 20_000

    def test_deflation_clamped_to_treasury(self):
        rule = ConstantGrowth(Fraction(-1, 100))
        directive = issuance(rule, 0, stats(live=1_000_000), treasury=200)
        assert directive.burn == 200
        assert directive.mint == 0

    def test_directive_never_both(self):
        with pytest.raises(ValueError):
            SupplyDirective(at=0, mint=5, burn=5)

    def test_rule_invariants(self):
        with pytest.raises(ValueError):
            FixedCapGeometric(0, 10)
        with pytest.raises(ValueError):
            ConstantGrowth(Fraction(-2, 1))
        with pytest.raises(ValueError):
            VolumeResponsive(Fraction(1, 100), Fraction(1, 2), 0)


class TestRunSupply:
    def test_zero_rate_flat(self):
        registry, bank = fresh_registry()
        trajectory = run_supply(
            ConstantGrowth(Fraction(0)), 5, registry, bank, initial_supply=1_000
        )
        assert [p.supply for p in trajectory] == [1_000] * 5
        assert registry.audit() == []

    def test_two_percent_ten_years_close_to_compound(self):
        # closed form computed exactly with Fraction arithmetic
        registry, bank = fresh_registry()
        trajectory = run_supply(
            ConstantGrowth(Fraction(2, 100)), 10, registry, bank, initial_supply=1_000_000
        )
        exact = Fraction(1_000_000) * Fraction(51, 50) ** 10
        drift = exact - trajectory[-1].supply
        assert 0 <= drift <= 10  # cumulative flooring, one unit per period max
        assert trajectory[-1].supply == 1_218_991

    def test_growth_within_t_units_every_period(self):
        registry, bank = fresh_registry()
        trajectory = run_supply(
            ConstantGrowth(Fraction(2, 100)), 10, registry, bank, initial_supply=1_000_000
        )
        for t, point in enumerate(trajectory, start=1):
            exact = Fraction(1_000_000) * Fraction(51, 50) ** t
            assert 0 <= exact - point.supply <= t

    def test_deflation_halves_supply(self):
        registry, bank = fresh_registry()
        trajectory = run_supply(
            ConstantGrowth(Fraction(-1, 2)), 3, registry, bank, initial_supply=100
        )
        assert [p.supply for p in trajectory] == [50, 25, 12]
        assert [p.burn for p in trajectory] == [50, 25, 13]
        assert registry.total_burned == 88
        assert registry.audit() == []

    def test_full_deflation_burns_everything_then_stops(self):
        registry, bank = fresh_registry()
        trajectory = run_supply(
            ConstantGrowth(Fraction(-1)), 3, registry, bank, initial_supply=100
        )
        assert [p.supply for p in trajectory] == [0, 0, 0]
        assert registry.total_burned == 100
        assert registry.live_supply == 0
        assert registry.audit() == []

    def test_directives_appear_in_ledger_one_to_one(self):
        registry, bank = fresh_registry()
        trajectory = run_supply(
            FixedCapGeometric(50, 2), 6, registry, bank, initial_supply=0
        )
        mints = [r for r in registry.records if r.kind.value == "MINT"]
        assert [r.amounts[0] for r in mints] == [p.mint for p in trajectory if p.mint]

    def test_allowance_exceeded(self):
        registry, bank = fresh_registry(allowance=10)
        with pytest.raises(AllowanceExceeded):
            run_supply(ConstantGrowth(Fraction(0)), 1, registry, bank, initial_supply=100)

    def test_trajectory_export_format(self):
        registry, bank = fresh_registry()
        trajectory = run_supply(
            FixedCapGeometric(4, 1), 3, registry, bank, initial_supply=0
        )
        text = render_trajectory(trajectory)
        assert text.splitlines() == ["0|4|4|0|0", "1|6|2|0|0", "2|7|1|0|0"]
