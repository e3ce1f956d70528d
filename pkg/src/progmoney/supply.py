"""Money-supply controllers instructing the central bank each period.

Three rule variants:

  FIXED_CAP_GEOMETRIC  — issuance floor(r0 / 2^floor(t/H)) per period, which
                         halves every H periods and caps cumulative mint at
                         2*r0*H.
  CONSTANT_GROWTH      — mint floor(S_t * k / periods_per_year) per period;
                         negative k burns from the central bank's treasury,
                         clamped at its holdings.
  VOLUME_RESPONSIVE    — constant growth with the effective yearly rate
                         k_t = k0 + alpha * (V_t - v_star) / v_star, where
                         V_t is the transfer volume of the last window.

Controllers are pure functions of (rule, period, stats); `run_supply` drives
a registry so every directive lands as a ledger MINT/BURN record.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from . import money, policy as pol
from .crypto import KeyPair
from .registry import Registry, SupplyStats, UnauthorizedIssuer


class AllowanceExceeded(ValueError):
    pass


@dataclass(frozen=True)
class FixedCapGeometric:
    issuance_start: int  # minor units minted in period 0 (r0 > 0)
    halving_periods: int  # H > 0

    def __post_init__(self) -> None:
        if self.issuance_start <= 0 or self.halving_periods <= 0:
            raise ValueError("issuance_start and halving_periods must be positive")


@dataclass(frozen=True)
class ConstantGrowth:
    rate_per_year: Fraction  # k >= -1

    def __post_init__(self) -> None:
        if self.rate_per_year < -1:
            raise ValueError("rate_per_year must be >= -1")


@dataclass(frozen=True)
class VolumeResponsive:
    base_rate: Fraction  # k0
    sensitivity: Fraction  # alpha
    target_volume: int  # v_star > 0, minor units per window

    def __post_init__(self) -> None:
        if self.target_volume <= 0:
            raise ValueError("target_volume must be positive")


SupplyRule = Union[FixedCapGeometric, ConstantGrowth, VolumeResponsive]


@dataclass(frozen=True)
class SupplyDirective:
    at: int
    mint: int = 0
    burn: int = 0

    def __post_init__(self) -> None:
        if self.mint < 0 or self.burn < 0 or (self.mint > 0 and self.burn > 0):
            raise ValueError("directive must mint or burn, never both")


def _growth_directive(
    supply: int, rate: Fraction, periods_per_year: int, treasury: int, at: int
) -> SupplyDirective:
    scaled = rate / periods_per_year
    delta = (supply * scaled.numerator) // scaled.denominator
    if delta >= 0:
        return SupplyDirective(at=at, mint=delta)
    return SupplyDirective(at=at, burn=min(-delta, treasury))


def issuance(
    rule: SupplyRule,
    period: int,
    stats: SupplyStats,
    periods_per_year: int = 1,
    treasury: int = 0,
    at: int = 0,
) -> SupplyDirective:
    """The directive for `period` given the registry's latest statistics."""
    if period < 0:
        raise ValueError("period must be >= 0")
    if isinstance(rule, FixedCapGeometric):
        mint = rule.issuance_start >> (period // rule.halving_periods)
        return SupplyDirective(at=at, mint=mint)
    if isinstance(rule, ConstantGrowth):
        return _growth_directive(
            stats.live_supply, rule.rate_per_year, periods_per_year, treasury, at
        )
    deviation = Fraction(stats.tx_volume - rule.target_volume, rule.target_volume)
    effective = rule.base_rate + rule.sensitivity * deviation
    return _growth_directive(stats.live_supply, effective, periods_per_year, treasury, at)


@dataclass(frozen=True)
class TrajectoryPoint:
    period: int
    supply: int
    mint: int
    burn: int
    tx_volume: int

    def line(self) -> str:
        return f"{self.period}|{self.supply}|{self.mint}|{self.burn}|{self.tx_volume}"


def render_trajectory(points: list[TrajectoryPoint]) -> str:
    return "\n".join(p.line() for p in points)


@dataclass
class Treasury:
    """The central bank's own holdings, consumed youngest-first on burns."""

    bank: KeyPair
    units: list[money.MoneyUnit] = field(default_factory=list)

    def total(self) -> int:
        return sum(u.value for u in self.units if u.state is money.UnitState.ACTIVE)

    def add(self, unit: money.MoneyUnit) -> None:
        self.units.append(unit)

    def burn(self, amount: int, registry: Registry, at: int, reason: str) -> int:
        """Burn up to `amount`, splitting the last unit for exact change."""
        burned = 0
        while burned < amount:
            live = [u for u in self.units if u.state is money.UnitState.ACTIVE]
            if not live:
                break
            unit = live[-1]
            need = amount - burned
            if unit.value > need:
                carved, rest = money.split(unit, need, registry, at)
                self.units.remove(unit)
                self.units.append(rest)
                unit = carved
            else:
                self.units.remove(unit)
            value = unit.value
            money.zeroise(unit, reason, registry, at)
            burned += value
        return burned


def apply_directive(
    directive: SupplyDirective,
    treasury: Treasury,
    registry: Registry,
    currency: str,
    default_policy: pol.CheckedPolicy,
) -> tuple[int, int]:
    """Execute a directive against the ledger; returns (minted, burned)."""
    minted = burned = 0
    if directive.mint > 0:
        try:
            unit = money.mint(
                treasury.bank,
                directive.mint,
                currency,
                default_policy,
                registry,
                at=directive.at,
            )
        except UnauthorizedIssuer as exc:
            raise AllowanceExceeded(str(exc)) from exc
        treasury.add(unit)
        minted = directive.mint
    elif directive.burn > 0:
        burned = treasury.burn(directive.burn, registry, directive.at, reason="supply")
    return minted, burned


def run_supply(
    rule: SupplyRule,
    periods: int,
    registry: Registry,
    bank: KeyPair,
    initial_supply: int = 0,
    periods_per_year: int = 1,
    period_ticks: int = 1,
    currency: str = "SIM",
    default_policy: Optional[pol.CheckedPolicy] = None,
) -> list[TrajectoryPoint]:
    """Drive `rule` for `periods` periods on a fresh treasury."""
    default_policy = default_policy or pol.EMPTY_POLICY
    treasury = Treasury(bank)
    if initial_supply > 0:
        try:
            seed_unit = money.mint(
                bank, initial_supply, currency, default_policy, registry, at=0
            )
        except UnauthorizedIssuer as exc:
            raise AllowanceExceeded(str(exc)) from exc
        treasury.add(seed_unit)
    trajectory: list[TrajectoryPoint] = []
    for period in range(periods):
        at = (period + 1) * period_ticks
        window = (period * period_ticks + 1, at) if period else (0, at)
        registry.now = max(registry.now, at)
        stats = registry.supply_stats(window)
        directive = issuance(
            rule,
            period,
            stats,
            periods_per_year=periods_per_year,
            treasury=treasury.total(),
            at=at,
        )
        minted, burned = apply_directive(
            directive, treasury, registry, currency, default_policy
        )
        trajectory.append(
            TrajectoryPoint(
                period=period,
                supply=registry.live_supply,
                mint=minted,
                burn=burned,
                tx_volume=stats.tx_volume,
            )
        )
    return trajectory
