"""The standard policy pack: generators for the everyday money rules.

Each generator emits policy source text for one concern — sales tax,
legality, annual government contact, home-jurisdiction execution, owner
restrictions, spend-by deadlines, rate seeking.  Generators bake their
parameters into concrete literals so every emitted rule is a plain
field/literal comparison; sources compose by concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING

from .policy import compile_policy
from .registry import RecordKind
from .sim_types import LawStatus, LawTable, Role

if TYPE_CHECKING:
    from .sim import Simulation

TAX_AUTHORITY = "tax_authority"
GOVERNMENT = "government"


class BadRate(ValueError):
    pass


@dataclass
class ScenarioOutcome:
    """The assertable result of a scenario run."""

    balances: dict[str, int] = field(default_factory=dict)
    tax_collected: int = 0
    burns: list[tuple[str, int]] = field(default_factory=list)
    forbidden_count: int = 0

    def reconciles_with(self, registry) -> bool:
        live = sum(self.balances.values())
        burned = sum(amount for _, amount in self.burns)
        return (
            live == registry.live_supply
            and burned == registry.total_burned
            and registry.total_minted - registry.total_burned == registry.live_supply
        )


def outcome_of(sim: "Simulation") -> ScenarioOutcome:
    """Summarize a finished simulation for scenario-level assertions."""
    balances = {host_id: sim.balance_of(host_id) for host_id in sorted(sim.hosts)}
    tax_hosts = {h.id for h in sim.hosts.values() if h.role is Role.TAX_AUTHORITY}
    tax_collected = sum(
        rec.amounts[0]
        for rec in sim.registry.records
        if rec.kind is RecordKind.TRANSFER and rec.parties[1] in tax_hosts
    )
    burns = [
        (rec.reason or "unspecified", rec.amounts[0])
        for rec in sim.registry.records
        if rec.kind is RecordKind.BURN
    ]
    return ScenarioOutcome(
        balances=balances,
        tax_collected=tax_collected,
        burns=burns,
        forbidden_count=sim.forbidden_count,
    )


def sales_tax_policy(
    rate: Fraction, category: str = "sale", authority: str = TAX_AUTHORITY
) -> str:
    """Carve `rate` of every matching purchase out of the received amount."""
    if rate < 0 or rate > 1:
        raise BadRate(f"tax rate must be within [0, 1], got {rate}")
    return (
        f'OBLIGATION ON RECEIVE IF category == "{category}" '
        f'DO PAY {rate.numerator}/{rate.denominator} TO "{authority}";'
    )


def legality_policy(law: LawTable) -> str:
    """Prohibit categories the law flags illegal or unlicensed."""
    rules = []
    for category in sorted(law.categories()):
        status = law.status(category)
        if status is LawStatus.ILLEGAL:
            rules.append(
                f'PROHIBITION ON TRANSFER_REQUEST IF category == "{category}";'
            )
        elif status is LawStatus.LICENCE_REQUIRED:
            rules.append(
                f"PROHIBITION ON TRANSFER_REQUEST "
                f'IF category == "{category}" AND licence == NONE;'
            )
    return "\n".join(rules)


def annual_contact_policy(year_ticks: int, authority: str = GOVERNMENT) -> str:
    """Zeroise when the unit has not contacted its government for a year.

    `last_contact` evaluates as the age in ticks since the last CONTACT, so
    the yearly deadline is a concrete literal comparison.
    """
    if year_ticks <= 0:
        raise ValueError("year_ticks must be positive")
    return (
        f"OBLIGATION ON TICK IF last_contact > {year_ticks} "
        f'DO ZEROISE, NOTIFY "{authority}";'
    )


def jurisdiction_policy(home: str, authority: str = GOVERNMENT) -> str:
    """Zeroise on foreign soil or when the location proof is withheld."""
    return "\n".join(
        [
            f'OBLIGATION ON TICK IF location != "{home}" '
            f'DO ZEROISE, NOTIFY "{authority}";',
            f'OBLIGATION ON ATTEST_FAIL DO ZEROISE, NOTIFY "{authority}";',
        ]
    )


def owner_restriction_policy(banned_categories: list[str]) -> str:
    """Refuse transfers in the owner's banned categories; travels with the unit."""
    if not banned_categories:
        raise ValueError("banned_categories must be nonempty")
    return "\n".join(
        f'PROHIBITION ON TRANSFER_REQUEST IF category == "{category}";'
        for category in banned_categories
    )


def expiry_policy(deadline: int) -> str:
    """Forbid transfers after `deadline` (inclusive) and zeroise past it."""
    if deadline <= 0:
        raise ValueError("deadline must be positive")
    return "\n".join(
        [
            f"PROHIBITION ON TRANSFER_REQUEST IF now > {deadline};",
            f"OBLIGATION ON TICK IF now > {deadline} DO ZEROISE;",
        ]
    )


def rate_seeking_policy() -> str:
    """Delegate deposit placement to the unit itself."""
    return "OBLIGATION ON TICK DO MOVE_TO_BEST_RATE;"


def tamper_notify_policy(authority: str = GOVERNMENT) -> str:
    """Report tampering and withheld attestations to the authority."""
    return "\n".join(
        [
            f'OBLIGATION ON TAMPER DO NOTIFY "{authority}";',
        ]
    )


def compose(*sources: str) -> str:
    """Concatenate policy sources (skipping empties) into one program."""
    return "\n".join(s for s in sources if s)


def validate_pack() -> None:
    """Compile every generator's output once; raises on any regression."""
    law = LawTable()
    law.add("cake", LawStatus.LEGAL, Fraction(1, 5))
    law.add("weapons", LawStatus.LICENCE_REQUIRED, Fraction(1, 5))
    law.add("stolen_goods", LawStatus.ILLEGAL, Fraction(0, 1))
    for source in (
        sales_tax_policy(Fraction(1, 5)),
        legality_policy(law),
        annual_contact_policy(360),
        jurisdiction_policy("HOME"),
        owner_restriction_policy(["arms"]),
        expiry_policy(360),
        rate_seeking_policy(),
        tamper_notify_policy(),
    ):
        compile_policy(source)
