"""Scenario files: line-oriented configuration plus a tick-stamped script.

Format (UTF-8, "#" comments):

    [sim]
    name = sales_tax
    until = 40
    year_ticks = 360
    period_ticks = 360
    latency = 1 1
    currency = SIM

    [hosts]
    alice = CONSUMER HOME
    arms_bank = BANK HOME category=arms_lender licence=none

    [law]
    cake = legal 1/5
    weapons = licence_required 1/5
    stolen_goods = illegal 0/1

    [supply]
    issuer = central
    allowance = 1000000000
    rule = CONSTANT_GROWTH 2/100

    [policies]
    retail = sales_tax 1/5 + legality

    [script]
    0 ISSUE central alice 1000 retail
    1 BUY alice bob 1000 cake

Script actions: MINT, ISSUE, BUY, CONTACT, MOVE_HOST, TAMPER, REPLAY,
RATE, ORDER, WITHHOLD, SPOOF.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import fiscal
from .sim import Simulation
from .sim_types import LawStatus, LawTable, Role
from .supply import ConstantGrowth, FixedCapGeometric, SupplyRule, VolumeResponsive

SCRIPT_ACTIONS = {
    "MINT",
    "ISSUE",
    "BUY",
    "CONTACT",
    "MOVE_HOST",
    "TAMPER",
    "REPLAY",
    "RATE",
    "ORDER",
    "WITHHOLD",
    "SPOOF",
}


class ScenarioError(ValueError):
    def __init__(self, message: str, line_no: Optional[int] = None) -> None:
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{message}")
        self.line_no = line_no


@dataclass
class HostSpec:
    id: str
    role: Role
    location: str
    licence: Optional[str] = None
    category: str = "deposit"


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    until: int = 10
    year_ticks: int = 360
    period_ticks: Optional[int] = None
    latency: tuple[int, int] = (1, 1)
    currency: str = "SIM"
    hosts: list[HostSpec] = field(default_factory=list)
    law: list[tuple[str, LawStatus, Fraction]] = field(default_factory=list)
    supply_issuer: Optional[str] = None
    supply_allowance: Optional[int] = None
    supply_rule: Optional[SupplyRule] = None
    supply_policy: str = "empty"
    policies: list[tuple[str, str]] = field(default_factory=list)  # name -> builder spec
    script: list[tuple[int, tuple[str, ...]]] = field(default_factory=list)


def _parse_fraction(text: str, line_no: int) -> Fraction:
    try:
        if "/" in text:
            num, den = text.split("/")
            return Fraction(int(num), int(den))
        return Fraction(int(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ScenarioError(f"bad fraction {text!r}: {exc}", line_no) from None


def parse_scenario(text: str) -> ScenarioConfig:
    cfg = ScenarioConfig()
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("sim", "hosts", "law", "supply", "policies", "script"):
                raise ScenarioError(f"unknown section [{section}]", line_no)
            continue
        if section is None:
            raise ScenarioError("content before any [section]", line_no)
        if section == "script":
            _parse_script_line(cfg, line, line_no)
            continue
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        if section == "sim":
            _parse_sim_entry(cfg, key, value, line_no)
        elif section == "hosts":
            _parse_host_entry(cfg, key, value, line_no)
        elif section == "law":
            _parse_law_entry(cfg, key, value, line_no)
        elif section == "supply":
            _parse_supply_entry(cfg, key, value, line_no)
        elif section == "policies":
            cfg.policies.append((key, value))
    return cfg


def _parse_sim_entry(cfg: ScenarioConfig, key: str, value: str, line_no: int) -> None:
    try:
        if key == "name":
            cfg.name = value
        elif key == "until":
            cfg.until = int(value)
        elif key == "year_ticks":
            cfg.year_ticks = int(value)
        elif key == "period_ticks":
            cfg.period_ticks = int(value)
        elif key == "latency":
            lo, hi = value.split()
            cfg.latency = (int(lo), int(hi))
        elif key == "currency":
            cfg.currency = value
        else:
            raise ScenarioError(f"unknown [sim] key {key!r}", line_no)
    except ValueError as exc:
        raise ScenarioError(f"bad [sim] value for {key!r}: {exc}", line_no) from None


def _parse_host_entry(cfg: ScenarioConfig, key: str, value: str, line_no: int) -> None:
    parts = value.split()
    if len(parts) < 2:
        raise ScenarioError("host wants 'ROLE LOCATION [k=v ...]'", line_no)
    try:
        role = Role(parts[0])
    except ValueError:
        raise ScenarioError(f"unknown role {parts[0]!r}", line_no) from None
    if any(existing.id == key for existing in cfg.hosts):
        raise ScenarioError(f"duplicate host {key!r}", line_no)
    spec = HostSpec(id=key, role=role, location=parts[1])
    for extra in parts[2:]:
        if "=" not in extra:
            raise ScenarioError(f"bad host attribute {extra!r}", line_no)
        attr, attr_value = extra.split("=", 1)
        if attr == "licence":
            spec.licence = None if attr_value in ("none", "-") else attr_value
        elif attr == "category":
            spec.category = attr_value
        else:
            raise ScenarioError(f"unknown host attribute {attr!r}", line_no)
    cfg.hosts.append(spec)


def _parse_law_entry(cfg: ScenarioConfig, key: str, value: str, line_no: int) -> None:
    parts = value.split()
    if len(parts) != 2:
        raise ScenarioError("law wants 'status num/den'", line_no)
    try:
        status = LawStatus(parts[0])
    except ValueError:
        raise ScenarioError(f"unknown law status {parts[0]!r}", line_no) from None
    cfg.law.append((key, status, _parse_fraction(parts[1], line_no)))


def _parse_supply_entry(cfg: ScenarioConfig, key: str, value: str, line_no: int) -> None:
    if key == "issuer":
        cfg.supply_issuer = value
        return
    if key == "allowance":
        cfg.supply_allowance = int(value)
        return
    if key == "policy":
        cfg.supply_policy = value
        return
    if key != "rule":
        raise ScenarioError(f"unknown [supply] key {key!r}", line_no)
    parts = value.split()
    kind = parts[0]
    try:
        if kind == "NONE":
            cfg.supply_rule = None
        elif kind == "FIXED_CAP":
            cfg.supply_rule = FixedCapGeometric(int(parts[1]), int(parts[2]))
        elif kind == "CONSTANT_GROWTH":
            cfg.supply_rule = ConstantGrowth(_parse_fraction(parts[1], line_no))
        elif kind == "VOLUME_RESPONSIVE":
            cfg.supply_rule = VolumeResponsive(
                _parse_fraction(parts[1], line_no),
                _parse_fraction(parts[2], line_no),
                int(parts[3]),
            )
        else:
            raise ScenarioError(f"unknown supply rule {kind!r}", line_no)
    except (IndexError, ValueError) as exc:
        raise ScenarioError(f"bad supply rule: {exc}", line_no) from None


def _parse_script_line(cfg: ScenarioConfig, line: str, line_no: int) -> None:
    parts = line.split()
    try:
        tick = int(parts[0])
    except ValueError:
        raise ScenarioError(f"script line must start with a tick: {parts[0]!r}", line_no) from None
    if len(parts) < 2 or parts[1] not in SCRIPT_ACTIONS:
        raise ScenarioError(f"unknown script action {parts[1] if len(parts) > 1 else ''!r}", line_no)
    cfg.script.append((tick, tuple(parts[1:])))


# -- policy builders -----------------------------------------------------


def build_policy_source(spec: str, law: LawTable, year_ticks: int) -> str:
    """Expand a '[policies]' value: '+'-joined builder invocations."""
    sources = []
    for chunk in spec.split("+"):
        parts = chunk.split()
        if not parts:
            raise ScenarioError(f"empty policy builder in {spec!r}")
        builder, args = parts[0], parts[1:]
        try:
            if builder == "empty":
                sources.append("")
            elif builder == "sales_tax":
                rate = Fraction(args[0])
                category = args[1] if len(args) > 1 else "sale"
                authority = args[2] if len(args) > 2 else fiscal.TAX_AUTHORITY
                sources.append(fiscal.sales_tax_policy(rate, category, authority))
            elif builder == "legality":
                sources.append(fiscal.legality_policy(law))
            elif builder == "annual_contact":
                ticks = int(args[0]) if args else year_ticks
                sources.append(fiscal.annual_contact_policy(ticks))
            elif builder == "jurisdiction":
                sources.append(fiscal.jurisdiction_policy(args[0]))
            elif builder == "owner_restriction":
                sources.append(fiscal.owner_restriction_policy(args[0].split(",")))
            elif builder == "expiry":
                sources.append(fiscal.expiry_policy(int(args[0])))
            elif builder == "rate_seeker":
                sources.append(fiscal.rate_seeking_policy())
            elif builder == "tamper_notify":
                sources.append(fiscal.tamper_notify_policy(*args))
            else:
                raise ScenarioError(f"unknown policy builder {builder!r}")
        except (IndexError, ValueError, ZeroDivisionError, fiscal.BadRate) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"bad arguments for builder {builder!r}: {exc}") from None
    return fiscal.compose(*sources)


# -- building and running -------------------------------------------------


def build_simulation(cfg: ScenarioConfig, seed: int) -> Simulation:
    sim = Simulation(
        seed=seed,
        scenario_name=cfg.name,
        year_ticks=cfg.year_ticks,
        period_ticks=cfg.period_ticks,
        latency=cfg.latency,
        currency=cfg.currency,
    )
    for spec in cfg.hosts:
        sim.add_host(
            spec.id,
            spec.role,
            spec.location,
            licence=spec.licence,
            category=spec.category,
        )
    for category, status, rate in cfg.law:
        sim.law.add(category, status, rate)
    for name, builder_spec in cfg.policies:
        source = build_policy_source(builder_spec, sim.law, cfg.year_ticks)
        sim.add_policy(name, source)
    if cfg.supply_rule is not None:
        if cfg.supply_issuer is None:
            raise ScenarioError("[supply] rule configured without an issuer")
        sim.supply_rule = cfg.supply_rule
        sim.supply_issuer = cfg.supply_issuer
        sim.supply_policy_name = cfg.supply_policy
    if cfg.supply_issuer is not None and cfg.supply_allowance is not None:
        sim.set_issuer_allowance(cfg.supply_issuer, cfg.supply_allowance)
    for tick, parts in cfg.script:
        sim.schedule_script(tick, parts)
    return sim


def run_scenario(cfg: ScenarioConfig, seed: int) -> Simulation:
    sim = build_simulation(cfg, seed)
    sim.run_until(cfg.until)
    return sim


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
