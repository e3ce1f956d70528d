"""Online central authority: append-only ledger, double-spend rejection.

Every lifecycle operation on a unit (mint, transfer, split, merge, burn) is
an endorsement request.  The registry is the single serialization point:
requests are validated against the live-unit set, committed in arrival
order, and each committed record is signed by the registry key.  A unit id
is consumed by split/merge/burn; a transfer keeps the id live and moves its
owner, so a replayed transfer fails the owner check and is rejected as a
double spend.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .crypto import KeyDirectory, Signature


class RecordKind(Enum):
    MINT = "MINT"
    TRANSFER = "TRANSFER"
    SPLIT = "SPLIT"
    MERGE = "MERGE"
    BURN = "BURN"


class RegistryError(ValueError):
    """Base for every endorsement rejection."""


class DoubleSpend(RegistryError):
    """Unit id unknown, already consumed, or not owned by the requester."""


class BadSignature(RegistryError):
    pass


class UnauthorizedIssuer(RegistryError):
    pass


class InvalidRequest(RegistryError):
    """Malformed endorsement (amounts that do not conserve, bad arity)."""


class BadWindow(ValueError):
    pass


@dataclass(frozen=True)
class LedgerRecord:
    seq: int
    at: int
    kind: RecordKind
    unit_ids: tuple[str, ...]
    amounts: tuple[int, ...]
    parties: tuple[str, ...]
    reason: Optional[str] = None

    def line(self) -> str:
        ids = ",".join(self.unit_ids)
        amounts = ",".join(str(a) for a in self.amounts)
        parties = ",".join(self.parties)
        return f"{self.seq}|{self.at}|{self.kind.value}|{ids}|{amounts}|{parties}|{self.reason or '-'}"


@dataclass(frozen=True)
class EndorseRequest:
    """What a sender submits; `sig` covers body() with the sender's key."""

    kind: RecordKind
    unit_ids: tuple[str, ...]
    amounts: tuple[int, ...]
    new_owner: Optional[str]
    sender: str
    at: int
    reason: Optional[str] = None
    sig: Optional[Signature] = None

    def body(self) -> bytes:
        ids = ",".join(self.unit_ids)
        amounts = ",".join(str(a) for a in self.amounts)
        return f"{self.kind.value}|{ids}|{amounts}|{self.new_owner or '-'}|{self.at}".encode()

    def signed(self, directory: KeyDirectory) -> "EndorseRequest":
        sig = directory.sign(self.sender, self.body())
        return EndorseRequest(
            self.kind,
            self.unit_ids,
            self.amounts,
            self.new_owner,
            self.sender,
            self.at,
            self.reason,
            sig,
        )


@dataclass(frozen=True)
class Endorsement:
    record: LedgerRecord
    sig: Signature  # registry key over record.line()


@dataclass
class SupplyStats:
    live_supply: int
    minted: int
    burned: int
    tx_count: int
    tx_volume: int


@dataclass
class _State:
    live: dict[str, tuple[str, int]] = field(default_factory=dict)  # id -> (owner, value)
    consumed: set[str] = field(default_factory=set)
    issuers: dict[str, int] = field(default_factory=dict)  # key_id -> remaining allowance
    minted: int = 0
    burned: int = 0


class Registry:
    def __init__(self, directory: KeyDirectory, key_id: str = "registry", rng=None) -> None:
        self.directory = directory
        self.key_id = key_id
        if not directory.knows(key_id):
            if rng is not None:
                directory.create(key_id, rng)
            else:
                directory.register(key_id, b"registry-reference-secret")
        self.records: list[LedgerRecord] = []
        self.record_sigs: list[Signature] = []
        self._state = _State()
        self._id_counter = 0
        self.now = 0
        self.last_request: Optional[EndorseRequest] = None

    # -- setup ---------------------------------------------------------

    def authorize_issuer(self, key_id: str, allowance: int) -> None:
        self._state.issuers[key_id] = allowance

    def new_unit_id(self) -> str:
        self._id_counter += 1
        return f"u{self._id_counter}"

    # -- views -----------------------------------------------------------

    def live_units(self) -> dict[str, tuple[str, int]]:
        return dict(self._state.live)

    def owner_of(self, unit_id: str) -> Optional[str]:
        entry = self._state.live.get(unit_id)
        return entry[0] if entry else None

    def live_value(self, unit_id: str) -> Optional[int]:
        entry = self._state.live.get(unit_id)
        return entry[1] if entry else None

    def is_live(self, unit_id: str) -> bool:
        return unit_id in self._state.live

    @property
    def total_minted(self) -> int:
        return self._state.minted

    @property
    def total_burned(self) -> int:
        return self._state.burned

    @property
    def live_supply(self) -> int:
        return sum(v for _, v in self._state.live.values())

    def issuer_allowance(self, key_id: str) -> Optional[int]:
        return self._state.issuers.get(key_id)

    # -- endorsement -----------------------------------------------------

    def sign_bytes(self, msg: bytes) -> Signature:
        return self.directory.sign(self.key_id, msg)

    def endorse(self, request: EndorseRequest) -> Endorsement:
        if request.sig is None or not self.directory.verify(
            request.sender, request.body(), request.sig
        ):
            raise BadSignature(f"endorsement request by {request.sender}")
        self._validate(request)
        self._apply(request)
        record = LedgerRecord(
            seq=len(self.records),
            at=request.at,
            kind=request.kind,
            unit_ids=request.unit_ids,
            amounts=request.amounts,
            parties=self._parties(request),
            reason=request.reason,
        )
        sig = self.sign_bytes(record.line().encode())
        self.records.append(record)
        self.record_sigs.append(sig)
        self.now = max(self.now, request.at)
        self.last_request = request
        return Endorsement(record, sig)

    def _parties(self, req: EndorseRequest) -> tuple[str, ...]:
        if req.kind is RecordKind.TRANSFER:
            return (req.sender, req.new_owner or "-")
        return (req.sender,)

    def _require_owned_live(self, unit_id: str, sender: str) -> int:
        entry = self._state.live.get(unit_id)
        if entry is None:
            raise DoubleSpend(f"unit {unit_id} is not live")
        owner, value = entry
        if owner != sender:
            raise DoubleSpend(f"unit {unit_id} is not owned by {sender}")
        return value

    def _validate(self, req: EndorseRequest) -> None:
        kind = req.kind
        if kind is RecordKind.MINT:
            if len(req.unit_ids) != 1 or len(req.amounts) != 1 or req.amounts[0] <= 0:
                raise InvalidRequest("MINT wants one id and one positive amount")
            if req.unit_ids[0] in self._state.live or req.unit_ids[0] in self._state.consumed:
                raise DoubleSpend(f"unit id {req.unit_ids[0]} already exists")
            allowance = self._state.issuers.get(req.sender)
            if allowance is None:
                raise UnauthorizedIssuer(f"{req.sender} is not an issuer")
            if req.amounts[0] > allowance:
                raise UnauthorizedIssuer(
                    f"{req.sender} allowance {allowance} < mint {req.amounts[0]}"
                )
        elif kind is RecordKind.TRANSFER:
            if len(req.unit_ids) != 1 or len(req.amounts) != 1 or not req.new_owner:
                raise InvalidRequest("TRANSFER wants one id, one amount, a new owner")
            value = self._require_owned_live(req.unit_ids[0], req.sender)
            if req.amounts[0] != value:
                raise InvalidRequest(
                    f"TRANSFER amount {req.amounts[0]} != unit value {value}"
                )
        elif kind is RecordKind.SPLIT:
            if len(req.unit_ids) != 3 or len(req.amounts) != 3:
                raise InvalidRequest("SPLIT wants parent and two children")
            parent, c1, c2 = req.unit_ids
            pv, a, b = req.amounts
            value = self._require_owned_live(parent, req.sender)
            if pv != value or a <= 0 or b <= 0 or a + b != pv:
                raise InvalidRequest("SPLIT amounts do not conserve")
            for child in (c1, c2):
                if child in self._state.live or child in self._state.consumed:
                    raise DoubleSpend(f"unit id {child} already exists")
        elif kind is RecordKind.MERGE:
            if len(req.unit_ids) != 3 or len(req.amounts) != 3:
                raise InvalidRequest("MERGE wants two parents and the result")
            a_id, b_id, m_id = req.unit_ids
            av, bv, mv = req.amounts
            a_val = self._require_owned_live(a_id, req.sender)
            if b_id == a_id:
                raise DoubleSpend(f"unit {a_id} used twice in one merge")
            b_val = self._require_owned_live(b_id, req.sender)
            if av != a_val or bv != b_val or mv != av + bv:
                raise InvalidRequest("MERGE amounts do not conserve")
            if m_id in self._state.live or m_id in self._state.consumed:
                raise DoubleSpend(f"unit id {m_id} already exists")
        elif kind is RecordKind.BURN:
            if len(req.unit_ids) != 1 or len(req.amounts) != 1:
                raise InvalidRequest("BURN wants one id and one amount")
            value = self._require_owned_live(req.unit_ids[0], req.sender)
            if req.amounts[0] != value:
                raise InvalidRequest(
                    f"BURN amount {req.amounts[0]} != unit value {value}"
                )

    def _apply(self, req: EndorseRequest) -> None:
        live, consumed = self._state.live, self._state.consumed
        if req.kind is RecordKind.MINT:
            live[req.unit_ids[0]] = (req.sender, req.amounts[0])
            self._state.issuers[req.sender] -= req.amounts[0]
            self._state.minted += req.amounts[0]
        elif req.kind is RecordKind.TRANSFER:
            assert req.new_owner is not None
            live[req.unit_ids[0]] = (req.new_owner, req.amounts[0])
        elif req.kind is RecordKind.SPLIT:
            parent, c1, c2 = req.unit_ids
            del live[parent]
            consumed.add(parent)
            live[c1] = (req.sender, req.amounts[1])
            live[c2] = (req.sender, req.amounts[2])
        elif req.kind is RecordKind.MERGE:
            a_id, b_id, m_id = req.unit_ids
            del live[a_id]
            del live[b_id]
            consumed.update((a_id, b_id))
            live[m_id] = (req.sender, req.amounts[2])
        elif req.kind is RecordKind.BURN:
            del live[req.unit_ids[0]]
            consumed.add(req.unit_ids[0])
            self._state.burned += req.amounts[0]

    # -- statistics ------------------------------------------------------

    def supply_stats(self, window: tuple[int, int]) -> SupplyStats:
        lo, hi = window
        if lo < 0 or hi < lo or hi > self.now:
            raise BadWindow(f"window {window} outside [0, {self.now}]")
        minted = burned = tx_count = tx_volume = 0
        for rec in self.records:
            if not (lo <= rec.at <= hi):
                continue
            if rec.kind is RecordKind.MINT:
                minted += rec.amounts[0]
            elif rec.kind is RecordKind.BURN:
                burned += rec.amounts[0]
            elif rec.kind is RecordKind.TRANSFER:
                tx_count += 1
                tx_volume += rec.amounts[0]
        return SupplyStats(self.live_supply, minted, burned, tx_count, tx_volume)

    # -- audit -----------------------------------------------------------

    def export(self) -> str:
        return "\n".join(rec.line() for rec in self.records)

    def audit(self) -> list[str]:
        """Recompute state from records and verify every record signature."""
        violations: list[str] = []
        for i, (rec, sig) in enumerate(zip(self.records, self.record_sigs)):
            if rec.seq != i:
                violations.append(f"seq gap at {i} (found {rec.seq})")
            if not self.directory.verify(self.key_id, rec.line().encode(), sig):
                violations.append(f"bad registry signature on seq {rec.seq}")
        replayed, errors = replay_records(self.records)
        violations.extend(errors)
        if replayed is not None:
            if replayed.live != self._state.live:
                violations.append("live set does not match ledger replay")
            if replayed.minted != self._state.minted:
                violations.append("minted total does not match ledger replay")
            if replayed.burned != self._state.burned:
                violations.append("burned total does not match ledger replay")
        live_total = self.live_supply
        if self._state.minted - self._state.burned != live_total:
            violations.append(
                f"conservation broken: minted {self._state.minted} - burned "
                f"{self._state.burned} != live {live_total}"
            )
        return violations


@dataclass
class ReplayedState:
    live: dict[str, tuple[str, int]]
    minted: int
    burned: int


def replay_records(records: list[LedgerRecord]) -> tuple[Optional[ReplayedState], list[str]]:
    """Fold records from seq 0; structural violations are returned, not raised."""
    errors: list[str] = []
    live: dict[str, tuple[str, int]] = {}
    consumed: set[str] = set()
    minted = burned = 0
    live_total = 0
    for i, rec in enumerate(records):
        if rec.seq != i:
            errors.append(f"seq gap: expected {i}, found {rec.seq}")
            return None, errors
        try:
            if rec.kind is RecordKind.MINT:
                uid = rec.unit_ids[0]
                if uid in live or uid in consumed:
                    raise ValueError(f"mint of existing id {uid}")
                if rec.amounts[0] <= 0:
                    raise ValueError("non-positive mint")
                live[uid] = (rec.parties[0], rec.amounts[0])
                minted += rec.amounts[0]
                live_total += rec.amounts[0]
            elif rec.kind is RecordKind.TRANSFER:
                uid = rec.unit_ids[0]
                if uid not in live:
                    raise ValueError(f"transfer of non-live id {uid}")
                owner, value = live[uid]
                if owner != rec.parties[0] or value != rec.amounts[0]:
                    raise ValueError(f"transfer mismatch on {uid}")
                live[uid] = (rec.parties[1], value)
            elif rec.kind is RecordKind.SPLIT:
                parent, c1, c2 = rec.unit_ids
                pv, a, b = rec.amounts
                if parent not in live or live[parent][1] != pv or a + b != pv or a <= 0 or b <= 0:
                    raise ValueError(f"split mismatch on {parent}")
                owner = live[parent][0]
                del live[parent]
                consumed.add(parent)
                live[c1] = (owner, a)
                live[c2] = (owner, b)
            elif rec.kind is RecordKind.MERGE:
                a_id, b_id, m_id = rec.unit_ids
                av, bv, mv = rec.amounts
                if (
                    a_id not in live
                    or b_id not in live
                    or live[a_id][1] != av
                    or live[b_id][1] != bv
                    or mv != av + bv
                ):
                    raise ValueError(f"merge mismatch on {a_id},{b_id}")
                owner = live[a_id][0]
                del live[a_id]
                del live[b_id]
                consumed.update((a_id, b_id))
                live[m_id] = (owner, mv)
            elif rec.kind is RecordKind.BURN:
                uid = rec.unit_ids[0]
                if uid not in live or live[uid][1] != rec.amounts[0]:
                    raise ValueError(f"burn mismatch on {uid}")
                del live[uid]
                consumed.add(uid)
                burned += rec.amounts[0]
                live_total -= rec.amounts[0]
        except ValueError as exc:
            errors.append(f"seq {rec.seq}: {exc}")
            return None, errors
        if minted - burned != live_total:
            errors.append(f"seq {rec.seq}: conservation broken after append")
            return None, errors
    return ReplayedState(live, minted, burned), errors


def parse_ledger_line(line: str) -> LedgerRecord:
    parts = line.rstrip("\n").split("|")
    if len(parts) != 7:
        raise ValueError(f"malformed ledger line: {line!r}")
    seq, at, kind, ids, amounts, parties, reason = parts
    return LedgerRecord(
        seq=int(seq),
        at=int(at),
        kind=RecordKind(kind),
        unit_ids=tuple(ids.split(",")) if ids else (),
        amounts=tuple(int(a) for a in amounts.split(",")) if amounts else (),
        parties=tuple(parties.split(",")) if parties else (),
        reason=None if reason == "-" else reason,
    )


def audit_export(text: str) -> list[str]:
    """Structural audit of an exported ledger (no signatures in the format)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        records = [parse_ledger_line(ln) for ln in lines]
    except (ValueError, KeyError) as exc:
        return [f"unparseable ledger: {exc}"]
    _, errors = replay_records(records)
    return errors
