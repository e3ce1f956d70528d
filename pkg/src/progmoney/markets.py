"""Negotiation venues: rate-seeking delegation and a continuous double auction.

The rate board is the advertised per-year interest rate of each bank; a unit
carrying MOVE_TO_BEST_RATE on TICK observes the board and, one tick later,
transfers itself to the strictly best bank through the normal transfer path,
so every prohibition the unit carries still applies.

The auction book matches with price-time priority: an incoming order trades
against the best opposite resting orders while prices cross, always at the
resting order's price; partial remainders rest.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Optional

from . import policy as pol
from .money import MoneyUnit, TransferOutcome, transfer
from .registry import Registry


class Side(Enum):
    BID = "BID"
    ASK = "ASK"


class InvalidOrder(ValueError):
    pass


@dataclass(frozen=True)
class Order:
    side: Side
    price: int
    qty: int
    owner: str
    seq: int


@dataclass(frozen=True)
class Trade:
    price: int
    qty: int
    buyer: str
    seller: str
    at: int


@dataclass(frozen=True)
class OrderBook:
    bids: tuple[Order, ...] = ()  # sorted by (-price, seq)
    asks: tuple[Order, ...] = ()  # sorted by (price, seq)


def _insert(orders: tuple[Order, ...], order: Order, descending: bool) -> tuple[Order, ...]:
    key = (lambda o: (-o.price, o.seq)) if descending else (lambda o: (o.price, o.seq))
    out = list(orders)
    pos = len(out)
    for i, existing in enumerate(out):
        if key(order) < key(existing):
            pos = i
            break
    out.insert(pos, order)
    return tuple(out)


def cda_submit(book: OrderBook, order: Order, at: int = 0) -> tuple[OrderBook, list[Trade]]:
    """Match `order` against `book`; returns the new book and the trades."""
    if order.price <= 0 or order.qty <= 0:
        raise InvalidOrder(f"price and qty must be positive: {order}")
    trades: list[Trade] = []
    remaining = order.qty
    if order.side is Side.BID:
        asks = list(book.asks)
        while remaining > 0 and asks and asks[0].price <= order.price:
            best = asks[0]
            qty = min(remaining, best.qty)
            trades.append(Trade(best.price, qty, order.owner, best.owner, at))
            remaining -= qty
            if qty == best.qty:
                asks.pop(0)
            else:
                asks[0] = replace(best, qty=best.qty - qty)
        new_book = OrderBook(bids=book.bids, asks=tuple(asks))
        if remaining > 0:
            new_book = OrderBook(
                bids=_insert(new_book.bids, replace(order, qty=remaining), descending=True),
                asks=new_book.asks,
            )
        return new_book, trades
    bids = list(book.bids)
    while remaining > 0 and bids and bids[0].price >= order.price:
        best = bids[0]
        qty = min(remaining, best.qty)
        trades.append(Trade(best.price, qty, best.owner, order.owner, at))
        remaining -= qty
        if qty == best.qty:
            bids.pop(0)
        else:
            bids[0] = replace(best, qty=best.qty - qty)
    new_book = OrderBook(bids=tuple(bids), asks=book.asks)
    if remaining > 0:
        new_book = OrderBook(
            bids=new_book.bids,
            asks=_insert(new_book.asks, replace(order, qty=remaining), descending=False),
        )
    return new_book, trades


RateBoard = dict[str, Fraction]


def select_best_rate(board: RateBoard, current_bank: Optional[str] = None) -> Optional[str]:
    """The bank to move to, or None to stay.

    Picks the argmax rate (ties to the lexicographically smallest bank id)
    and requires a strict improvement over the current bank's advertised
    rate; an empty board means stay.
    """
    if not board:
        return None
    best_bank = min(
        (bank for bank in board), key=lambda bank: (-board[bank], bank)
    )
    if current_bank is not None and current_bank in board:
        if board[best_bank] <= board[current_bank]:
            return None
    if best_bank == current_bank:
        return None
    return best_bank


def delegated_move(
    unit: MoneyUnit,
    target_bank: str,
    ctx: pol.EvalContext,
    registry: Registry,
    at: int,
) -> TransferOutcome:
    """Deposit `unit` at `target_bank` through the normal transfer path."""
    return transfer(unit, target_bank, ctx, registry, at=at)


def interest_payment(value: int, rate: Fraction, periods_per_year: int) -> int:
    """floor(value * rate / periods_per_year) in minor units."""
    scaled = rate / periods_per_year
    return (value * scaled.numerator) // scaled.denominator
