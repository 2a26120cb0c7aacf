"""Tick-file ingestion, the 8-rule cleaning procedure, spread construction
and likelihood-based jump-outlier removal.

Raw trade records carry a nanosecond timestamp since midnight ET, a price,
the reporting exchange, a correction indicator, a sale-condition string and
a security suffix.  Cleaning applies, in order:

1. keep only the primary exchange
2. keep only the 9:30-16:00 session
3. drop corrected trades (corr != 0)
4. drop abnormal sale conditions (any letter other than E, F, I)
5. drop preferred/warrant records (non-empty suffix)
6. merge records sharing a timestamp into their median price
7. drop nonpositive prices
8. drop prices deviating more than 10 mean absolute deviations from a
   centered rolling median of 50 neighbours (the point itself excluded)

Surviving times are mapped to the fraction of the 6.5-hour session and the
values are log prices.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError
from .model import NoisyOuParams, TickSeries

__all__ = [
    "RawTick",
    "CleanReport",
    "read_raw_csv",
    "write_raw_csv",
    "clean",
    "build_spread",
    "remove_jump_outliers",
]

SESSION_OPEN_NS = int(9.5 * 3600 * 1e9)
SESSION_CLOSE_NS = int(16.0 * 3600 * 1e9)
SESSION_SPAN_NS = SESSION_CLOSE_NS - SESSION_OPEN_NS

_ALLOWED_COND_LETTERS = frozenset("EFI")
_OUTLIER_HALF_WINDOW = 25
_OUTLIER_MIN_NEIGHBOURS = 25
_OUTLIER_MAD_MULTIPLE = 10.0
_MIN_SURVIVORS = 10

RAW_HEADER = ["timestamp", "price", "exchange", "corr", "cond", "suffix"]


@dataclass(frozen=True)
class RawTick:
    """One raw trade record; invariants are only established by cleaning."""

    timestamp_ns: int
    price: float
    exchange: str
    corr: int
    cond: str
    suffix: str


@dataclass(frozen=True)
class CleanReport:
    """Deletions per rule; deleted + retained equals the input count."""

    input_count: int
    deleted: tuple[int, int, int, int, int, int, int, int]
    retained: int

    def __post_init__(self) -> None:
        if sum(self.deleted) + self.retained != self.input_count:
            raise ValueError("clean report does not balance")


def _parse_timestamp(text: str) -> int:
    hh, mm, rest = text.strip().split(":")
    if "." in rest:
        ss, frac = rest.split(".")
        frac_ns = int(frac.ljust(9, "0")[:9])
    else:
        ss, frac_ns = rest, 0
    return (int(hh) * 3600 + int(mm) * 60 + int(ss)) * 1_000_000_000 + frac_ns


def _format_timestamp(ns: int) -> str:
    sec, frac = divmod(ns, 1_000_000_000)
    hh, rem = divmod(sec, 3600)
    mm, ss = divmod(rem, 60)
    return f"{hh:02d}:{mm:02d}:{ss:02d}.{frac:09d}"


def read_raw_csv(path) -> list[RawTick]:
    """Read `timestamp,price,exchange,corr,cond,suffix` rows (header required)."""
    ticks = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = set(RAW_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"raw tick file missing columns: {sorted(missing)}")
        for row in reader:
            ticks.append(
                RawTick(
                    _parse_timestamp(row["timestamp"]),
                    float(row["price"]),
                    row["exchange"].strip(),
                    int(row["corr"]),
                    row["cond"].strip(),
                    row["suffix"].strip(),
                )
            )
    return ticks


def write_raw_csv(path, ticks: Iterable[RawTick]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAW_HEADER)
        for t in ticks:
            writer.writerow(
                [_format_timestamp(t.timestamp_ns), repr(t.price), t.exchange, t.corr, t.cond, t.suffix]
            )


def _abnormal_cond(cond: str) -> bool:
    return any(ch.isalpha() and ch not in _ALLOWED_COND_LETTERS for ch in cond)


def _rolling_outlier_mask(prices: np.ndarray) -> np.ndarray:
    """True where a price sits more than 10 MADs from its neighbourhood median.

    The window is the 25 observations on each side with the point itself
    excluded; near the edges it shrinks symmetrically while at least 25
    neighbours remain, extending one-sidedly at the very ends.
    """
    n = prices.shape[0]
    mask = np.zeros(n, dtype=bool)
    for i in range(n):
        half = min(_OUTLIER_HALF_WINDOW, i, n - 1 - i)
        if 2 * half >= _OUTLIER_MIN_NEIGHBOURS:
            lo, hi = i - half, i + half
        else:
            lo = max(0, i - _OUTLIER_HALF_WINDOW)
            hi = min(n - 1, i + _OUTLIER_HALF_WINDOW)
        window = np.concatenate([prices[lo:i], prices[i + 1 : hi + 1]])
        med = float(np.median(window))
        mad = float(np.mean(np.abs(window - med)))
        if abs(prices[i] - med) > _OUTLIER_MAD_MULTIPLE * mad:
            mask[i] = True
    return mask


def clean(ticks: Sequence[RawTick], primary_exchange: str) -> tuple[TickSeries, CleanReport]:
    """Apply the 8 cleaning rules in order to one symbol-day of raw trades."""
    deleted = [0] * 8
    current = list(ticks)

    def apply(rule_idx: int, keep_fn) -> None:
        nonlocal current
        kept = [t for t in current if keep_fn(t)]
        deleted[rule_idx] = len(current) - len(kept)
        current = kept

    apply(0, lambda t: t.exchange == primary_exchange)
    apply(1, lambda t: SESSION_OPEN_NS <= t.timestamp_ns <= SESSION_CLOSE_NS)
    apply(2, lambda t: t.corr == 0)
    apply(3, lambda t: not _abnormal_cond(t.cond))
    apply(4, lambda t: t.suffix == "")

    # rule 6: merge identical timestamps into their median price
    current.sort(key=lambda t: t.timestamp_ns)
    merged: list[RawTick] = []
    i = 0
    while i < len(current):
        j = i
        while j + 1 < len(current) and current[j + 1].timestamp_ns == current[i].timestamp_ns:
            j += 1
        if j > i:
            med = float(np.median([t.price for t in current[i : j + 1]]))
            merged.append(RawTick(current[i].timestamp_ns, med, current[i].exchange, 0, "", ""))
            deleted[5] += j - i
        else:
            merged.append(current[i])
        i = j + 1
    current = merged

    apply(6, lambda t: t.price > 0.0)

    prices = np.array([t.price for t in current])
    if prices.shape[0] > 2 * _OUTLIER_HALF_WINDOW:
        outlier = _rolling_outlier_mask(prices)
        deleted[7] = int(outlier.sum())
        current = [t for t, bad in zip(current, outlier) if not bad]

    report = CleanReport(len(ticks), tuple(deleted), len(current))
    if len(current) < _MIN_SURVIVORS:
        raise InsufficientDataError(
            f"only {len(current)} ticks survive cleaning (need {_MIN_SURVIVORS})"
        )
    times = np.array([(t.timestamp_ns - SESSION_OPEN_NS) / SESSION_SPAN_NS for t in current])
    values = np.log(np.array([t.price for t in current]))
    return TickSeries(times, values), report


def build_spread(a: TickSeries, b: TickSeries) -> TickSeries:
    """Log spread of two cleaned legs on the union of their event times.

    Each leg's value is carried forward from its last tick; events before
    both legs have printed are dropped.
    """
    times = np.union1d(a.times, b.times)
    ia = np.searchsorted(a.times, times, side="right") - 1
    ib = np.searchsorted(b.times, times, side="right") - 1
    ok = (ia >= 0) & (ib >= 0)
    if int(ok.sum()) < 2:
        raise InsufficientDataError("legs do not overlap long enough to form a spread")
    return TickSeries(times[ok], a.values[ia[ok]] - b.values[ib[ok]])


def remove_jump_outliers(
    ts: TickSeries, init: NoisyOuParams, frac: float = 0.01
) -> tuple[TickSeries, np.ndarray]:
    """Drop the fraction of observations least consistent with ``init``.

    Scores observation i >= 1 by its conditional log-density given its
    predecessor and removes the floor(frac * n) lowest, where n is the number
    of scored observations.  Returns the filtered series plus the removed
    indices into the original one, so callers needing the full path (the
    backtest does) can re-include them.
    """
    if not (0.0 <= frac < 0.5):
        raise ValueError(f"frac must be in [0, 0.5), got {frac}")
    n_scored = len(ts) - 1
    k = int(frac * n_scored)
    if k == 0:
        return ts, np.empty(0, dtype=np.int64)
    den = init.sigma2 + 2.0 * init.tau * init.omega2
    if den <= 0.0:
        raise DegenerateInputError("scoring undefined: sigma2 and omega2 both zero")
    w = init.sigma2 / den
    pv = init.sigma2 * init.omega2 / den
    dt = np.diff(ts.times)
    e = np.exp(-init.tau * dt)
    mean = init.mu + w * (ts.values[:-1] - init.mu) * e
    var = pv * e * e + init.ou.stationary_variance * (1.0 - e * e) + init.omega2
    logpdf = -0.5 * (np.log(2.0 * math.pi * var) + (ts.values[1:] - mean) ** 2 / var)
    order = np.argsort(logpdf, kind="stable")
    removed = np.sort(order[:k] + 1)
    keep = np.ones(len(ts), dtype=bool)
    keep[removed] = False
    return TickSeries(ts.times[keep], ts.values[keep]), removed
