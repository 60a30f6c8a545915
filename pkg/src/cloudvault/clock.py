"""UTC-seconds timestamps and ISO-8601 conversion."""

from __future__ import annotations

import time
from datetime import datetime, timezone
from typing import Callable

Clock = Callable[[], int]

DAY = 86_400


def system_clock() -> int:
    return int(time.time())


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 date/datetime (or bare integer seconds) into UTC seconds.

    Naive values are taken as UTC.
    """
    text = text.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
