"""Activity profiles over cyclic time slots, and the metrics defined on them.

A user's online activity is modeled as a PMF ``q`` over ``n`` time slots that
tile a cyclic period (a day, a week, ...).  This module builds such profiles
from timestamped message logs and provides the information-theoretic
quantities the rest of the library is built on: Shannon entropy, KL
divergence, total variation distance and the critical deferral rate.

All logarithms are base 2; entropy and divergence are reported in bits.
Every function here is pure and safe to call from multiple threads.
"""

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Tolerance used when validating that a vector is a PMF.
PMF_ATOL = 1e-9

DAY_SECONDS = 86_400.0
WEEK_SECONDS = 7 * 86_400.0


def _as_readonly_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SlotScheme:
    """Division of a cyclic period into ``n`` equal time slots.

    Parameters
    ----------
    n : int
        Number of slots, at least 2.
    period_seconds : float
        Length of the cyclic time frame in seconds.
    """

    n: int
    period_seconds: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ValueError(f"slot count must be an integer >= 2, got {self.n!r}")
        if not self.period_seconds > 0:
            raise ValueError(f"period must be positive, got {self.period_seconds!r}")

    @property
    def slot_duration(self) -> float:
        """Seconds per slot."""
        return self.period_seconds / self.n

    @classmethod
    def day(cls, n: int = 24) -> "SlotScheme":
        return cls(n, DAY_SECONDS)

    @classmethod
    def week(cls, n: int = 7) -> "SlotScheme":
        return cls(n, WEEK_SECONDS)

    def slot_of(self, timestamp: float) -> int:
        """1-based slot index of a UTC epoch timestamp.

        Slot ``i`` covers the half-open interval ``(i-1, i]`` in slot units,
        so a timestamp landing exactly on a boundary belongs to the earlier
        slot, and a timestamp at a period boundary maps to slot ``n``.
        """
        rem = float(timestamp) % self.period_seconds
        if rem == 0.0:
            return self.n
        slot = math.ceil(rem / self.slot_duration)
        return min(max(slot, 1), self.n)


@dataclass(frozen=True)
class TimestampRecord:
    """One logged message: an opaque user id plus a UTC epoch timestamp."""

    user_id: str
    timestamp: float

    def __post_init__(self):
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f"timestamp must be finite and >= 0, got {self.timestamp!r}")


@dataclass
class ActivityProfile:
    """A PMF ``q`` over the slots of ``scheme``.

    ``count`` is the number of messages the estimate is based on; profiles
    built by :func:`build_profile` satisfy ``q[i] = per-slot count / count``.
    Synthetic profiles may carry a count that is only a rate parameter.
    """

    scheme: SlotScheme
    q: np.ndarray
    count: float = 0.0

    def __post_init__(self):
        q = _as_readonly_array(self.q)
        if q.ndim != 1 or q.shape[0] != self.scheme.n:
            raise ValueError(
                f"profile has {q.shape[0] if q.ndim == 1 else q.shape} entries, "
                f"scheme expects {self.scheme.n}"
            )
        _validate_pmf(q)
        if self.count < 0:
            raise ValueError(f"message count must be >= 0, got {self.count!r}")
        self.q = q

    @property
    def n(self) -> int:
        return self.scheme.n

    def entropy(self) -> float:
        """Shannon entropy of the profile in bits."""
        return entropy(self.q)

    def to_dict(self) -> dict:
        return {
            "n": self.scheme.n,
            "period_seconds": self.scheme.period_seconds,
            "q": [float(x) for x in self.q],
            "count": self.count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ActivityProfile":
        scheme = SlotScheme(int(data["n"]), float(data["period_seconds"]))
        return cls(scheme=scheme, q=data["q"], count=float(data.get("count", 0.0)))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ActivityProfile":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _validate_pmf(p: np.ndarray, name: str = "input") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"not a PMF: {name} must be a nonempty 1-d vector")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"not a PMF: {name} has non-finite entries")
    if np.any(p < 0):
        raise ValueError(f"not a PMF: {name} has negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > PMF_ATOL:
        raise ValueError(f"not a PMF: {name} sums to {total!r}")
    return p


def uniform_pmf(n: int) -> np.ndarray:
    """The uniform PMF on ``n`` outcomes."""
    return np.full(n, 1.0 / n)


def build_profile(records: Sequence[TimestampRecord], scheme: SlotScheme) -> ActivityProfile:
    """Estimate an activity profile as a normalized histogram of timestamps.

    Parameters
    ----------
    records : sequence of TimestampRecord
        Messages of a single user; must be nonempty and homogeneous in
        ``user_id``.
    scheme : SlotScheme
        Slot scheme used for binning.

    Returns
    -------
    ActivityProfile
        Relative frequencies per slot; invariant to the order of ``records``.
    """
    records = list(records)
    if not records:
        raise ValueError("no data: cannot build a profile from an empty record set")
    user_ids = {rec.user_id for rec in records}
    if len(user_ids) > 1:
        raise ValueError(
            f"heterogeneous input: records carry {len(user_ids)} distinct user ids"
        )
    counts = np.zeros(scheme.n)
    for rec in records:
        counts[scheme.slot_of(rec.timestamp) - 1] += 1
    total = counts.sum()
    return ActivityProfile(scheme=scheme, q=counts / total, count=float(total))


def entropy(p) -> float:
    """Shannon entropy of a PMF in bits, with the convention 0*log(0) = 0."""
    p = _validate_pmf(p)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def kl_divergence(t, p) -> float:
    """KL divergence D(t || p) in bits.

    Requires absolute continuity: every outcome with ``p == 0`` must also
    have ``t == 0``, otherwise the divergence is infinite and an error is
    raised.  With ``p`` uniform this equals ``log2(n) - entropy(t)``.
    """
    t = _validate_pmf(t, "t")
    p = _validate_pmf(p, "p")
    if t.shape != p.shape:
        raise ValueError(f"alphabet mismatch: {t.shape[0]} vs {p.shape[0]} outcomes")
    if np.any((p == 0) & (t > 0)):
        raise ValueError("divergence infinite: t puts mass where p has none")
    mask = t > 0
    return float((t[mask] * np.log2(t[mask] / p[mask])).sum())


def total_variation(p, q) -> float:
    """Total variation distance between two PMFs, in [0, 1]."""
    p = _validate_pmf(p, "p")
    q = _validate_pmf(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"alphabet mismatch: {p.shape[0]} vs {q.shape[0]} outcomes")
    return float(0.5 * np.abs(p - q).sum())


def critical_rate(profile: ActivityProfile) -> float:
    """Smallest deferral rate at which the apparent profile can reach uniform.

    Equals the total variation distance between the uniform PMF and the
    actual profile; zero exactly when the profile is already uniform.
    """
    return total_variation(uniform_pmf(profile.n), profile.q)
