"""Population experiments: ingestion, synthetic cohorts, and study tables.

Takes a collection of user profiles (parsed from timestamp logs or sampled
synthetically), solves every user's deferral problem over a common grid of
rates, and collects the population-level results: the distribution of
critical rates, percentile curves of relative privacy gain, per-user delay
and capacity at the critical rate, and the aggregate traffic profile before
and after deferral.  Everything is emitted as plain CSV tables; outputs are
deterministic functions of the inputs and the seed.

Per-user computations are independent (parallelizable if desired); table
writes happen serially, so output files are never partially interleaved.
"""

import csv
import json
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .buffer import capacity as buffer_capacity
from .buffer import delay_distribution, steady_state
from .profiles import (
    ActivityProfile,
    SlotScheme,
    TimestampRecord,
    build_profile,
    critical_rate,
)
from .strategies import relative_privacy_gain, solve_optimal


def _parse_timestamp(raw) -> float:
    """Epoch seconds from an epoch number or an ISO-8601 string (UTC)."""
    if isinstance(raw, (int, float)):
        return float(raw)
    text = str(raw).strip()
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def read_records(path, format: str = "csv", tz_offset: float = 0.0):
    """Parse a timestamp log into records, skipping malformed rows.

    Returns ``(records, row_errors)`` where ``row_errors`` is a list of
    ``(line_number, message)`` pairs for rows that could not be parsed.
    ``tz_offset`` (seconds) is added to every timestamp, shifting UTC
    instants into the users' local time of day.
    """
    path = Path(path)
    records: list[TimestampRecord] = []
    row_errors: list[tuple[int, str]] = []

    def add(lineno, user_id, raw_ts):
        try:
            ts = _parse_timestamp(raw_ts) + tz_offset
            records.append(TimestampRecord(user_id=str(user_id), timestamp=ts))
        except (ValueError, TypeError) as exc:
            row_errors.append((lineno, f"bad timestamp {raw_ts!r}: {exc}"))

    if format == "csv":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {
                "user_id",
                "timestamp_utc",
            } <= set(reader.fieldnames):
                raise ValueError(
                    f"{path}: expected CSV header with user_id,timestamp_utc, "
                    f"got {reader.fieldnames}"
                )
            for lineno, row in enumerate(reader, start=2):
                if row.get("user_id") in (None, "") or row.get("timestamp_utc") in (None, ""):
                    row_errors.append((lineno, f"missing field in {row!r}"))
                    continue
                add(lineno, row["user_id"], row["timestamp_utc"])
    elif format == "jsonl":
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    row_errors.append((lineno, f"bad JSON: {exc}"))
                    continue
                if "user_id" not in obj or "timestamp_utc" not in obj:
                    row_errors.append((lineno, f"missing keys in {obj!r}"))
                    continue
                add(lineno, obj["user_id"], obj["timestamp_utc"])
    else:
        raise ValueError(f"unknown format {format!r}; expected 'csv' or 'jsonl'")

    return records, row_errors


def ingest(
    path,
    format: str = "csv",
    scheme: SlotScheme = None,
    min_count: int = 1,
    tz_offset: float = 0.0,
) -> dict[str, ActivityProfile]:
    """One activity profile per user found in a timestamp log.

    Malformed rows are reported as warnings and skipped; users with fewer
    than ``min_count`` messages are excluded with a warning.  Raises if no
    valid user remains.
    """
    if scheme is None:
        scheme = SlotScheme.day()
    records, row_errors = read_records(path, format=format, tz_offset=tz_offset)
    for lineno, message in row_errors:
        warnings.warn(f"{path}:{lineno}: {message}", stacklevel=2)

    by_user: dict[str, list[TimestampRecord]] = {}
    for rec in records:
        by_user.setdefault(rec.user_id, []).append(rec)

    profiles: dict[str, ActivityProfile] = {}
    for user_id in sorted(by_user):
        recs = by_user[user_id]
        if len(recs) < min_count:
            warnings.warn(
                f"excluding user {user_id!r}: {len(recs)} messages < "
                f"min_count {min_count}",
                stacklevel=2,
            )
            continue
        profiles[user_id] = build_profile(recs, scheme)
    if not profiles:
        raise ValueError(f"{path}: no valid users after parsing and filtering")
    return profiles


def synth_population(
    n_users: int,
    scheme: SlotScheme = None,
    concentration: float = 1.0,
    mean_messages: float = 1879.42,
    seed: int = 0,
) -> dict[str, ActivityProfile]:
    """Synthetic cohort of Dirichlet-sampled profiles.

    Each user's profile is a symmetric Dirichlet draw (small concentrations
    give peaky profiles and large critical rates, large concentrations
    approach uniform) and carries a Poisson-distributed message count.
    Deterministic given the seed.
    """
    if scheme is None:
        scheme = SlotScheme.day()
    if n_users < 1:
        raise ValueError(f"n_users must be >= 1, got {n_users!r}")
    if not concentration > 0:
        raise ValueError(f"concentration must be positive, got {concentration!r}")
    if not mean_messages > 0:
        raise ValueError(f"mean_messages must be positive, got {mean_messages!r}")
    rng = np.random.default_rng(seed)
    width = max(3, len(str(n_users - 1)))
    profiles = {}
    for i in range(n_users):
        q = rng.dirichlet(np.full(scheme.n, concentration))
        count = float(max(1, rng.poisson(mean_messages)))
        profiles[f"user{i:0{width}d}"] = ActivityProfile(scheme, q, count=count)
    return profiles


def nearest_rank_percentile(values, pct: float) -> float:
    """Nearest-rank percentile: smallest value covering ``pct`` percent."""
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise ValueError("percentile of an empty collection")
    rank = max(1, int(np.ceil(pct / 100.0 * ordered.size)))
    return float(ordered[rank - 1])


@dataclass
class PopulationStudy:
    """Per-user and aggregate results of a population experiment."""

    users: dict[str, ActivityProfile]
    user_ids: list[str]
    scheme: SlotScheme
    phi_grid: np.ndarray
    phi_crit: np.ndarray
    gain_curves: np.ndarray  # users x grid, percent
    gain_percentiles: dict[int, np.ndarray]
    delay_conditional_slots: np.ndarray
    delay_conditional_hours: np.ndarray
    capacity_messages: np.ndarray
    capacity_relative_pct: np.ndarray
    aggregate_before: np.ndarray
    aggregate_after: np.ndarray  # grid x slots

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    def write_csvs(self, out_dir) -> list[Path]:
        """Emit the study tables; returns the written paths."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []

        path = out_dir / "phicrit_hist.csv"
        _write_hist(path, self.phi_crit, bins=20, lo=0.0, hi=1.0, label="phi_crit")
        written.append(path)

        path = out_dir / "gain_percentiles.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["phi", "gain_p10_pct", "gain_p50_pct", "gain_p90_pct"])
            for k, phi in enumerate(self.phi_grid):
                writer.writerow(
                    [
                        repr(float(phi)),
                        repr(float(self.gain_percentiles[10][k])),
                        repr(float(self.gain_percentiles[50][k])),
                        repr(float(self.gain_percentiles[90][k])),
                    ]
                )
        written.append(path)

        path = out_dir / "delay_pmf.csv"
        _write_hist(path, self.delay_conditional_hours, bins=16, label="delay_hours")
        written.append(path)

        path = out_dir / "capacity_pmf.csv"
        _write_hist(path, self.capacity_relative_pct, bins=16, label="capacity_pct")
        written.append(path)

        path = out_dir / "aggregate_profiles.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["slot", "p"] + [f"p_prime_phi_{float(phi)!r}" for phi in self.phi_grid]
            writer.writerow(header)
            for i in range(self.scheme.n):
                row = [i + 1, repr(float(self.aggregate_before[i]))]
                row += [repr(float(self.aggregate_after[k][i])) for k in range(len(self.phi_grid))]
                writer.writerow(row)
        written.append(path)

        return written


def _write_hist(path, values, bins: int, lo=None, hi=None, label="value"):
    values = np.asarray(values, dtype=float)
    if lo is None:
        lo = float(values.min())
    if hi is None:
        hi = float(values.max())
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    total = counts.sum()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{label}_bin_left", f"{label}_bin_right", "count", "pmf"])
        for k in range(bins):
            writer.writerow(
                [
                    repr(float(edges[k])),
                    repr(float(edges[k + 1])),
                    int(counts[k]),
                    repr(float(counts[k] / total)) if total else repr(0.0),
                ]
            )


def study(
    users: dict[str, ActivityProfile],
    phi_grid,
    alpha_policy: str = "own-count",
) -> PopulationStudy:
    """Run the per-user analyses and aggregate them.

    For each grid rate every user applies ``min(phi, own critical rate)``;
    delay and capacity are evaluated at each user's critical rate with
    ``alpha`` set by ``alpha_policy`` (currently only "own-count": the
    user's observed messages per period).
    """
    if not users:
        raise ValueError("population study needs at least one user")
    if alpha_policy != "own-count":
        raise ValueError(f"unknown alpha policy {alpha_policy!r}")
    phi_grid = np.asarray(list(phi_grid), dtype=float)
    if phi_grid.size == 0:
        raise ValueError("empty phi grid")

    user_ids = list(users)
    scheme = users[user_ids[0]].scheme
    n = scheme.n
    if any(users[u].scheme != scheme for u in user_ids):
        raise ValueError("all users in a study must share one slot scheme")
    counts = np.array([max(users[u].count, 1.0) for u in user_ids])

    phi_crit = np.zeros(len(user_ids))
    gain_curves = np.zeros((len(user_ids), phi_grid.size))
    delay_cond = np.zeros(len(user_ids))
    cap_msgs = np.zeros(len(user_ids))
    t_at = np.zeros((phi_grid.size, len(user_ids), n))

    for ui, user in enumerate(user_ids):
        prof = users[user]
        phi_crit[ui] = critical_rate(prof)
        for k, phi in enumerate(phi_grid):
            strat = solve_optimal(prof, float(phi))  # clamps at the critical rate
            t_at[k, ui] = strat.apparent()
            gain_curves[ui, k] = relative_privacy_gain(prof, strat.entropy_bits())
        strat_crit = solve_optimal(prof, phi_crit[ui])
        pattern = steady_state(strat_crit, counts[ui])
        cap_msgs[ui] = buffer_capacity(pattern)
        delay_cond[ui] = delay_distribution(pattern).expected_conditional

    weights = counts / counts.sum()
    aggregate_before = np.einsum(
        "u,un->n", weights, np.array([users[u].q for u in user_ids])
    )
    aggregate_after = np.einsum("u,kun->kn", weights, t_at)

    percentiles = {
        pct: np.array(
            [nearest_rank_percentile(gain_curves[:, k], pct) for k in range(phi_grid.size)]
        )
        for pct in (10, 50, 90)
    }

    return PopulationStudy(
        users=dict(users),
        user_ids=user_ids,
        scheme=scheme,
        phi_grid=phi_grid,
        phi_crit=phi_crit,
        gain_curves=gain_curves,
        gain_percentiles=percentiles,
        delay_conditional_slots=delay_cond,
        delay_conditional_hours=delay_cond * scheme.slot_duration / 3600.0,
        capacity_messages=cap_msgs,
        capacity_relative_pct=100.0 * cap_msgs / counts,
        aggregate_before=aggregate_before,
        aggregate_after=aggregate_after,
    )
