"""Observed results, experiment configs and run records on disk.

Observed results are comma-separated text with the header
``district,party,votes`` and one row per (district, party) pair.

Run records are JSON lines. The first line is a header
``{"schema": "districtsim.runs", "version": 1}``; every later line is one
:class:`RunRecord`.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .core import ElectorateSpec, TallyMatrix, decide_outcome, equal_sizes, largest_remainder, validate_spec
from .errors import ConfigError, DuplicatePair, EmptyFile, ParseError, SchemaVersionMismatch
from .models import ModelParams, get_model, params_from_dict
from .stats import SummaryStats, summarize

PathLike = Union[str, os.PathLike]

RUNS_SCHEMA = "districtsim.runs"
RUNS_VERSION = 1
HEADER = ("district", "party", "votes")


@dataclass
class ObservedElection:
    """An election result with parties ranked by total votes (index 0 is
    the party placed first)."""

    name: str
    district_ids: list[str]
    party_ids: list[str]
    spec: ElectorateSpec
    tally: TallyMatrix
    dropped_parties: list[str] = field(default_factory=list)

    @property
    def stats(self) -> SummaryStats:
        return summarize(self.tally, self.spec)

    @property
    def seats(self) -> np.ndarray:
        return decide_outcome(self.tally, self.spec).seats


def _parse_rows(path: Path) -> list[tuple[str, str, int]]:
    text = path.read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise EmptyFile(f"{path}: no content")
    header = tuple(c.strip().lower() for c in lines[0].split(","))
    if header != HEADER:
        raise ParseError(f"{path}: expected header {','.join(HEADER)}, got {lines[0]!r}")
    rows, seen = [], set()
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 3 or not cells[0] or not cells[1]:
            raise ParseError(f"{path}:{lineno}: expected district,party,votes")
        try:
            votes = int(cells[2])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: votes {cells[2]!r} is not an integer") from None
        if votes < 0:
            raise ParseError(f"{path}:{lineno}: negative votes")
        key = (cells[0], cells[1])
        if key in seen:
            raise DuplicatePair(f"{path}:{lineno}: district {key[0]!r} party {key[1]!r} repeated")
        seen.add(key)
        rows.append((cells[0], cells[1], votes))
    if not rows:
        raise EmptyFile(f"{path}: header only")
    return rows


def load_observed(
    path: PathLike,
    num_parties: Optional[int] = None,
    scale: Optional[float] = None,
    name: Optional[str] = None,
) -> ObservedElection:
    """Read a results file into a spec, tally and summary.

    Parties are ordered by descending total votes (ties keep file order).
    With ``num_parties`` only the leading parties are kept and the district
    sizes shrink to the votes those parties hold. ``scale`` multiplies every
    district's votes, rounding by largest remainder within the district, to
    shrink very large electorates.
    """
    path = Path(path)
    rows = _parse_rows(path)
    districts = list(dict.fromkeys(r[0] for r in rows))
    parties = list(dict.fromkeys(r[1] for r in rows))
    if len(parties) < 2:
        raise ParseError(f"{path}: at least two parties are needed")
    V = np.zeros((len(districts), len(parties)), np.int64)
    d_index = {d: i for i, d in enumerate(districts)}
    p_index = {p: i for i, p in enumerate(parties)}
    for d, p, v in rows:
        V[d_index[d], p_index[p]] = v

    totals = V.sum(axis=0)
    order = sorted(range(len(parties)), key=lambda k: (-totals[k], k))
    keep = order if num_parties is None else order[:num_parties]
    if len(keep) < 2:
        raise ParseError("at least two parties must be kept")
    dropped = [parties[k] for k in order[len(keep):]]
    V = V[:, keep]

    if scale is not None:
        V = np.array([largest_remainder(row, max(1, round(row.sum() * scale))) if row.sum() else row for row in V])
    empty = V.sum(axis=1) == 0
    if np.any(empty):
        raise ParseError(f"district {districts[int(np.flatnonzero(empty)[0])]!r} has no votes for the kept parties")

    sizes = V.sum(axis=1)
    spec = validate_spec(
        ElectorateSpec(
            num_districts=len(districts),
            num_parties=len(keep),
            num_electors=int(sizes.sum()),
            district_sizes=tuple(int(n) for n in sizes),
            party_vote_totals=tuple(int(v) for v in V.sum(axis=0)),
        )
    )
    return ObservedElection(
        name=name or path.stem,
        district_ids=districts,
        party_ids=[parties[k] for k in keep],
        spec=spec,
        tally=TallyMatrix(V),
        dropped_parties=dropped,
    )


def write_observed(obs: ObservedElection, path: PathLike) -> None:
    lines = [",".join(HEADER)]
    for s, d in enumerate(obs.district_ids):
        for k, p in enumerate(obs.party_ids):
            lines.append(f"{d},{p},{int(obs.tally.votes[s, k])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _reject_unknown(d: dict, allowed: Iterable[str], where: str) -> None:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


ELECTORATE_KEYS = (
    "num_districts",
    "num_parties",
    "num_electors",
    "district_sizes",
    "popularity",
    "party_vote_totals",
)


def electorate_from_dict(d: dict) -> ElectorateSpec:
    """Build and validate a spec. ``district_sizes`` defaults to equal
    districts and ``num_parties`` to the length of the share vector."""
    _reject_unknown(d, ELECTORATE_KEYS, "electorate")
    try:
        S = int(d["num_districts"])
        N = int(d["num_electors"])
    except KeyError as exc:
        raise ConfigError(f"electorate is missing {exc.args[0]!r}") from None
    shares = d.get("popularity")
    votes = d.get("party_vote_totals")
    K = d.get("num_parties") or len(shares if shares is not None else votes or ())
    sizes = d.get("district_sizes") or equal_sizes(S, N)
    return validate_spec(
        ElectorateSpec(
            num_districts=S,
            num_parties=int(K),
            num_electors=N,
            district_sizes=tuple(int(n) for n in sizes),
            popularity=None if shares is None else tuple(float(x) for x in shares),
            party_vote_totals=None if votes is None else tuple(int(v) for v in votes),
        )
    )


def read_json(path: PathLike) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


@dataclass
class RunConfig:
    spec: ElectorateSpec
    params: ModelParams


def load_config(path: PathLike, model: str) -> RunConfig:
    """Config document: ``{"electorate": {...}, "params": {...}}``."""
    data = read_json(path)
    _reject_unknown(data, ("electorate", "params"), str(path))
    if "electorate" not in data:
        raise ConfigError(f"{path}: missing 'electorate'")
    spec = electorate_from_dict(data["electorate"])
    params = params_from_dict(model, data.get("params", {}))
    params.validate(spec)
    return RunConfig(spec, params)


@dataclass
class ObservedSummary:
    """Reported aggregates standing in for a full results file."""

    name: str
    spec: ElectorateSpec
    stats: SummaryStats
    margins_known: bool = True


def load_observed_summary(path: PathLike) -> ObservedSummary:
    """``{"name":.., "electorate": {...}, "summary": {"seats": [...],
    "mean_vote_fraction": [...], "margin_mean": .., "margin_std": ..}}``.

    ``mean_vote_fraction`` defaults to the electorate's popularity. Missing
    margin figures are stored as 0 and flagged; give them zero distance
    weight when calibrating.
    """
    data = read_json(path)
    _reject_unknown(data, ("name", "electorate", "summary"), str(path))
    spec = electorate_from_dict(data["electorate"])
    summ = data["summary"]
    _reject_unknown(summ, ("seats", "seat_share", "mean_vote_fraction", "margin_mean", "margin_std"), "summary")
    if "seats" in summ:
        share = np.asarray(summ["seats"], dtype=float) / spec.num_districts
    else:
        share = np.asarray(summ["seat_share"], dtype=float)
    stats = SummaryStats(
        seat_share=share,
        mean_vote_fraction=summ.get("mean_vote_fraction", list(spec.popularity)),
        margin_mean=summ.get("margin_mean", 0.0),
        margin_std=summ.get("margin_std", 0.0),
    )
    known = "margin_mean" in summ and "margin_std" in summ
    return ObservedSummary(data.get("name", Path(path).stem), spec, stats, known)


@dataclass
class RunRecord:
    model: str
    params: dict
    seed: int
    spec_digest: str
    seats: list[int]
    stats: dict
    wall_time: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "model": self.model,
                "params": self.params,
                "seed": self.seed,
                "spec_digest": self.spec_digest,
                "seats": self.seats,
                "stats": self.stats,
                "wall_time": self.wall_time,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> RunRecord:
        d = json.loads(line)
        return cls(
            model=d["model"],
            params=d["params"],
            seed=int(d["seed"]),
            spec_digest=d["spec_digest"],
            seats=[int(m) for m in d["seats"]],
            stats=d["stats"],
            wall_time=float(d["wall_time"]),
        )

    def replay(self, spec: ElectorateSpec) -> TallyMatrix:
        """Re-run the simulation this record describes."""
        if spec.digest() != self.spec_digest:
            raise ValueError("spec does not match the one this run used")
        return get_model(self.model).simulate(spec, params_from_dict(self.model, self.params), self.seed)


def _header_line() -> str:
    return json.dumps({"schema": RUNS_SCHEMA, "version": RUNS_VERSION})


def _check_header(line: str, path) -> None:
    try:
        head = json.loads(line)
    except json.JSONDecodeError:
        raise SchemaVersionMismatch(f"{path}: first line is not a schema header") from None
    if not isinstance(head, dict) or head.get("schema") != RUNS_SCHEMA:
        raise SchemaVersionMismatch(f"{path}: not a run-record file")
    if head.get("version") != RUNS_VERSION:
        raise SchemaVersionMismatch(f"{path}: schema version {head.get('version')}, this reader handles {RUNS_VERSION}")


def write_runs(records: Iterable[RunRecord], path: PathLike, append: bool = False) -> None:
    """Write records; with ``append`` add to an existing file after checking
    its header."""
    path = Path(path)
    if append and path.exists() and path.stat().st_size > 0:
        with open(path, encoding="utf-8") as fh:
            _check_header(fh.readline(), path)
        mode, lines = "a", []
    else:
        mode, lines = "w", [_header_line()]
    lines.extend(r.to_json() for r in records)
    with open(path, mode, encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in lines))


def read_runs(path: PathLike) -> list[RunRecord]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise SchemaVersionMismatch(f"{path}: empty file, no schema header")
        _check_header(first, path)
        return [RunRecord.from_json(line) for line in fh if line.strip()]
