"""Command line: ``districtsim simulate | sweep | calibrate``.

Replica ``r`` of a run with base seed ``u`` uses seed ``u + r``, so any single
replica can be reproduced on its own.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import os
import sys
import time
import warnings
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .abc import ABCConfig, PriorSpec, abc_explore_exploit, calibrated_params, check_prior, default_prior
from .core import ElectorateSpec, decide_outcome, validate_spec
from .errors import DistrictSimError, NoAcceptanceWarning
from .io import (
    RunRecord,
    _reject_unknown,
    electorate_from_dict,
    load_config,
    load_observed,
    load_observed_summary,
    read_json,
    write_runs,
)
from .models import ModelParams, default_params, get_model, params_from_dict, params_to_dict, set_values
from .stats import SummaryStats, summarize

JOBS_ENV = "DISTRICTSIM_JOBS"


def _round_margins(stats: SummaryStats) -> dict:
    d = stats.to_dict()
    d["margin_mean"] = round(d["margin_mean"], 4)
    d["margin_std"] = round(d["margin_std"], 4)
    return d


def run_one(model: str, spec: ElectorateSpec, params: ModelParams, seed: int) -> RunRecord:
    start = time.perf_counter()
    tally = get_model(model).simulate(spec, params, seed)
    stats = summarize(tally, spec)
    return RunRecord(
        model=model,
        params=params_to_dict(params),
        seed=int(seed),
        spec_digest=spec.digest(),
        seats=decide_outcome(tally, spec).seats.tolist(),
        stats=_round_margins(stats),
        wall_time=round(time.perf_counter() - start, 6),
    )


def _run_star(args) -> RunRecord:
    return run_one(*args)


@contextmanager
def _mapper(jobs: int):
    if jobs <= 1:
        yield map
        return
    from multiprocessing import get_context

    with get_context("spawn").Pool(jobs) as pool:
        yield pool.imap


def run_replicas(model, spec, params, seed: int, replicas: int, jobs: int = 1) -> list[RunRecord]:
    tasks = [(model, spec, params, seed + r) for r in range(replicas)]
    with _mapper(jobs) as m:
        return list(m(_run_star, tasks))


@dataclass
class Aggregate:
    mean: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    mode: tuple[int, ...]
    margin_mean: float

    @classmethod
    def of(cls, records: Sequence[RunRecord]) -> Aggregate:
        seats = np.array([r.seats for r in records])
        counts = Counter(tuple(r.seats) for r in records)
        top = max(counts.values())
        # ties go to the seat vector closest to the mean
        mode = min(
            (s for s in counts if counts[s] == top),
            key=lambda s: (float(np.abs(np.array(s) - seats.mean(axis=0)).sum()), s),
        )
        return cls(
            mean=seats.mean(axis=0),
            minimum=seats.min(axis=0),
            maximum=seats.max(axis=0),
            mode=mode,
            margin_mean=float(np.mean([r.stats["margin_mean"] for r in records])),
        )

    def cells(self) -> list[str]:
        """``mean±half-range`` per party."""
        half = (self.maximum - self.minimum) / 2
        return [f"{m:.1f}±{h:.1f}" for m, h in zip(self.mean, half)]


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda r: "  ".join(str(x).rjust(w) for x, w in zip(r, widths))
    return "\n".join([line(header), *map(line, rows)])


def _party_labels(K: int) -> list[str]:
    return [f"party {k + 1}" for k in range(K)]


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.model)
    if args.replicas < 1:
        raise DistrictSimError("--replicas must be at least 1")
    records = run_replicas(args.model, cfg.spec, cfg.params, args.seed, args.replicas, args.jobs)
    write_runs(records, args.out)
    agg = Aggregate.of(records)
    rows = [["mean±spread", *agg.cells()], ["min", *map(str, agg.minimum)], ["max", *map(str, agg.maximum)]]
    print(f"{args.model}: {args.replicas} replicas, seeds {args.seed}..{args.seed + args.replicas - 1}")
    print(_table(["seats", *_party_labels(cfg.spec.num_parties)], rows))
    return 0


@dataclass
class SweepSpec:
    model: str
    spec: ElectorateSpec
    base_params: ModelParams
    grid: dict[str, list]
    replicas: int
    seed: int

    def cells(self) -> list[dict]:
        keys = list(self.grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def resolve(self, cell: dict) -> tuple[ElectorateSpec, ModelParams]:
        spec = self.spec
        values = dict(cell)
        if "popularity" in values:
            spec = validate_spec(dataclasses.replace(spec, popularity=tuple(values.pop("popularity")), party_vote_totals=None))
        params = set_values(self.base_params, values)
        params.validate(spec)
        return spec, params


SWEEP_KEYS = ("model", "electorate", "config", "params", "grid", "replicas", "seed")


def load_sweep(path) -> SweepSpec:
    """``{"model":.., "electorate"|"config":.., "params":{..}, "grid":{name: [values]},
    "replicas": R, "seed": U}``. ``config`` is a path to a simulate config,
    resolved against the sweep file's directory."""
    data = read_json(path)
    _reject_unknown(data, SWEEP_KEYS, str(path))
    model = get_model(data.get("model", "")).name
    if "config" in data:
        cfg = load_config(Path(path).parent / data["config"], model)
        spec, base = cfg.spec, cfg.params
        if "params" in data:
            base = set_values(base, data["params"])
    elif "electorate" in data:
        spec = electorate_from_dict(data["electorate"])
        base = params_from_dict(model, data.get("params", {}))
    else:
        raise DistrictSimError(f"{path}: sweep needs 'electorate' or 'config'")
    grid = data.get("grid", {})
    if not isinstance(grid, dict) or not grid or any(not isinstance(v, list) or not v for v in grid.values()):
        raise DistrictSimError("grid must map at least one parameter name to a non-empty list")
    replicas = int(data.get("replicas", 1))
    if replicas < 1:
        raise DistrictSimError("replicas must be at least 1")
    sweep = SweepSpec(model, spec, base, grid, replicas, int(data.get("seed", 0)))
    # validate every cell before running anything
    for cell in sweep.cells():
        sweep.resolve(cell)
    return sweep


def _cell_label(value) -> str:
    if isinstance(value, (list, tuple)):
        return "(" + ",".join(f"{v:g}" for v in value) + ")"
    return f"{value:g}" if isinstance(value, float) else str(value)


def cmd_sweep(args) -> int:
    sweep = load_sweep(args.sweep)
    K = sweep.spec.num_parties
    out = Path(args.out)
    header = [*sweep.grid, *[f"{s}_{k + 1}" for s in ("mean", "min", "max") for k in range(K)]]
    rows = []
    write_runs([], out)
    for cell in sweep.cells():
        spec, params = sweep.resolve(cell)
        records = run_replicas(sweep.model, spec, params, sweep.seed, sweep.replicas, args.jobs)
        write_runs(records, out, append=True)
        agg = Aggregate.of(records)
        rows.append(
            [
                *(_cell_label(v) for v in cell.values()),
                *(f"{m:.2f}" for m in agg.mean),
                *map(str, agg.minimum),
                *map(str, agg.maximum),
            ]
        )
    cells_path = out.with_suffix(".cells.csv")
    with open(cells_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    print(_table(header, rows))
    print(f"{len(rows)} cells x {sweep.replicas} replicas; runs in {out}, aggregates in {cells_path}")
    return 0


def _load_observed_any(path: str, num_parties: Optional[int], scale: Optional[float]):
    """Results file (.csv) or reported-aggregates document (.json)."""
    if not Path(path).exists():
        raise FileNotFoundError(f"observed file not found: {path}")
    if path.endswith(".json"):
        obs = load_observed_summary(path)
        return obs.name, obs.spec, obs.stats, None, obs.margins_known
    obs = load_observed(path, num_parties=num_parties, scale=scale)
    return obs.name, obs.spec, obs.stats, obs.seats.tolist(), True


def report_replicas(spec: ElectorateSpec) -> tuple[int, str]:
    """10 runs reported by mode for unequal districts, else mean of 100."""
    return (100, "mean") if spec.equal_districts else (10, "mode")


def cmd_calibrate(args) -> int:
    model = get_model(args.model).name
    name, spec, observed, observed_seats, margins_known = _load_observed_any(args.observed, args.parties, args.scale)
    prior = PriorSpec.from_dict(read_json(args.prior)) if args.prior else default_prior(model, spec)
    config = ABCConfig.from_dict(read_json(args.abc)) if args.abc else ABCConfig()
    check_prior(prior, model, spec)
    base = default_params(model, spec)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NoAcceptanceWarning)
        with _mapper(args.jobs) as m:
            result = abc_explore_exploit(model, spec, observed, prior, config, args.seed, base, mapper=m)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    params = calibrated_params(result, model, spec, base)
    n, how = report_replicas(spec)
    records = run_replicas(model, spec, params, args.seed, n, args.jobs)
    agg = Aggregate.of(records)
    sim_seats = list(agg.mode) if how == "mode" else agg.mean.round(2).tolist()
    sim_margin = agg.margin_mean
    if observed_seats is None:
        observed_seats = (observed.seat_share * spec.num_districts).round().astype(int).tolist()

    report = {
        "observed": {
            "seats": observed_seats,
            "margin_mean": round(observed.margin_mean, 4) if margins_known else None,
            "margin_std": round(observed.margin_std, 4) if margins_known else None,
        },
        "simulated": {
            "seats": sim_seats,
            "margin_mean": round(sim_margin, 4),
            "margin_std": round(float(np.mean([r.stats["margin_std"] for r in records])), 4),
            "replicas": n,
            "reduction": how,
        },
    }
    doc = {
        "model": model,
        "observed_name": name,
        "spec": spec.to_dict(),
        "prior": prior.to_dict(),
        "abc": config.to_dict(),
        "seed": args.seed,
        "params": params_to_dict(params),
        "result": result.to_dict(),
        "report": report,
        "report_runs": [json.loads(r.to_json()) for r in records],
    }
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    label = ", ".join(f"{k}={v:.4g}" for k, v in result.psi_opt_dict.items())
    print(f"{model} on {name}: psi_opt {label} (distance {result.psi_opt_distance:.4f}, {result.evaluations_used} evaluations)")
    if not result.accepted_any:
        print("no candidate met the acceptance threshold; reporting the best one seen")
    K = spec.num_parties
    rows = [
        ["actual", *map(str, observed_seats), f"{observed.margin_mean:.4f}" if margins_known else "NA"],
        [f"{model} ({how} of {n})", *(f"{s:g}" for s in sim_seats), f"{sim_margin:.4f}"],
    ]
    print(_table(["", *_party_labels(K), "MWM"], rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="districtsim", description="District election simulation and calibration.")
    sub = p.add_subparsers(dest="command", required=True)
    jobs = dict(type=int, default=_default_jobs(), help=f"parallel workers (default ${JOBS_ENV} or 1)")

    s = sub.add_parser("simulate", help="run replicas of one model configuration")
    s.add_argument("--model", required=True, choices=sorted(("dm", "dpm", "ecm", "pcm", "sim")))
    s.add_argument("--config", required=True)
    s.add_argument("--replicas", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", **jobs)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="run a parameter grid")
    w.add_argument("--sweep", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--jobs", **jobs)
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("calibrate", help="fit a model to an observed election")
    c.add_argument("--model", required=True, choices=sorted(("dm", "dpm", "ecm", "pcm", "sim")))
    c.add_argument("--observed", required=True)
    c.add_argument("--prior")
    c.add_argument("--abc")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.add_argument("--parties", type=int, help="keep only the leading parties of a results file")
    c.add_argument("--scale", type=float, help="shrink a results file's vote counts by this factor")
    c.add_argument("--jobs", **jobs)
    c.set_defaults(func=cmd_calibrate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DistrictSimError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
