"""Command-line pipeline: ingest -> partition -> clear -> report.

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 verification
failure. All outputs are deterministic for fixed seeds and inputs; wall-clock
timestamps only ever appear in a ``metadata`` field of JSON outputs.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import clearing, quantize, scenarios
from .errors import SolverFailure, ValidationError, VerificationFailure
from .market import ContractGrid, load_bids_json

ENDPOINT_ENV = "STATEMARKET_ENDPOINT"
SWEEP_VALUES = [round(0.1 * i, 1) for i in range(11)]


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture (scenario CSV or bid JSON)."""
    return Path(str(resources.files("statemarket") / "fixtures" / name))


@dataclass
class RunConfig:
    command: str
    scenarios: Path | None = None
    out: Path | None = None
    states: int = 2
    solver: str = "lloyd"
    restarts: int = 64
    seed: int = 0
    tolerance: float = 1e-6
    bids: Path | None = None
    sweep_pi: bool = False
    svg: Path | None = None
    endpoint: str | None = None
    locations: tuple[tuple[float, float], ...] = ()
    target_time: str | None = None
    cache_dir: Path = Path("cache")
    dimension: int | None = None
    result: Path | None = None
    partition: Path | None = None
    payments: Path | None = None

    def __post_init__(self) -> None:
        for attr in ("scenarios", "bids", "result", "partition", "payments"):
            path = getattr(self, attr)
            if path is not None and not Path(path).exists():
                raise ValidationError(f"--{attr.replace('_', '-')}: {path} does not exist")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


def _infer_dimension(path: Path) -> int:
    with open(path, newline="") as handle:
        header = next(csv.reader(handle))
    return max(len(header) - 2, 1)


def _load_scenarios(config: RunConfig) -> scenarios.ScenarioSet:
    k = config.dimension or _infer_dimension(config.scenarios)
    return scenarios.load_scenarios_csv(config.scenarios, k)


def cmd_ingest(config: RunConfig) -> int:
    if config.endpoint:
        if not config.locations:
            raise ValidationError("ingest from an endpoint needs at least one --location")
        scen = scenarios.fetch_ensemble(
            config.endpoint,
            config.locations,
            config.target_time or _now(),
            cache_dir=config.cache_dir,
        )
    elif config.scenarios:
        scen = _load_scenarios(config)
    else:
        raise ValidationError("ingest needs --scenarios or an endpoint")
    if config.out is None:
        raise ValidationError("ingest needs --out")
    scenarios.write_scenarios_csv(scen, config.out)
    variance = quantize.size_of_state(scen, range(scen.num_scenarios))
    mean = ", ".join(f"{v:.6g}" for v in scen.mean())
    print(f"scenarios: L={scen.num_scenarios} k={scen.dimension}")
    print(f"mean: ({mean})  variance: {variance:.6g}")
    print(f"written: {config.out}")
    return 0


_SOLVERS = ("exact", "lloyd", "dp1d")


def cmd_partition(config: RunConfig) -> int:
    if config.scenarios is None or config.out is None:
        raise ValidationError("partition needs --scenarios and --out")
    if config.solver not in _SOLVERS:
        raise ValidationError(f"--solver must be one of {_SOLVERS}")
    scen = _load_scenarios(config)
    if config.solver == "exact":
        solution = quantize.solve_exact(scen, config.states)
    elif config.solver == "dp1d":
        solution = quantize.solve_dp_1d(scen, config.states)
    else:
        solution = quantize.solve_lloyd(
            scen, config.states, restarts=config.restarts, seed=config.seed
        )
    solution.dump_json(
        config.out,
        metadata={"created_at": _now(), "source": str(config.scenarios)},
    )
    text = quantize.describe_states(solution)
    Path(config.out).with_suffix(".states.txt").write_text(text, encoding="utf-8")
    if config.svg is not None:
        quantize.export_partition_svg(solution, config.svg)
    bound = "" if solution.lower_bound is None else f" lower_bound={solution.lower_bound:.9g}"
    print(f"objective: {solution.objective:.9g} (solver: {solution.provenance}{bound})")
    print(text, end="")
    print(f"written: {config.out}")
    return 0


def _coord_label(dims, coord) -> str:
    n, t, s = coord
    if dims.nodes == 1 and dims.periods == 1:
        return str(s + 1)
    return f"{n}_{t}_{s + 1}"


def _sweep_table(
    dims, bids, results: list[tuple[float, clearing.ClearingResult]]
) -> tuple[list[str], list[list[float]]]:
    coords = list(dims.coordinates())
    header = ["pi1", "pi2"]
    for bid in bids:
        for coord in sorted(bid.utilities):
            header.append(f"x_{bid.agent_id}_{_coord_label(dims, coord)}")
        for decision in bid.decisions:
            header.append(f"z_{bid.agent_id}_{decision.name}")
    header += [f"lambda_{_coord_label(dims, coord)}" for coord in coords]
    table = []
    for pi1, result in results:
        row = [pi1, round(1.0 - pi1, 1)]
        for bid in bids:
            grid = result.allocations[bid.agent_id].values
            row += [float(grid[coord]) for coord in sorted(bid.utilities)]
            row += [result.decisions[bid.agent_id][d.name] for d in bid.decisions]
        row += [float(result.prices.values[coord]) for coord in coords]
        table.append(row)
    return header, table


def _write_csv(path: Path, header: list[str], rows: list[list[float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(v, ".12g") for v in row])


def cmd_clear(config: RunConfig) -> int:
    if config.bids is None or config.out is None:
        raise ValidationError("clear needs --bids and --out")
    bids, dims = load_bids_json(config.bids)
    out = Path(config.out)
    prices_csv = out.with_suffix(".prices.csv")
    created = {"created_at": _now(), "bids": str(config.bids)}

    if config.sweep_pi:
        results = clearing.sweep_two_state_beliefs(
            bids, dims, SWEEP_VALUES, tol=config.tolerance
        )
        header, table = _sweep_table(dims, bids, results)
        _write_csv(prices_csv, header, table)
        payload = {
            "sweep": [
                {"pi1": pi1, "result": result.to_dict()} for pi1, result in results
            ],
            "metadata": created,
        }
        out.write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        worst = max(
            max(r.verification.gaps.values()) for _, r in results
        )
        print(f"sweep: {len(results)} clearings, max best-response gap {worst:.3g}")
        print(f"written: {out} and {prices_csv}")
        if any(not r.verification.confirmed for _, r in results):
            raise VerificationFailure("some sweep points failed equilibrium verification")
        return 0

    result = clearing.clear_bids(bids, dims, tol=config.tolerance)
    result.dump_json(out, metadata=created)
    rows = [
        [float(n), float(t), float(s + 1), float(result.prices.values[n, t, s])]
        for (n, t, s) in dims.coordinates()
    ]
    _write_csv(prices_csv, ["node", "period", "state", "price"], rows)
    print(f"welfare: {result.welfare:.9g}")
    for agent in result.agent_ids:
        z = result.decisions[agent]
        z_text = f" z={z}" if z else ""
        print(
            f"  {agent}: x={result.allocations[agent].values.ravel().tolist()}"
            f"{z_text} surplus={result.surplus[agent]:.6g}"
        )
    print(f"prices: {result.prices.values.ravel().tolist()}")
    print(f"written: {out} and {prices_csv}")
    if not result.verification.confirmed:
        raise VerificationFailure(
            f"best-response gaps exceed tolerance: {result.verification.gaps}"
        )
    return 0


def cmd_report(config: RunConfig) -> int:
    if config.result is None and config.partition is None and config.payments is None:
        raise ValidationError("report needs --result, --partition, or --payments")
    if config.partition is not None:
        payload = json.loads(Path(config.partition).read_text(encoding="utf-8"))
        try:
            solution = quantize.QuantizationSolution.from_dict(payload)
        except (KeyError, TypeError) as exc:
            raise ValidationError(
                f"{config.partition} is not a partition solution file ({exc!r})"
            ) from None
        print(quantize.describe_states(solution), end="")
    if config.result is not None:
        payload = json.loads(Path(config.result).read_text(encoding="utf-8"))
        results = [e["result"] for e in payload["sweep"]] if "sweep" in payload else [payload]
        for entry in results:
            try:
                verification = entry["verification"]
                print(f"welfare: {entry['welfare']:.9g}")
                print(f"prices: {entry['prices']}")
                print(
                    f"balance residual {verification['balance_residual']:.3g}, "
                    f"budget residual {verification['budget_residual']:.3g}, "
                    f"confirmed: {verification['confirmed']}"
                )
                for agent, surplus in sorted(entry["surplus"].items()):
                    print(
                        f"  {agent}: surplus {surplus:.6g}, "
                        f"gap {verification['gaps'][agent]:.3g}"
                    )
            except (KeyError, TypeError) as exc:
                raise ValidationError(
                    f"{config.result} is not a clearing result file ({exc!r})"
                ) from None
    if config.payments is not None:
        payload = json.loads(Path(config.payments).read_text(encoding="utf-8"))
        prices = ContractGrid(np.asarray(payload["prices"], dtype=float))
        from .market import payment  # local: tiny helper use

        for agent, position in sorted(payload["positions"].items()):
            grid = ContractGrid(np.asarray(position, dtype=float))
            paid = payment(prices, grid)
            direction = "pays" if paid >= 0 else "receives"
            print(f"  {agent}: {direction} {abs(paid):.6g}")
    return 0


def _parse_location(text: str) -> tuple[float, float]:
    try:
        lat, lon = text.split(",")
        return float(lat), float(lon)
    except ValueError:
        raise ValidationError(f"--location must be 'lat,lon', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statemarket",
        description="State-contingent day-ahead market pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="fetch or load scenarios, write CSV + cache")
    ingest.add_argument("--scenarios", type=Path, help="input scenario CSV")
    ingest.add_argument("--endpoint", help=f"ensemble endpoint (or ${ENDPOINT_ENV})")
    ingest.add_argument("--location", action="append", default=[], metavar="LAT,LON")
    ingest.add_argument("--target-time", help="ISO-8601 realization time")
    ingest.add_argument("--cache-dir", type=Path, default=Path("cache"))
    ingest.add_argument("--k", type=int, dest="dimension")
    ingest.add_argument("--out", type=Path, required=True)

    partition = sub.add_parser("partition", help="compute a minimal-size state partition")
    partition.add_argument("--scenarios", type=Path, required=True)
    partition.add_argument("--states", type=int, default=2)
    partition.add_argument("--solver", choices=_SOLVERS, default="lloyd")
    partition.add_argument("--restarts", type=int, default=64)
    partition.add_argument("--seed", type=int, default=0)
    partition.add_argument("--svg", type=Path)
    partition.add_argument("--k", type=int, dest="dimension")
    partition.add_argument("--out", type=Path, required=True)

    clear_cmd = sub.add_parser("clear", help="clear a bid file to allocation and prices")
    clear_cmd.add_argument("--bids", type=Path, required=True)
    clear_cmd.add_argument("--sweep-pi", action="store_true")
    clear_cmd.add_argument("--tolerance", type=float, default=1e-6)
    clear_cmd.add_argument("--out", type=Path, required=True)

    report = sub.add_parser("report", help="summarize produced JSON artifacts")
    report.add_argument("--result", type=Path)
    report.add_argument("--partition", type=Path)
    report.add_argument("--payments", type=Path)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    endpoint = getattr(args, "endpoint", None) or os.environ.get(ENDPOINT_ENV)
    return RunConfig(
        command=args.command,
        scenarios=getattr(args, "scenarios", None),
        out=getattr(args, "out", None),
        states=getattr(args, "states", 2),
        solver=getattr(args, "solver", "lloyd"),
        restarts=getattr(args, "restarts", 64),
        seed=getattr(args, "seed", 0),
        tolerance=getattr(args, "tolerance", 1e-6),
        bids=getattr(args, "bids", None),
        sweep_pi=getattr(args, "sweep_pi", False),
        svg=getattr(args, "svg", None),
        endpoint=endpoint,
        locations=tuple(_parse_location(v) for v in getattr(args, "location", [])),
        target_time=getattr(args, "target_time", None),
        cache_dir=getattr(args, "cache_dir", Path("cache")),
        dimension=getattr(args, "dimension", None),
        result=getattr(args, "result", None),
        partition=getattr(args, "partition", None),
        payments=getattr(args, "payments", None),
    )


_COMMANDS = {
    "ingest": cmd_ingest,
    "partition": cmd_partition,
    "clear": cmd_clear,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        return _COMMANDS[config.command](config)
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 3
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
