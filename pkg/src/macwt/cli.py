"""Scenario files, experiment dispatch and artifact emission.

A scenario is a JSON object; see ``docs/scenario.md`` for the schema. Every run
writes its CSV/JSON artifacts plus ``manifest.json`` into the output directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .channel import InputDistribution, MacWiretapChannel, info_terms, load_channel, noisy_xor_channel
from .codec import SCENARIOS, build_codebook, exact_leakage
from .exceptions import CapacityError, ScenarioError
from .fading import FADING_HEADER, GainModel, policy_from_dict, run_fading
from .protocol import LEDGER_HEADER, SlotConfig, SlotRates, run_protocol
from .regions import hull_over_inputs, ramp_schedule, schedule_rows, uniform_grid

MODES = ("region", "ramp", "protocol", "leakage-audit", "fading")
FADING_FIELDS = ("gain_model", "power_policy")
EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_INTERNAL = 0, 2, 3, 4
DEFAULT_HORIZON = 1000
MAX_SEED = 2**64 - 1

REGION_HEADER = ("r1", "r2")
SCHEDULE_HEADER = ("slot", "r1_part2", "r2_part2", "r1_avg", "r2_avg")
LEAKAGE_HEADER = ("scenario", "quantity", "value_bits", "budget_bits", "satisfied")
OVERLAY_HEADER = ("region", "vertex", "r1", "r2")
STAIRCASE_HEADER = ("slot", "r1", "r2")
BUFFER_HEADER = ("slot", "buffer1", "buffer2")
LEAKAGE_CURVE_HEADER = ("n", "value_bits", "value_rate")


@dataclass(frozen=True)
class Scenario:
    mode: str
    seed: int
    channel: object = None  # absolute path string or inline dict
    grid: dict = field(default_factory=lambda: {"points_per_user": 11})
    inputs: dict = None  # {"p1": [...], "p2": [...]}; uniform when absent
    slot: dict = None  # SlotConfig fields
    rates: dict = None  # explicit {"secrecy": [..], "capacity": [..]} for protocol mode
    leakage: dict = None
    gain_model: dict = None
    power_policy: dict = None
    noise: tuple = (1.0, 1.0)
    csi: str = "full"
    horizon: int = None

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if v is not None}
        out["noise"] = list(self.noise)
        return out

    @property
    def slot_config(self):
        return SlotConfig(**(self.slot or {"n1": 8, "l": 4}))

    def scenario_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _fail(message):
    raise ScenarioError(message)


def _validate(data, base_dir):
    if not isinstance(data, dict):
        _fail("scenario must be a JSON object")
    known = set(Scenario.__dataclass_fields__)
    unknown = sorted(set(data) - known)
    if unknown:
        _fail(f"unknown scenario fields {unknown}")
    mode = data.get("mode")
    if mode not in MODES:
        _fail(f"mode: expected one of {list(MODES)}, got {mode!r}")
    seed = data.get("seed")
    if seed is None:
        _fail("seed: required (no ambient randomness)")
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        _fail(f"seed: expected an unsigned 64-bit integer, got {seed!r}")

    for name in FADING_FIELDS:
        if mode == "fading" and name not in data:
            _fail(f"{name}: required in fading mode")
        if mode != "fading" and name in data:
            _fail(f"{name}: only allowed in fading mode")

    channel = data.get("channel")
    needs_channel = mode in ("region", "ramp", "protocol") or (
        mode == "leakage-audit" and (data.get("leakage") or {}).get("scenario") != "otp"
    )
    if needs_channel and channel is None:
        _fail(f"channel: required in {mode} mode")
    if isinstance(channel, str):
        path = Path(channel)
        if not path.is_absolute():
            path = (base_dir / path).resolve()
        if not path.is_file():
            _fail(f"channel: file {str(path)!r} does not exist")
        data["channel"] = str(path)
    elif channel is not None and not isinstance(channel, dict):
        _fail("channel: expected a file path or an inline object")

    if mode == "leakage-audit":
        leak = data.get("leakage")
        if not isinstance(leak, dict):
            _fail("leakage: required in leakage-audit mode")
        if leak.get("scenario") not in SCENARIOS:
            _fail(f"leakage.scenario: expected one of {list(SCENARIOS)}")
    if "horizon" in data and data["horizon"] is not None:
        h = data["horizon"]
        if isinstance(h, bool) or not isinstance(h, int) or h < 1:
            _fail(f"horizon: expected a positive integer, got {h!r}")
    if "noise" in data:
        noise = data["noise"]
        if len(noise) != 2 or min(noise) <= 0:
            _fail("noise: expected two positive variances")
        data["noise"] = tuple(float(v) for v in noise)
    if data.get("csi", "full") not in ("full", "receiver"):
        _fail("csi: expected 'full' or 'receiver'")
    if "grid" in data:
        ppu = data["grid"].get("points_per_user", 11)
        if isinstance(ppu, bool) or not isinstance(ppu, int) or ppu < 2:
            _fail("grid.points_per_user: expected an integer >= 2")
    if data.get("slot") is not None:
        try:
            SlotConfig(**data["slot"])
        except (TypeError, ValueError) as exc:
            _fail(f"slot: {exc}")
    return Scenario(**data)


def parse_scenario(text, base_dir=".", source="<scenario>"):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return _validate(data, Path(base_dir))


def load_scenario(path):
    """Read and validate a scenario file; relative channel paths resolve against it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {str(path)!r}: {exc.strerror}") from None
    return parse_scenario(text, path.parent, str(path))


def emit_scenario(scenario, path):
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# building blocks


def resolve_channel(spec):
    if isinstance(spec, str):
        return load_channel(spec)
    kind = spec.get("kind", "law")
    if kind == "noisy_xor":
        return noisy_xor_channel(spec["bob_flip"], spec["eve_flip"], spec.get("eve", "xor"))
    if kind == "law":
        return MacWiretapChannel.from_dict(spec)
    raise ScenarioError(f"channel.kind: unknown channel kind {kind!r}")


def _input_law(scenario, ch):
    if scenario.inputs is None:
        return InputDistribution.uniform(ch.x1_size, ch.x2_size)
    return InputDistribution(scenario.inputs["p1"], scenario.inputs["p2"])


def _user_seeds(seed):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(2, dtype=np.uint32)]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row if isinstance(row, dict) else dict(zip(header, row)))
    return Path(path)


@dataclass
class Artifacts:
    """In-memory results of a run, used for plot data."""

    regions: dict = field(default_factory=dict)  # name -> RateRegion
    schedule: object = None
    slot_config: SlotConfig = None
    buffers: np.ndarray = None  # (K + 1, 2): buffer at the start of slots 1 .. K + 1
    leakage_curve: list = field(default_factory=list)  # (n, value_bits)
    outputs: list = field(default_factory=list)  # (path, module, operation)


# ---------------------------------------------------------------------------
# mode runners


def _run_region(sc, out, art):
    ch = resolve_channel(sc.channel)
    grid = uniform_grid(ch, sc.grid.get("points_per_user", 11))
    for which in ("secrecy", "capacity"):
        region = hull_over_inputs(ch, grid, which)
        art.regions[which] = region
        p = write_csv(out / f"region_{which}.csv", REGION_HEADER, region.to_csv_rows())
        art.outputs.append((p, "rate-regions", "hull_over_inputs"))


def _run_ramp(sc, out, art):
    ch = resolve_channel(sc.channel)
    schedule = ramp_schedule(info_terms(ch, _input_law(sc, ch)))
    cfg = sc.slot_config
    art.schedule, art.slot_config = schedule, cfg
    p = write_csv(out / "schedule.csv", SCHEDULE_HEADER, schedule_rows(schedule, cfg.l))
    art.outputs.append((p, "rate-regions", "ramp_schedule"))


def _run_protocol(sc, out, art, horizon):
    cfg = sc.slot_config
    if sc.rates is not None:
        rates = SlotRates(tuple(sc.rates["secrecy"]), tuple(sc.rates["capacity"]))
    else:
        ch = resolve_channel(sc.channel)
        schedule = ramp_schedule(info_terms(ch, _input_law(sc, ch)))
        art.schedule = schedule
        rates = SlotRates.from_schedule(schedule)
    run = run_protocol(cfg, rates, horizon)
    art.buffers, art.slot_config = run.buffers, cfg
    p = write_csv(out / "protocol_ledger.csv", LEDGER_HEADER, run.ledger_rows())
    art.outputs.append((p, "slot-protocol", "run_protocol"))
    summary = {
        "horizon": run.horizon,
        "n2_1": run.n2[0],
        "n2_2": run.n2[1],
        "window_start_1": run.window_start[0],
        "window_start_2": run.window_start[1],
        "avg_rate_1": run.avg_rate[0],
        "avg_rate_2": run.avg_rate[1],
        "avg_keyed_rate_1": run.avg_keyed_rate[0],
        "avg_keyed_rate_2": run.avg_keyed_rate[1],
        "buffer_final_1": int(run.buffers[-1, 0]),
        "buffer_final_2": int(run.buffers[-1, 1]),
    }
    p = out / "protocol_summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    art.outputs.append((p, "slot-protocol", "run_protocol"))


def _run_leakage(sc, out, art):
    leak = sc.leakage
    scenario = leak["scenario"]
    eps = sc.slot_config.epsilon
    rows = []
    if scenario == "otp":
        lengths = leak.get("message_bits", 8)
        for bits in lengths if isinstance(lengths, list) else [lengths]:
            budget = leak.get("budget_bits", bits * eps)
            rep = exact_leakage(None, None, "otp", budget_bits=budget, message_bits=bits)
            rows.append(rep.as_row(f"otp@bits={bits}"))
    else:
        ch = resolve_channel(sc.channel)
        q = _input_law(sc, ch)
        s1, s2 = _user_seeds(sc.seed)
        ns = leak.get("n", [4])
        ns = ns if isinstance(ns, list) else [ns]
        for n in ns:
            mb, cbits = n * leak.get("message_rate", 0.125), n * leak.get("confusion_rate", 0.25)
            cb1 = build_codebook(ch, q, 1, n, mb, cbits, s1)
            cb2 = build_codebook(ch, q, 2, n, mb, cbits, s2)
            keyed = None
            if scenario == "two_slot":
                n2 = leak.get("n2", n)
                keyed = (
                    build_codebook(ch, q, 1, n2, cb1.message_bits, 0, s1 + 1),
                    build_codebook(ch, q, 2, n2, cb2.message_bits, 0, s2 + 1),
                )
            budget = leak.get("budget_bits", n * eps)
            rep = exact_leakage(ch, (cb1, cb2), scenario, user=leak.get("user", 1), budget_bits=budget, keyed=keyed)
            rows.append(rep.as_row(f"{scenario}@n={n}"))
            art.leakage_curve.append((n, rep.value_bits))
            for cb in (cb1, cb2):
                p = out / f"codebook_n{n}_user{cb.user}.bin"
                p.write_bytes(cb.to_bytes())
                art.outputs.append((p, "binning-codec", "build_codebook"))
    p = write_csv(out / "leakage.csv", LEAKAGE_HEADER, rows)
    art.outputs.append((p, "binning-codec", "exact_leakage"))


def _run_fading(sc, out, art, horizon):
    cfg = sc.slot_config
    model = GainModel(sc.gain_model["families"] if "families" in sc.gain_model else sc.gain_model, sc.seed)
    policy = policy_from_dict(sc.power_policy)
    report, ledger = run_fading(model, policy, cfg, sc.noise, horizon, sc.csi)
    # same convention as protocol runs: row k holds the buffer at the start of slot k + 1
    art.buffers, art.slot_config = np.vstack([[0, 0], ledger.buffers]), cfg
    p = write_csv(out / "fading_ledger.csv", FADING_HEADER, ledger.rows())
    art.outputs.append((p, "fading-sim", "run_fading"))
    p = out / "ergodic.json"
    p.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    art.outputs.append((p, "fading-sim", "run_fading"))


# ---------------------------------------------------------------------------
# plot data


def emit_plotdata(artifacts, out):
    """Plot-ready CSVs for whatever the run produced; returns the written paths.

    Region overlay, rate staircase, buffer trajectory and leakage against
    blocklength. A present but empty series still gets a header-only file.
    """
    out = Path(out)
    written = []
    if artifacts.regions:
        rows = [
            (name, i, repr(x), repr(y))
            for name, region in sorted(artifacts.regions.items())
            for i, (x, y) in enumerate(region.vertices)
        ]
        written.append(write_csv(out / "plot_region_overlay.csv", OVERLAY_HEADER, rows))
    if artifacts.schedule is not None:
        rows = [(r["slot"], r["r1_part2"], r["r2_part2"]) for r in schedule_rows(artifacts.schedule, 1)]
        written.append(write_csv(out / "plot_staircase.csv", STAIRCASE_HEADER, rows))
    if artifacts.buffers is not None:
        rows = [(k + 1, int(b1), int(b2)) for k, (b1, b2) in enumerate(artifacts.buffers)]
        written.append(write_csv(out / "plot_buffer_trajectory.csv", BUFFER_HEADER, rows))
    if artifacts.leakage_curve:
        rows = [(n, repr(v), repr(v / n)) for n, v in artifacts.leakage_curve]
        written.append(write_csv(out / "plot_leakage_vs_n.csv", LEAKAGE_CURVE_HEADER, rows))
    return written


# ---------------------------------------------------------------------------
# orchestration


@dataclass
class RunResult:
    exit_code: int
    artifacts: Artifacts
    manifest: dict
    error: dict = None


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions():
    from importlib.metadata import PackageNotFoundError, version

    try:
        pkg = version("artifact")
    except PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "package": pkg}


def run(scenario, out, seed=None, horizon=None):
    """Execute a scenario into ``out``; never raises, returns a :class:`RunResult`.

    Artifact files depend only on the scenario; ``manifest.json`` also records
    the start time and wall time.
    """
    out = Path(out)
    if seed is not None:
        scenario = Scenario(**{**asdict(scenario), "seed": seed})
    if horizon is not None:
        scenario = Scenario(**{**asdict(scenario), "horizon": horizon})
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    art = Artifacts()
    error = None
    code = EXIT_OK
    try:
        out.mkdir(parents=True, exist_ok=True)
        K = scenario.horizon or DEFAULT_HORIZON
        if scenario.mode == "region":
            _run_region(scenario, out, art)
        elif scenario.mode == "ramp":
            _run_ramp(scenario, out, art)
        elif scenario.mode == "protocol":
            _run_protocol(scenario, out, art, K)
        elif scenario.mode == "leakage-audit":
            _run_leakage(scenario, out, art)
        else:
            _run_fading(scenario, out, art, K)
        for p in emit_plotdata(art, out):
            art.outputs.append((p, "cli-runner", "emit_plotdata"))
    except CapacityError as exc:
        code, error = EXIT_CAPACITY, {"type": "CapacityError", "message": str(exc), "support_size": exc.support_size}
    except (ScenarioError, ValueError, KeyError, TypeError) as exc:
        code, error = EXIT_VALIDATION, {"type": type(exc).__name__, "message": str(exc)}
    except Exception as exc:  # noqa: BLE001
        code, error = EXIT_INTERNAL, {"type": type(exc).__name__, "message": str(exc)}

    manifest = {
        "scenario_hash": scenario.scenario_hash(),
        "seed": scenario.seed,
        "mode": scenario.mode,
        "started_at": started,
        "elapsed_ms": round((time.perf_counter() - t0) * 1000, 3),
        "versions": _versions(),
        "exit_code": code,
        "outputs": [
            {"path": p.name, "module": module, "operation": op, "sha256": _sha256(p)}
            for p, module, op in art.outputs
        ],
    }
    if error is not None:
        error["exit_code"] = code
        manifest["error"] = error
    if out.is_dir():
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(code, art, manifest, error)


def build_parser():
    parser = argparse.ArgumentParser(prog="macwt", description="MAC wiretap experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run a {mode} scenario")
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--horizon", type=int, help="override the number of slots")
    return parser


def _error_exit(code, error):
    error = {**error, "exit_code": code}
    print(json.dumps(error, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        if scenario.mode != args.command:
            _fail(f"mode: scenario is {scenario.mode!r} but the subcommand is {args.command!r}")
        if args.seed is not None and not 0 <= args.seed <= MAX_SEED:
            _fail("seed: expected an unsigned 64-bit integer")
        if args.horizon is not None and args.horizon < 1:
            _fail("horizon: expected a positive integer")
    except ScenarioError as exc:
        return _error_exit(EXIT_VALIDATION, {"type": "ScenarioError", "message": str(exc)})
    result = run(scenario, args.out, seed=args.seed, horizon=args.horizon)
    if result.error is not None:
        print(json.dumps(result.error, sort_keys=True), file=sys.stderr)
    else:
        print(json.dumps({"mode": scenario.mode, "outputs": [o["path"] for o in result.manifest["outputs"]]}))
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
