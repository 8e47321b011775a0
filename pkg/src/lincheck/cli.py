"""``lincheck``: check histories, simulate stack programs, decide bounded refinements.

Exit codes: 0 success or holds, 1 negative verdict, 2 input error,
3 enumeration cap exceeded.
"""

from __future__ import annotations

import functools
import json
import os
import sys
import time
from typing import Any, Optional

import click

from .commands import Cmd, Enf
from .executor import (
    CapError, GeneratorError, Mode, check_behaviour_refinement, check_data_refinement,
    enumerate_streams, extract_history,
)
from .histories import (
    HistoryError, history_from_json, history_to_json, legal, linearisable_hw, load_history,
)
from .intervals import FALSE, dump_trace
from .stacks import (
    PROGRAMS, ConfigError, StackConfig, abstract_states, build_program, fused_witness,
    history_var, sim_candidates, sim_ts, stack_oracle, writes_top,
)

PROC_NAMES = ("p", "q", "r", "s", "u", "v", "w")

# programs whose runs record a history, for those that do not
RECORDED = {"AS": "HAS", "BS": "HAS", "LS": "HLS", "TS": "HTS"}

ENF_FALSE = "enf-false:"

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


def _parse_valdom(text: str) -> tuple:
    try:
        vals = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise InputError(f"--valdom/--values expects comma-separated integers, got {text!r}") from None
    if not vals:
        raise InputError("the value domain must be nonempty")
    return vals


def _procs(n: int) -> tuple:
    if not 1 <= n <= len(PROC_NAMES):
        raise InputError(f"--procs must lie in 1..{len(PROC_NAMES)}")
    return PROC_NAMES[:n]


def _config(procs: int, ops: int, values: str) -> StackConfig:
    try:
        return StackConfig(processes=_procs(procs), valdom=_parse_valdom(values), ops_per_proc=ops)
    except ConfigError as exc:
        raise InputError(str(exc)) from None


def _program(name: str, cfg: StackConfig) -> Cmd:
    """A named program, or ``enf-false:NAME`` for ``NAME`` under an unsatisfiable enforcement."""
    try:
        if name.lower().startswith(ENF_FALSE):
            return Enf(FALSE, build_program(name[len(ENF_FALSE):], cfg))
        return build_program(name, cfg)
    except ConfigError as exc:
        raise InputError(str(exc)) from None


def _default_mode(mode: Optional[str], cfg: StackConfig) -> str:
    if mode:
        return mode
    total = sum(cfg.ops_of(p) for p in cfg.processes)
    return "exhaustive" if total <= 2 else "random"


def _emit(obj: Any, as_json: bool, text: str) -> None:
    click.echo(json.dumps(obj, indent=1, sort_keys=True) if as_json else text)


def _timing(start: float) -> None:
    click.echo(f"[{time.perf_counter() - start:.2f}s]", err=True)


@click.group()
def main() -> None:
    """Bounded linearisability and refinement checking for concurrent stacks."""


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--spec", type=click.Choice(["stack"]), default="stack", show_default=True)
@click.option("--valdom", default="1,2", show_default=True, help="Comma-separated value domain.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable report.")
def check(file: str, spec: str, valdom: str, as_json: bool) -> None:
    """Decide whether the history in FILE is linearisable."""
    start = time.perf_counter()
    vals = _parse_valdom(valdom)
    try:
        h = load_history(file)
    except (OSError, ValueError, HistoryError) as exc:
        raise InputError(f"cannot read history {file!r}: {exc}") from None
    # an illegal history parses but has no linearisation
    is_legal = legal(h)
    hs = linearisable_hw(h, stack_oracle(), vals) if is_legal else None
    report = {
        "command": "check",
        "config": {"file": os.path.basename(file), "spec": spec, "valdom": list(vals)},
        "legal": is_legal,
        "linearisable": hs is not None,
        "witness": history_to_json(hs) if hs is not None else None,
    }
    if hs is not None:
        text = f"linearisable; witness: {hs}"
    else:
        text = "not linearisable" + ("" if is_legal else " (illegal history)")
    _emit(report, as_json, text)
    _timing(start)
    sys.exit(EXIT_OK if hs is not None else EXIT_NEGATIVE)


@main.command()
@click.option("--program", "program", required=True, help=f"One of {', '.join(PROGRAMS)}.")
@click.option("--procs", default=2, show_default=True)
@click.option("--ops", default=1, show_default=True, help="Operations per process.")
@click.option("--values", default="1,2", show_default=True)
@click.option("--horizon", default=24, show_default=True, help="Maximum number of states per stream.")
@click.option("--schedule", type=click.Choice(["exhaustive", "random"]), default=None,
              help="Default: exhaustive for at most two operations in total, otherwise random.")
@click.option("--seed", default=0, show_default=True)
@click.option("--samples", default=1000, show_default=True, help="Random walks in random mode.")
@click.option("--emit-histories", "emit_dir", type=click.Path(file_okay=False), default=None)
@click.option("--dump-trace", "dump", is_flag=True, help="Print every generated stream.")
@click.option("--json", "as_json", is_flag=True)
def simulate(program: str, procs: int, ops: int, values: str, horizon: int, schedule: Optional[str],
             seed: int, samples: int, emit_dir: Optional[str], dump: bool, as_json: bool) -> None:
    """Generate the streams of a stack program and extract their histories."""
    start = time.perf_counter()
    cfg = _config(procs, ops, values)
    name = program.upper()
    run_name = RECORDED.get(name, name) if emit_dir else name
    C = _program(run_name, cfg)
    mode = _default_mode(schedule, cfg)
    try:
        streams = enumerate_streams(C, cfg.processes, (), horizon, cfg.valdom,
                                    Mode.of(mode, seed, samples))
    except CapError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CAP)
    except GeneratorError as exc:
        raise InputError(str(exc)) from None

    hvar = history_var(run_name)
    histories: list = []
    if hvar is not None:
        seen = {json.dumps(history_to_json(extract_history(s, hvar)), sort_keys=True) for s in streams}
        histories = sorted(seen)
    oracle = stack_oracle()
    n_lin = sum(linearisable_hw(history_from_json(h), oracle, cfg.valdom) is not None for h in histories)
    if emit_dir:
        os.makedirs(emit_dir, exist_ok=True)
        for i, h in enumerate(histories):
            with open(os.path.join(emit_dir, f"history_{i:05d}.json"), "w", encoding="utf-8") as fh:
                fh.write(json.dumps(json.loads(h), indent=1) + "\n")
    if dump:
        for i, s in enumerate(streams):
            click.echo(f"# stream {i}")
            click.echo(dump_trace(s))
    report = {
        "command": "simulate",
        "config": {"program": name, "run": run_name, "procs": list(cfg.processes), "ops": ops,
                   "values": list(cfg.valdom), "horizon": horizon, "schedule": mode, "seed": seed,
                   "samples": samples if mode == "random" else None},
        "streams": len(streams),
        "histories": len(histories),
        "linearisable": n_lin,
    }
    text = (f"{name}: {len(streams)} streams ({mode}), {len(histories)} distinct histories, "
            f"{n_lin} linearisable")
    _emit(report, as_json, text)
    _timing(start)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--abstract", "abstract", required=True)
@click.option("--concrete", "concrete", required=True)
@click.option("--kind", type=click.Choice(["behaviour", "data"]), default="behaviour", show_default=True)
@click.option("--sim", type=click.Choice(["simts"]), default=None)
@click.option("--procs", default=2, show_default=True)
@click.option("--ops", default=1, show_default=True)
@click.option("--values", default="1,2", show_default=True)
@click.option("--horizon", default=24, show_default=True)
@click.option("--mode", type=click.Choice(["exhaustive", "random"]), default=None)
@click.option("--seed", default=0, show_default=True)
@click.option("--samples", default=1000, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def refine(abstract: str, concrete: str, kind: str, sim: Optional[str], procs: int, ops: int, values: str,
           horizon: int, mode: Optional[str], seed: int, samples: int, as_json: bool) -> None:
    """Decide a bounded behaviour or data refinement between two stack programs."""
    start = time.perf_counter()
    cfg = _config(procs, ops, values)
    A, C = _program(abstract, cfg), _program(concrete, cfg)
    mode = _default_mode(mode, cfg)
    P = cfg.processes
    try:
        if kind == "behaviour":
            verdict = check_behaviour_refinement(A, C, P, (), (), horizon, cfg.valdom, mode,
                                                 seed=seed, count=samples)
        else:
            if sim is None:
                raise InputError("--sim is required for --kind data")
            verdict = check_data_refinement(
                A, C, functools.partial(sim_ts, valdom=cfg.valdom), P, (), (), horizon, cfg.valdom, mode,
                seed=seed, count=samples,
                abstract_states=lambda: abstract_states(P, cfg.valdom),
                candidates=sim_candidates(cfg.valdom), split=writes_top,
                witness=fused_witness(cfg.valdom))
    except CapError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CAP)
    except GeneratorError as exc:
        raise InputError(str(exc)) from None
    report = {
        "command": "refine",
        "config": {"abstract": abstract, "concrete": concrete, "kind": kind, "sim": sim,
                   "procs": list(P), "ops": ops, "values": list(cfg.valdom), "horizon": horizon,
                   "mode": mode, "seed": seed, "samples": samples if mode == "random" else None},
        "checked": verdict.checked,
        "verdict": verdict.to_json(),
    }
    lines = [f"{verdict.outcome} ({verdict.checked} streams)"]
    for part, v in (verdict.parts or {}).items():
        lines.append(f"  {part}: {v.outcome}" + (f" ({v.note})" if v.note else ""))
    if not verdict.holds and verdict.witness is not None:
        s, d = verdict.witness
        lines.append(f"witness interval: {d}")
        lines.append(dump_trace(s))
    _emit(report, as_json, "\n".join(lines))
    _timing(start)
    sys.exit(EXIT_OK if verdict.holds else EXIT_NEGATIVE)


if __name__ == "__main__":
    main()
