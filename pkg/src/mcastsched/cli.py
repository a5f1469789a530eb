"""Command-line front end: generation, scheduling, validation, decomposition
inspection, CONGEST runs, and benchmark sweeps.

Exit codes: 0 success, 1 validation/parameter error, 2 internal invariant
breach (a scheduler produced a schedule that fails its own simulation).
"""

from __future__ import annotations

import csv
import io
import json
import sys
import time

import click

from .congest import (
    distributed_multicast,
    distributed_rank_decomposition,
    message_size_audit,
)
from .decomposition import (
    decomposition_to_json,
    heavy_path_decomposition,
    rank_decomposition,
    shorten,
    verify_short,
)
from .lowerbound import (
    build_lowerbound,
    check_lemmas,
    exhaustive_opt,
    markov_delay_check,
    predicted_edge_count,
)
from .model import (
    compute_metrics,
    gen_layered_instance,
    gen_random_instance,
    instance_from_json,
    instance_to_json,
    log2_ceil,
    validate_instance,
)
from .schedule import schedule_from_json, schedule_to_json, simulate
from .schedulers import (
    SeedSearchError,
    deterministic_schedule,
    frame_congestion_profile,
    frame_multicast_schedule,
    greedy_schedule,
    random_delay_schedule,
)

BENCH_COLUMNS = [
    "n",
    "congestion",
    "dilation",
    "scheduler",
    "seed",
    "length",
    "frame_count",
    "max_frame_congestion",
    "wall_time_s",
    "error",
]

seed_option = click.option(
    "--seed", type=int, default=0, envvar="MCAST_SEED", show_default=True,
    help="Random seed (default from MCAST_SEED when set).",
)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load_instance(path: str):
    try:
        with open(path) as fh:
            return instance_from_json(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"cannot read instance {path}: {exc}")


def _run_scheduler(instance, scheduler: str, seed: int, ell, budget):
    """Returns (schedule, assignment-or-None, extra stats dict)."""
    if scheduler == "greedy":
        return greedy_schedule(instance), None, {}
    if scheduler == "random-delay":
        return random_delay_schedule(instance, seed), None, {}
    if scheduler == "frames":
        sched, assignment = frame_multicast_schedule(instance, seed, ell)
        return sched, assignment, {}
    if scheduler == "deterministic":
        if budget is None:
            budget = 8 * log2_ceil(instance.graph.node_count)
        sched, found = deterministic_schedule(instance, budget, ell=ell)
        return sched, None, {"chosen_seed": found}
    if scheduler == "congest":
        sched, rounds = distributed_multicast(instance, seed=seed, depths_known=True)
        return sched, None, {"congest_rounds": rounds}
    raise ValueError(f"unknown scheduler {scheduler}")


@click.group()
def main():
    """Simultaneous multicast scheduling in the store-and-forward model."""


@main.group()
def gen():
    """Generate instances."""


@gen.command("random")
@click.option("--n", "node_count", type=int, required=True)
@click.option("--trees", type=int, required=True)
@click.option("--depth", type=int, required=True)
@seed_option
@click.option("-o", "--output", type=click.Path(), default="-")
def gen_random(node_count, trees, depth, seed, output):
    """Random connected graph with random multicast trees."""
    try:
        instance = gen_random_instance(node_count, trees, depth, seed)
    except ValueError as exc:
        _fail(str(exc))
    _emit_instance(instance, output)


@gen.command("layered")
@click.option("--n", "node_count", type=int, required=True)
@click.option("--congestion", type=int, required=True)
@click.option("--depth", type=int, required=True)
@click.option("--prefix-cap", type=int, default=None)
@seed_option
@click.option("-o", "--output", type=click.Path(), default="-")
def gen_layered(node_count, congestion, depth, prefix_cap, seed, output):
    """Instance hitting exact congestion and dilation targets."""
    try:
        instance = gen_layered_instance(node_count, congestion, depth, seed, prefix_cap)
    except ValueError as exc:
        _fail(str(exc))
    _emit_instance(instance, output)


@gen.command("lowerbound")
@click.option("--congestion", type=int, required=True)
@click.option("--depth", type=int, required=True)
@click.option("--bit-cap", type=int, default=64, show_default=True)
@click.option("-o", "--output", type=click.Path(), default="-")
def gen_lowerbound(congestion, depth, bit_cap, output):
    """Hard instance from the recursive lower-bound construction."""
    try:
        lb = build_lowerbound(congestion, depth, bit_cap)
    except ValueError as exc:
        _fail(str(exc))
    click.echo(
        f"predicted_edges={predicted_edge_count(congestion, depth)} "
        f"built_edges={len(lb.instance.graph.edges)}",
        err=True,
    )
    _emit_instance(lb.instance, output)


def _emit_instance(instance, output):
    problems = validate_instance(instance)
    if problems:
        _fail(f"generated instance invalid: {problems[0]}")
    m = compute_metrics(instance)
    click.echo(
        f"n={instance.graph.node_count} edges={len(instance.graph.edges)} "
        f"trees={len(instance.trees)} C={m.congestion} D={m.dilation}",
        err=True,
    )
    text = instance_to_json(instance)
    if output == "-":
        click.echo(text)
    else:
        with open(output, "w") as fh:
            fh.write(text + "\n")


@main.command("schedule")
@click.argument("instance_file", type=click.Path(exists=True))
@click.option(
    "--scheduler",
    type=click.Choice(["greedy", "random-delay", "frames", "deterministic", "congest"]),
    default="frames",
    show_default=True,
)
@seed_option
@click.option("--ell", type=int, default=None, help="Chunk length (default ceil(log2 n)).")
@click.option("--budget", type=int, default=None,
              help="Frame-congestion budget for the deterministic scheduler.")
@click.option("-o", "--output", type=click.Path(), default="-")
def cmd_schedule(instance_file, scheduler, seed, ell, budget, output):
    """Run a scheduler and write the validated schedule as JSON."""
    instance = _load_instance(instance_file)
    try:
        sched, assignment, extra = _run_scheduler(instance, scheduler, seed, ell, budget)
    except (ValueError, SeedSearchError) as exc:
        _fail(str(exc))
    report = simulate(instance, sched)
    if not report.valid:
        click.echo(
            f"internal error: schedule failed validation: {report.violations[:1]}",
            err=True,
        )
        sys.exit(2)
    m = compute_metrics(instance)
    n = instance.graph.node_count
    denom = m.congestion + m.dilation + log2_ceil(n) ** 2
    stats = (
        f"length={sched.declared_length} C={m.congestion} D={m.dilation} n={n} "
        f"ratio={sched.declared_length / denom:.4f}"
    )
    if assignment is not None:
        profile = frame_congestion_profile(instance, assignment)
        stats += (
            f" frames={assignment.frame_count + 1}"
            f" max_frame_congestion={profile.max_frame_congestion}"
        )
    for k, v in extra.items():
        stats += f" {k}={v}"
    click.echo(stats, err=True)
    text = schedule_to_json(sched)
    if output == "-":
        click.echo(text)
    else:
        with open(output, "w") as fh:
            fh.write(text + "\n")


@main.command("validate")
@click.argument("instance_file", type=click.Path(exists=True))
@click.argument("schedule_file", type=click.Path(exists=True))
def cmd_validate(instance_file, schedule_file):
    """Replay a schedule against an instance; exit 1 on any violation."""
    instance = _load_instance(instance_file)
    try:
        with open(schedule_file) as fh:
            sched = schedule_from_json(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"cannot read schedule {schedule_file}: {exc}")
    report = simulate(instance, sched)
    for v in report.violations:
        click.echo(f"{v.kind} at round {v.round}: {v.detail}")
    if report.valid:
        click.echo(f"valid length={report.length}")
    else:
        undelivered = len(instance.trees) - len(report.per_tree_completion_round)
        click.echo(f"invalid violations={len(report.violations)} incomplete_trees={undelivered}")
        sys.exit(1)


@main.command("decompose")
@click.argument("instance_file", type=click.Path(exists=True))
@click.option("--tree", "tree_id", type=int, required=True)
@click.option(
    "--kind", type=click.Choice(["heavy", "rank", "short"]),
    default="heavy", show_default=True,
)
@click.option("--ell", type=int, default=None, help="Chunk length for --kind short.")
def cmd_decompose(instance_file, tree_id, kind, ell):
    """Print a tree's path decomposition as JSON."""
    instance = _load_instance(instance_file)
    tree = instance.tree_by_id.get(tree_id)
    if tree is None:
        _fail(f"no tree with id {tree_id}")
    if tree.max_depth == 0:
        _fail(f"tree {tree_id} has no edges")
    if kind == "heavy":
        dec = heavy_path_decomposition(tree)
    elif kind == "rank":
        dec, _ = rank_decomposition(tree)
    else:
        if ell is None:
            ell = log2_ceil(instance.graph.node_count)
        dec = shorten(heavy_path_decomposition(tree), ell)
        report = verify_short(dec, tree, ell, log2_ceil(instance.graph.node_count) + 1)
        click.echo(
            f"max_intersections={report.max_intersections} bound={report.bound:.2f}",
            err=True,
        )
    click.echo(decomposition_to_json(dec))


@main.command("congest-sim")
@click.argument("instance_file", type=click.Path(exists=True))
@seed_option
@click.option("--epsilon", type=float, default=0.25, show_default=True)
@click.option("--bit-factor", type=int, default=4, show_default=True)
@click.option("--multicast/--decompose-only", default=False,
              help="Also run the distributed multicast after decomposing.")
@click.option("--depths-known/--no-depths-known", default=False)
def cmd_congest_sim(instance_file, seed, epsilon, bit_factor, multicast, depths_known):
    """Run the distributed decomposition (and optionally multicast) in CONGEST."""
    instance = _load_instance(instance_file)
    n = instance.graph.node_count
    budget = bit_factor * log2_ceil(n)
    try:
        dist = distributed_rank_decomposition(
            instance, epsilon, seed, bit_factor
        )
    except ValueError as exc:
        _fail(str(exc))
    audit = message_size_audit(dist.transcripts, budget)
    click.echo(
        f"decomposition rounds={dist.rounds} chunk_length={dist.chunk_length} "
        f"max_bits={audit.max_bits} budget={budget} audit={'pass' if audit.passed else 'FAIL'}"
    )
    if not audit.passed:
        sys.exit(2)
    if multicast:
        sched, rounds = distributed_multicast(
            instance, epsilon, seed, depths_known, bit_factor
        )
        report = simulate(instance, sched)
        if not report.valid:
            click.echo("internal error: multicast schedule invalid", err=True)
            sys.exit(2)
        click.echo(f"multicast length={sched.declared_length} congest_rounds={rounds}")


@main.command("check-lemmas")
@click.option("--congestion", type=int, required=True)
@click.option("--depth", type=int, required=True)
@click.option("--bit-cap", type=int, default=64, show_default=True)
def cmd_check_lemmas(congestion, depth, bit_cap):
    """Build a lower-bound instance and verify its structural lemmas."""
    try:
        lb = build_lowerbound(congestion, depth, bit_cap)
    except ValueError as exc:
        _fail(str(exc))
    report = check_lemmas(lb, congestion, depth)
    predicted = predicted_edge_count(congestion, depth)
    built = len(lb.instance.graph.edges)
    click.echo(f"edges={built} predicted={predicted}")
    click.echo(
        f"congestion={'ok' if report.congestion_ok else 'FAIL'} "
        f"dilation={'ok' if report.dilation_ok else 'FAIL'} "
        f"trees={'ok' if report.trees_ok else 'FAIL'} "
        f"node_bound={'ok' if report.node_bound_ok else 'FAIL'}"
    )
    if not report.all_ok or built != predicted:
        for f in report.failures:
            click.echo(f, err=True)
        sys.exit(1)


@main.command("opt")
@click.argument("instance_file", type=click.Path(exists=True))
@click.option("--horizon", type=int, default=8, show_default=True)
def cmd_opt(instance_file, horizon):
    """Exhaustive optimum for toy instances (<= 12 edges, <= 6 messages)."""
    instance = _load_instance(instance_file)
    try:
        best = exhaustive_opt(instance, horizon)
    except ValueError as exc:
        _fail(str(exc))
    if best is None:
        click.echo(f"no schedule within horizon {horizon}")
        sys.exit(1)
    click.echo(f"optimum={best}")


@main.command("markov-check")
@click.argument("instance_file", type=click.Path(exists=True))
@click.argument("schedule_file", type=click.Path(exists=True))
def cmd_markov_check(instance_file, schedule_file):
    """Per-edge delay-set check on a schedule."""
    instance = _load_instance(instance_file)
    with open(schedule_file) as fh:
        sched = schedule_from_json(fh.read())
    report = markov_delay_check(instance, sched)
    click.echo(f"edges_checked={len(report.per_edge)} passed={report.passed}")
    if not report.passed:
        sys.exit(1)


@main.command("bench")
@click.option(
    "--suite", "suite_file", type=click.Path(exists=True), required=True,
    help='JSON suite: {"cells":[{"n":..,"congestion":..,"depth":..,'
         '"seeds":[..],"schedulers":[..],"prefix_cap":..?}]}',
)
@click.option("-o", "--output", type=click.Path(), default="-")
def cmd_bench(suite_file, output):
    """Benchmark sweep over layered instances.

    CSV columns: n, congestion, dilation, scheduler, seed, length,
    frame_count, max_frame_congestion, wall_time_s, error. Per-row failures
    are recorded in the error column and the sweep continues.
    """
    try:
        with open(suite_file) as fh:
            suite = json.load(fh)
        cells = suite["cells"]
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"cannot read suite {suite_file}: {exc}")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS)
    writer.writeheader()
    for cell in cells:
        for seed in cell["seeds"]:
            instance = gen_layered_instance(
                cell["n"], cell["congestion"], cell["depth"], seed,
                cell.get("prefix_cap"),
            )
            m = compute_metrics(instance)
            for scheduler in cell["schedulers"]:
                row = {
                    "n": cell["n"],
                    "congestion": m.congestion,
                    "dilation": m.dilation,
                    "scheduler": scheduler,
                    "seed": seed,
                    "length": "",
                    "frame_count": "",
                    "max_frame_congestion": "",
                    "wall_time_s": "",
                    "error": "",
                }
                t0 = time.perf_counter()
                try:
                    sched, assignment, _ = _run_scheduler(
                        instance, scheduler, seed, None, None
                    )
                    report = simulate(instance, sched)
                    if not report.valid:
                        raise AssertionError("schedule failed validation")
                    row["length"] = sched.declared_length
                    if assignment is not None:
                        profile = frame_congestion_profile(instance, assignment)
                        row["frame_count"] = assignment.frame_count + 1
                        row["max_frame_congestion"] = profile.max_frame_congestion
                except Exception as exc:  # per-row failure, sweep continues
                    row["error"] = f"{type(exc).__name__}: {exc}"
                row["wall_time_s"] = f"{time.perf_counter() - t0:.4f}"
                writer.writerow(row)
    text = buf.getvalue()
    if output == "-":
        click.echo(text, nl=False)
    else:
        with open(output, "w") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
