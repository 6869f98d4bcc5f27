"""Command-line front door.

Subcommands: ``space`` (inspect a search space), ``search`` (model-guided
run), ``random`` (uniform baseline), ``scaling`` (lockstep size-scaling
baseline), ``pareto`` / ``hv`` / ``export`` (re-derive artifacts from a
saved state). Exit codes: 0 success, 2 usage or input-file problems,
3 backend or runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import rng as _rng
from . import search as _search
from . import space as _space
from .errors import (
    BenchmarkError,
    EvaluationError,
    InvalidConfigurationError,
    NumericalError,
    PeftBoError,
    RunInterrupted,
    StateError,
)
from .objectives import (
    SyntheticBackend,
    SyntheticLandscapeSpec,
    TabularBackend,
    WorkerBackend,
    load_tabular,
)
from .pareto import ParetoFront, write_front
from .search import RunConfig, RunState
from .space import SearchSpaceSpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class _UsageError(PeftBoError):
    pass


def _load_space(args) -> SearchSpaceSpec:
    if getattr(args, "space_file", None):
        path = Path(args.space_file)
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise _UsageError(f"cannot read space file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise _UsageError(f"malformed space file {path}: {exc}") from exc
        return SearchSpaceSpec.from_dict(data)
    return _space.PRESETS[args.space]()


def _build_backend(args, space: SearchSpaceSpec):
    if args.backend == "synthetic":
        landscape = SyntheticLandscapeSpec.from_seed(
            space.num_layers,
            landscape_seed=args.landscape_seed,
            noise_sd=args.noise_sd,
        )
        return SyntheticBackend(space, landscape)
    if args.backend == "tabular":
        if not args.benchmark_file:
            raise _UsageError("--benchmark-file is required with --backend tabular")
        return TabularBackend(space, load_tabular(args.benchmark_file))
    if args.backend == "worker":
        if not args.worker_cmd:
            raise _UsageError("--worker-cmd is required with --backend worker")
        return WorkerBackend(space, args.worker_cmd)
    raise _UsageError(f"unknown backend {args.backend}")


def _add_space_flags(p):
    p.add_argument("--space", choices=sorted(_space.PRESETS), default="bert-base",
                   help="built-in space preset (default: bert-base)")
    p.add_argument("--space-file", help="JSON space spec file (overrides --space)")


def _add_run_flags(p):
    _add_space_flags(p)
    p.add_argument("--backend", choices=["synthetic", "tabular", "worker"],
                   default="synthetic")
    p.add_argument("--landscape-seed", type=int, default=0)
    p.add_argument("--noise-sd", type=float, default=0.2)
    p.add_argument("--benchmark-file", help="tabular benchmark path")
    p.add_argument("--worker-cmd", help="command line spawning an evaluation worker")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--n-init", type=int, default=100)
    p.add_argument("--n-total", type=int, default=200)
    p.add_argument("--fidelity", type=float, default=0.05)
    p.add_argument("--mc-samples", type=int, default=128)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.add_argument("--state", help="state snapshot path (default: OUT/state.json)")
    p.add_argument("--resume", action="store_true",
                   help="continue from an existing state snapshot")


def _print_front(front: ParetoFront) -> None:
    print(f"{'layers':<28}{'d_sa':>6}{'d_pa':>6}{'l_pt':>6}{'score':>10}{'cost%':>9}")
    for entry in front.entries:
        cfg = entry.config
        layers = ",".join(str(l) for l in cfg.active_layers) or "-"
        print(
            f"{layers:<28}{cfg.d_sa:>6}{cfg.d_pa:>6}{cfg.l_pt:>6}"
            f"{entry.vector.score:>10.2f}{entry.vector.cost:>9.2%}"
        )


def _write_artifacts(out_dir: Path, front: ParetoFront, state: RunState) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "front.jsonl", "w", encoding="utf-8") as fh:
        write_front(front, fh)
    _write_hv_csv(out_dir / "hv.csv", state.trajectory)


def _write_hv_csv(path, trajectory) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["evals", "hv"])
        for evals, hv in trajectory:
            writer.writerow([evals, repr(float(hv))])


def _cmd_space(args) -> int:
    space = _load_space(args)
    full = _space.full_configuration(space)
    max_count = _space.param_count(space, full)
    print(f"num_layers: {space.num_layers}")
    print(f"hidden_dim: {space.hidden_dim}")
    print(f"size_grid: {' '.join(str(v) for v in space.size_grid)}")
    print(f"base_param_count: {space.base_param_count}")
    print(f"cardinality: {_space.cardinality(space)}")
    print("min_param_count: 0 (0.0000%)")
    print(
        f"max_param_count: {max_count} "
        f"({100 * max_count / space.base_param_count:.4f}%)"
    )
    return EXIT_OK


def _run_common(args, mode: str) -> int:
    space = _load_space(args)
    backend = _build_backend(args, space)
    out_dir = Path(args.out)
    state_path = Path(args.state) if args.state else out_dir / "state.json"
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "observations.jsonl"
    cfg = RunConfig(
        space=space,
        backend=backend,
        n_init=args.n_init,
        n_total=args.n_total,
        fidelity=args.fidelity,
        master_seed=args.seed,
        mc_samples=args.mc_samples,
        restarts=args.restarts,
        state_path=state_path,
        log_path=log_path,
    )
    if args.resume and state_path.exists():
        front, state = _search.resume(state_path, cfg, bo=(mode == "search"))
    elif mode == "search":
        if log_path.exists():
            log_path.unlink()
        front, state = _search.run(cfg)
    else:
        if log_path.exists():
            log_path.unlink()
        front, state = _search.random_search(cfg)
    _write_artifacts(out_dir, front, state)
    _print_front(front)
    return EXIT_OK


def _cmd_search(args) -> int:
    return _run_common(args, "search")


def _cmd_random(args) -> int:
    return _run_common(args, "random")


def _cmd_scaling(args) -> int:
    """Lockstep baseline: all layers on, the three sizes swept down the grid."""
    space = _load_space(args)
    backend = _build_backend(args, space)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = _search._Appender(out_dir / "observations.jsonl")
    if log.path.exists():
        log.path.unlink()
    observations = []
    mask = (1,) * space.num_layers
    for i, size in enumerate(space.size_grid):
        config = _space.Configuration(mask, size, size, size)
        seed = _rng.derive_seed(args.seed, _search._STREAM_EVAL, i)
        obs = backend.evaluate(config, args.fidelity, seed)
        observations.append(obs)
        log.append(obs, i)
    front = _search.front_of(observations)
    with open(out_dir / "front.jsonl", "w", encoding="utf-8") as fh:
        write_front(front, fh)
    _print_front(front)
    return EXIT_OK


def _load_state(args) -> RunState:
    if not args.state:
        raise _UsageError("--state is required")
    return RunState.load(args.state)


def _cmd_pareto(args) -> int:
    state = _load_state(args)
    front = _search.front_of(state.observations)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            write_front(front, fh)
    else:
        write_front(front, sys.stdout)
    return EXIT_OK


def _cmd_hv(args) -> int:
    state = _load_state(args)
    trajectory = _search.hypervolume_trajectory(state.observations)
    if args.out:
        _write_hv_csv(args.out, trajectory)
    else:
        print("evals,hv")
        for evals, hv in trajectory:
            print(f"{evals},{hv!r}")
    return EXIT_OK


def _cmd_export(args) -> int:
    """Per-entry front CSV: one layer bit column per layer plus sizes."""
    state = _load_state(args)
    front = _search.front_of(state.observations)
    num_layers = state.space.num_layers
    header = (
        [f"layer_{i}" for i in range(1, num_layers + 1)]
        + ["d_sa", "d_pa", "l_pt", "score", "cost"]
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for entry in front.entries:
            cfg = entry.config
            writer.writerow(
                list(cfg.layer_mask)
                + [cfg.d_sa, cfg.d_pa, cfg.l_pt,
                   repr(entry.vector.score), repr(entry.vector.cost)]
            )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peftbo",
        description="Multi-objective configuration search over PEFT spaces",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_space = sub.add_parser("space", help="inspect a search space")
    _add_space_flags(p_space)
    p_space.set_defaults(func=_cmd_space)

    p_search = sub.add_parser("search", help="run the model-guided search")
    _add_run_flags(p_search)
    p_search.set_defaults(func=_cmd_search)

    p_random = sub.add_parser("random", help="run the random-search baseline")
    _add_run_flags(p_random)
    p_random.set_defaults(func=_cmd_random)

    p_scaling = sub.add_parser(
        "scaling", help="evaluate the lockstep size-scaling baseline"
    )
    _add_run_flags(p_scaling)
    p_scaling.set_defaults(func=_cmd_scaling)

    p_pareto = sub.add_parser("pareto", help="export the front of a saved run")
    p_pareto.add_argument("--state", required=True)
    p_pareto.add_argument("--out")
    p_pareto.set_defaults(func=_cmd_pareto)

    p_hv = sub.add_parser("hv", help="export the hypervolume trajectory CSV")
    p_hv.add_argument("--state", required=True)
    p_hv.add_argument("--out")
    p_hv.set_defaults(func=_cmd_hv)

    p_export = sub.add_parser("export", help="export the front as a flat CSV")
    p_export.add_argument("--state", required=True)
    p_export.add_argument("--out", required=True)
    p_export.set_defaults(func=_cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (_UsageError, InvalidConfigurationError, BenchmarkError, StateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvaluationError, RunInterrupted, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, RunInterrupted) and exc.state_path:
            print(f"state preserved at {exc.state_path}; rerun with --resume",
                  file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
