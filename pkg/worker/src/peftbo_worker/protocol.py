"""Line-delimited stdio protocol for evaluation requests.

One JSON object per line on stdin: {id, config, fidelity, seed}. One JSON
object per line on stdout, order-preserving: {id, score, trainable_params}
on success or {id, error} on failure. Nothing but responses is ever written
to stdout; diagnostics go to stderr. EOF ends the loop cleanly.
"""

from __future__ import annotations

import argparse
import json
import sys

from .trainer import (
    DEFAULT_HIDDEN_DIM,
    DEFAULT_MAX_STEPS,
    DEFAULT_SAMPLES,
    DEFAULT_SEQ_LEN,
    DEFAULT_TASK_SEED,
    MockTrainer,
    WorkerConfig,
)


def _error(request_id, message: str) -> dict:
    return {"id": request_id if isinstance(request_id, str) else "unknown",
            "error": str(message)}


def handle_line(line: str, trainer: MockTrainer) -> dict:
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return _error("unknown", f"unparseable request: {exc.msg}")
    if not isinstance(request, dict):
        return _error("unknown", "request must be a JSON object")
    request_id = request.get("id")
    if not isinstance(request_id, str):
        return _error(request.get("id"), "missing or non-string id")
    try:
        config = WorkerConfig.from_dict(request["config"])
        fidelity = float(request["fidelity"])
        seed = int(request["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        return _error(request_id, f"bad request fields: {exc}")
    try:
        score, steps, count = trainer.train(config, fidelity, seed)
    except Exception as exc:  # trainer failure must not kill the worker
        return _error(request_id, f"trainer failed: {exc}")
    print(
        f"evaluated id={request_id} layers={len(config.layers)} "
        f"sizes=({config.d_sa},{config.d_pa},{config.l_pt}) steps={steps} "
        f"score={score:.3f}",
        file=sys.stderr,
    )
    return {"id": request_id, "score": score, "trainable_params": count}


def serve(stdin, stdout, trainer: MockTrainer) -> int:
    for line in stdin:
        if not line.strip():
            continue
        response = handle_line(line, trainer)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="peftbo-worker",
        description="stdio evaluation worker with a mock adapter trainer",
    )
    parser.add_argument("--hidden-dim", type=int, default=DEFAULT_HIDDEN_DIM)
    parser.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    parser.add_argument("--seq-len", type=int, default=DEFAULT_SEQ_LEN)
    parser.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    parser.add_argument("--task-seed", type=int, default=DEFAULT_TASK_SEED)
    args = parser.parse_args(argv)
    trainer = MockTrainer(
        hidden_dim=args.hidden_dim,
        max_steps=args.max_steps,
        seq_len=args.seq_len,
        samples=args.samples,
        task_seed=args.task_seed,
    )
    print("worker ready", file=sys.stderr)
    return serve(sys.stdin, sys.stdout, trainer)


if __name__ == "__main__":
    sys.exit(main())
