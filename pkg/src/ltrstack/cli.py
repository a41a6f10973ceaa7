"""``ltrstack`` command line for simulating logs and training, evaluating or comparing rankers."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from . import experiments as ex
from . import market as mk
from . import rankers as rk
from . import training as tr
from .errors import ConfigurationError, LtrError


class UsageError(Exception):
    pass


def _widths(text: str) -> tuple[int, ...]:
    try:
        out = tuple(int(w) for w in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or any(w < 1 for w in out):
        raise argparse.ArgumentTypeError("widths must be positive")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ltrstack", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    g = sub.add_parser("generate", help="simulate a search log (JSONL)")
    g.add_argument("--impressions", type=int, required=True)
    g.add_argument("--candidates", type=int, default=20)
    g.add_argument("--pool-size", type=int, default=800)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train one ranker variant on a log")
    t.add_argument("--variant", choices=rk.VARIANTS, required=True)
    t.add_argument("--log", required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=8)
    t.add_argument("--learning-rate", type=float, default=None)
    t.add_argument("--hidden", type=_widths, default=(32, 32))
    t.add_argument("--trip-quality-weighting", action="store_true")
    t.add_argument("--alpha", type=float, default=0.5)
    t.add_argument("--non-residual", action="store_true", help="use the logit network alone (ablation)")
    t.add_argument("--trace", default=None, help="loss trace CSV (default: <out>.loss.csv)")

    e = sub.add_parser("evaluate", help="mean NDCG of a ranker over a log, printed as JSON")
    e.add_argument("--model", required=True)
    e.add_argument("--log", required=True)

    x = sub.add_parser("experiment", help="run an experiment from a JSON spec")
    x.add_argument("--spec", required=True)
    x.add_argument("--out", default=None, help="report CSV path (overrides output_path)")

    i = sub.add_parser("inspect", help="print ranker metadata")
    i.add_argument("--model", required=True)
    return p


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_generate(a) -> int:
    if a.impressions < 1 or a.candidates < 1 or a.pool_size < a.candidates:
        raise UsageError("need impressions >= 1, candidates >= 1 and pool-size >= candidates")
    pool = mk.generate_listings(a.pool_size, seed=rk.derive_seed(a.seed, 0))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        log = mk.generate_search_log(a.impressions, a.candidates, pool, mk.ChoiceModelConfig(),
                                     seed=rk.derive_seed(a.seed, 1))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    mk.save_log(log, a.out)
    print(json.dumps({"out": a.out, "impressions": len(log)}))
    return 0


def cmd_train(a) -> int:
    log = mk.load_log(a.log)
    if not log:
        raise LtrError(f"{a.log}: log is empty")
    cfg = tr.TrainConfig(epochs=a.epochs, learning_rate=a.learning_rate, shuffle_seed=a.seed,
                         trip_quality_weighting=a.trip_quality_weighting, alpha=a.alpha)
    size = rk.ModelSize(hidden=a.hidden)
    result = tr.train_variant(a.variant, log, cfg, size, init_seed=a.seed, residual=not a.non_residual)
    meta = {"variant": a.variant, "seed": a.seed, "epochs": a.epochs, "hidden": list(a.hidden),
            "learning_rate": a.learning_rate, "trip_quality_weighting": a.trip_quality_weighting,
            "alpha": a.alpha, "residual": not a.non_residual, "steps": result.steps,
            "log_sha256": _sha256(a.log), "artifact_version": __version__}
    rk.save_ranker(result.ranker, a.out, meta)
    trace = a.trace or f"{a.out}.loss.csv"
    tr.write_loss_trace(result.trace, trace)
    print(json.dumps({"out": a.out, "trace": trace, "final_loss": result.trace[-1].mean_loss}))
    return 0


def cmd_evaluate(a) -> int:
    ranker = rk.load_ranker(a.model)
    log = mk.load_log(a.log)
    if not log:
        raise LtrError(f"{a.log}: log is empty")
    print(json.dumps({"variant": ranker.variant, "impressions": len(log),
                      "ndcg": ex.evaluate_ndcg(ranker, log)}))
    return 0


def cmd_experiment(a) -> int:
    spec = ex.load_spec(a.spec)
    if a.out:
        spec.output_path = a.out
    if not spec.output_path:
        raise UsageError("no output path: set output_path in the experiment file or pass --out")
    report = ex.run(spec)
    csv_path, json_path = report.write(spec.output_path)
    print(json.dumps({"report": str(csv_path), "sidecar": str(json_path), "records": len(report.records)}))
    return 0


def cmd_inspect(a) -> int:
    ranker = rk.load_ranker(a.model)
    info = {"variant": ranker.variant,
            "trainable_parameters": rk.trainable_parameter_count(ranker),
            "total_parameters": rk.total_parameter_count(ranker),
            "nets": {k: list(n.config.layer_widths) for k, n in ranker.nets().items()},
            "meta": rk.load_ranker_meta(a.model)}
    if hasattr(ranker, "residual"):
        info["residual"] = ranker.residual
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate,
            "experiment": cmd_experiment, "inspect": cmd_inspect}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError) as exc:
        parser.print_usage(sys.stderr)
        print(f"ltrstack: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        where = exc.filename or ""
        print(f"ltrstack: error: {where}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except LtrError as exc:
        print(f"ltrstack: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
