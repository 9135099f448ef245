"""Command-line entry point.

    funcnet evolve --algo sga --nodes 3 --task task.json --seed 1 --max-gens 2000 --out DIR
    funcnet analyze controllability --net FILE [--theta 1e-3] --out FILE
    funcnet analyze stability --net FILE --input-level 0.5 --out FILE
    funcnet experiment {convergence,multiplex,transfer,scaling} --manifest FILE --out DIR [--large]
    funcnet replay --archive DIR

Failures exit nonzero and print a JSON error document on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import archive as io
from .controllability import controllability_report
from .experiments import EXPERIMENT_KINDS, ExperimentManifest
from .optimizers import ConfigError
from .stability import NotSteadyError, stability_report

ALGO_CHOICES = ("rs", "sga", "cmaes", "pso", "acor", "gd")

EXIT_CONFIG = 2
EXIT_RUNTIME = 1
EXIT_REPLAY = 3


class CLIError(Exception):
    def __init__(self, code, doc):
        super().__init__(doc.get("message", ""))
        self.code = code
        self.doc = doc


def _parser():
    p = argparse.ArgumentParser(prog="funcnet", description="Evolve and analyse functional networks.")
    sub = p.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evolve", help="evolve one network")
    ev.add_argument("--algo", choices=ALGO_CHOICES, default="sga")
    ev.add_argument("--nodes", type=int, required=True)
    ev.add_argument("--task", help="task document (default: 1-in 1-out band-pass)")
    ev.add_argument("--config", help="optimizer document; flags override its fields")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--max-gens", type=int)
    ev.add_argument("--max-evals", type=int)
    ev.add_argument("--out", required=True)

    an = sub.add_parser("analyze", help="analyse a stored network")
    asub = an.add_subparsers(dest="analysis", required=True)
    ac = asub.add_parser("controllability")
    ac.add_argument("--net", required=True)
    ac.add_argument("--theta", type=float, default=1e-3)
    ac.add_argument("--out", required=True)
    ast = asub.add_parser("stability")
    ast.add_argument("--net", required=True)
    ast.add_argument("--input-level", type=float, required=True)
    ast.add_argument("--lyapunov-on", choices=("euler_map", "weights"), default="euler_map")
    ast.add_argument("--out", required=True)

    ex = sub.add_parser("experiment", help="run a study from a manifest")
    ex.add_argument("kind", choices=EXPERIMENT_KINDS)
    ex.add_argument("--manifest", help="manifest document (default: the study's defaults)")
    ex.add_argument("--out", required=True)
    ex.add_argument("--large", action="store_true", help="add the 1000 and 3000 node sizes to a scaling study")

    rp = sub.add_parser("replay", help="verify and regenerate an archive")
    rp.add_argument("--archive", required=True)
    return p


def _evolve(args):
    doc = io.load_document(args.config) if args.config else {}
    doc = dict(doc)
    doc["algorithm"] = args.algo
    doc["seed"] = args.seed
    if args.max_gens is not None:
        doc["max_generations"] = args.max_gens
    if args.max_evals is not None:
        doc["max_evaluations"] = args.max_evals
    cfg = io.parse_config(doc, "optimizer")
    task = io.parse_config(args.task, "task") if args.task else io.parse_config({}, "task")
    try:
        task.template(args.nodes)
    except ValueError as exc:
        raise ConfigError("nodes", str(exc)) from None
    record, index = io.archive_evolve(cfg, task, args.nodes, args.out)
    return {"status": "ok", "out": args.out, "converged": record.converged,
            "generations": record.generations_used, "evaluations": record.evaluations,
            "final_cost": record.final_cost, "artifacts": len(index["artifacts"])}


def _analyze(args):
    net = io.read_network(args.net)
    if args.analysis == "controllability":
        doc = controllability_report(net, args.theta).to_dict()
    else:
        try:
            doc = stability_report(net, args.input_level, lyapunov_on=args.lyapunov_on).to_dict()
        except NotSteadyError as exc:
            raise CLIError(EXIT_RUNTIME, {"error": "not_steady", "message": str(exc)}) from None
    io._write(args.out, io.dumps(doc))
    return {"status": "ok", "out": args.out}


def _experiment(args):
    doc = dict(io.load_document(args.manifest)) if args.manifest else {}
    if doc.get("kind", args.kind) != args.kind:
        raise ConfigError("kind", f"manifest is for {doc['kind']!r}, command asked for {args.kind!r}")
    doc["kind"] = args.kind
    if args.large:
        doc["large"] = True
    manifest = ExperimentManifest.from_dict(doc)
    _, index = io.archive_experiment(manifest, args.out)
    return {"status": "ok", "out": args.out, "artifacts": len(index["artifacts"])}


def _replay(args):
    if not (Path(args.archive) / io.INDEX_FILE).exists():
        raise CLIError(EXIT_CONFIG, {"error": "archive", "message": f"no {io.INDEX_FILE} in {args.archive}"})
    rep = io.replay(args.archive)
    doc = rep.to_dict()
    if not rep.ok:
        raise CLIError(EXIT_REPLAY, {"error": "replay_mismatch", **doc})
    return {"status": "ok", **doc}


COMMANDS = {"evolve": _evolve, "analyze": _analyze, "experiment": _experiment, "replay": _replay}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        doc = COMMANDS[args.command](args)
    except CLIError as exc:
        print(json.dumps(exc.doc, sort_keys=True), file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, RuntimeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(io._plain(doc), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
