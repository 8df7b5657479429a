"""Command-line entry point.

Subcommands::

    ucround solve [relax-round|fp] --case FILE [options]
    ucround fp --case FILE [options]
    ucround check --case FILE --point FILE
    ucround sweep --case FILE [--penalties ...]

``--case`` accepts a path or the name of a bundled case (``case6``).
Options may also come from a JSON ``--config`` file; flags win over the
file, which wins over the defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .case_model import CaseError, PowerCase, builtin_case_path, load_case
from .drivers import (FpParams, RunReport, check_feasibility, relax_and_pump, relax_and_round)
from .formulation import DecisionPoint, VariableLayout
from .pslp import PslpError, PslpParams
from .report import emit_reports, format_row
from .rounding import RescaleMode, RoundMode, RoundParams

DEFAULTS = {
    "penalty": 5e6,
    "rescale": "none",
    "round": "uc-er",
    "levels": 0.1,
    "out": "ucround_out",
    "seed": 0,
    "flips": None,
    "maxit": 50,
    "penalties": [5e3, 5e4, 5e5, 5e6, 5e7],
    "max_iter": 200,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ucround", description="Relax-and-round heuristics for UC-ACOPF.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, solver=True):
        sp.add_argument("--case", help="case JSON path or bundled case name")
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--out", help="output directory")
        if solver:
            sp.add_argument("--penalty", type=float, help="step-1 PSLP penalty weight")
            sp.add_argument("--rescale", choices=[m.value for m in RescaleMode])
            sp.add_argument("--round", choices=[m.value for m in RoundMode])
            sp.add_argument("--levels", type=float, metavar="W",
                            help="rounding level width, 0 = strict order")
            sp.add_argument("--seed", type=int)
            sp.add_argument("--max-iter", dest="max_iter", type=int, help="PSLP iteration cap")

    s = sub.add_parser("solve", help="run a pipeline on one configuration")
    s.add_argument("pipeline", nargs="?", choices=["relax-round", "fp"], default="relax-round")
    common(s)
    s.add_argument("--flips", type=int, help="FP random flips per reset")
    s.add_argument("--maxit", type=int, help="FP iteration cap")

    f = sub.add_parser("fp", help="relax-and-round with the feasibility pump")
    common(f)
    f.add_argument("--flips", type=int)
    f.add_argument("--maxit", type=int)

    c = sub.add_parser("check", help="classify a stored solution point")
    common(c, solver=False)
    c.add_argument("--point", required=True, help="point JSON (as written under runs/)")
    c.add_argument("--tol", type=float, default=1e-6)

    w = sub.add_parser("sweep", help="rescale x round x penalty grid")
    common(w)
    w.add_argument("--penalties", type=float, nargs="+")
    return p


def _resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(doc) - set(DEFAULTS) - {"case"}
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(doc)
    for key, val in vars(args).items():
        if val is not None and key not in ("command", "config", "verbose"):
            cfg[key] = val
    if not cfg.get("case"):
        raise ValueError("--case is required")
    return cfg


def _load(name: str) -> PowerCase:
    path = Path(name)
    if not path.exists() and builtin_case_path(name).exists():
        path = builtin_case_path(name)
    return load_case(path)


def _round_params(cfg) -> RoundParams:
    return RoundParams.from_width(float(cfg["levels"]))


def _print(rep: RunReport) -> None:
    row = format_row(rep)
    print(" ".join(f"{k}={v}" for k, v in row.items()))


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s %(message)s")
    try:
        cfg = _resolve(args)
        case = _load(cfg["case"])
    except (OSError, ValueError, CaseError) as exc:
        print(f"ucround: error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "check":
            return _check(case, cfg)
        pslp = PslpParams(max_iter=int(cfg["max_iter"]))
        step1 = replace(pslp, mu=float(cfg["penalty"]))
        rp = _round_params(cfg)
        results = []
        if args.command == "sweep":
            for resc in RescaleMode:
                for rnd in RoundMode:
                    for mu in cfg["penalties"]:
                        point, rep = relax_and_round(case, resc, rnd, replace(pslp, mu=float(mu)),
                                                     pslp, rp)
                        results.append((point, rep))
                        _print(rep)
        elif args.command == "fp" or getattr(args, "pipeline", "") == "fp":
            fp = FpParams(maxit=int(cfg["maxit"]), s_flips=cfg["flips"], rng_seed=int(cfg["seed"]))
            point, rep = relax_and_pump(case, cfg["rescale"], cfg["round"], fp, pslp, rp)
            results.append((point, rep))
            _print(rep)
        else:
            point, rep = relax_and_round(case, cfg["rescale"], cfg["round"], step1, pslp, rp)
            results.append((point, rep))
            _print(rep)
        emit_reports(results, cfg["out"], case)
    except (PslpError, ValueError) as exc:
        print(f"ucround: error: {exc}", file=sys.stderr)
        return 1
    return 0


def _check(case: PowerCase, cfg) -> int:
    with open(cfg["point"], encoding="utf-8") as fh:
        doc = json.load(fh)
    if "point" in doc:
        doc = doc["point"]
    point = DecisionPoint.from_dict(VariableLayout.for_case(case), doc)
    rep = check_feasibility(point, case, tol=float(cfg.get("tol", 1e-6)))
    out = {"uc_feasible": rep.uc_feasible, "ac_feasible": rep.ac_feasible,
           "fully_feasible": rep.fully_feasible, "ac_violation": rep.ac_violation,
           "worst": rep.worst}
    text = json.dumps(out, indent=1)
    print(text)
    if cfg.get("out") and cfg["out"] != DEFAULTS["out"]:
        Path(cfg["out"]).mkdir(parents=True, exist_ok=True)
        (Path(cfg["out"]) / "feasibility.json").write_text(text + "\n", encoding="utf-8")
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
