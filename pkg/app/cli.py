# app/cli.py

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from pydantic import BaseModel, ValidationError

from app.agents.orchestrator import ForgeOrchestrator
from app.config import load_settings
from app.models.errors import ForgeError, InputError
from app.models.schemas import JobConfig
from app.services.mzv import parse_indices
from app.services.serialization import dump_csv, dump_json, matrix_rows

logger = logging.getLogger("app.cli")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ring", choices=["rational", "complex", "series"], default=None)
    p.add_argument("--wordlen", type=int, default=None, help="word-length cutoff L")
    p.add_argument("--degree", type=int, default=None, help="series cutoff D")
    p.add_argument("--weight", type=int, default=None, help="noncommutative weight cutoff W")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON settings file")
    p.add_argument("--out", default=None, help="output file (stdout when omitted)")
    p.add_argument("--format", choices=["json", "csv"], default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schottky-forge", description="Schottky uniformization of degenerating curves")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the stable-graph invariants")
    p.add_argument("graph")
    _common(p)

    p = sub.add_parser("periods", help="multiplicative period matrix")
    p.add_argument("graph")
    p.add_argument("params")
    _common(p)

    p = sub.add_parser("differentials", help="pole tables and sampled values")
    p.add_argument("graph")
    p.add_argument("params")
    p.add_argument("--kind", required=True, help="first:i, second:t:k or third:t1:t2")
    p.add_argument("--component", default=None)
    p.add_argument("--at", action="append", default=[], help="sample point, repeatable")
    _common(p)

    p = sub.add_parser("degenerate", help="set y_e = 0 on a set of edges")
    p.add_argument("graph")
    p.add_argument("params")
    p.add_argument("--edges", default="", help="comma-separated edge ids")
    _common(p)

    p = sub.add_parser("invariants", help="compare conjugation invariants")
    p.add_argument("graph")
    p.add_argument("params")
    p.add_argument("--conjugator", default=None, help="a,b,c,d")
    p.add_argument("--split", default=None, help="vertex:h1:h2")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--length", type=int, default=3)
    _common(p)

    p = sub.add_parser("eta", help="eta basis of second-kind differentials")
    p.add_argument("graph")
    p.add_argument("params")
    p.add_argument("--tail", default=None)
    p.add_argument("--convention", choices=["fixed_point", "b_path"], default="fixed_point")
    p.add_argument("--direction", default=None, help='JSON such as {"y:l1": 1}; runs the Gauss-Manin check')
    _common(p)

    kz = sub.add_parser("kz", help="KZ residues, monodromy and MZVs")
    kz_sub = kz.add_subparsers(dest="kz_command", required=True)

    p = kz_sub.add_parser("assignment")
    p.add_argument("graph")
    p.add_argument("--eliminate", default=None, help="tail whose letter is eliminated")
    p.add_argument("--split", action="append", default=[], help="vertex:h1:h2, repeatable")
    _common(p)

    p = kz_sub.add_parser("monodromy")
    p.add_argument("--loop", type=int, default=None, help="loop around pole 0 or 1 instead of the 0 -> 1 segment")
    _common(p)

    p = kz_sub.add_parser("mzv")
    p.add_argument("indices", help="comma-separated, e.g. 2,1")
    _common(p)

    p = kz_sub.add_parser("limit")
    p.add_argument("graph")
    p.add_argument("--legs", required=True, help="component:from:to[:turns[:end_turns]] separated by ';'")
    p.add_argument("--eliminate", default=None)
    p.add_argument("--split", action="append", default=[])
    _common(p)
    return parser


def write_output(text: str, out: Optional[str]) -> None:
    """stdout, or an atomic replace of the target file."""
    if not out:
        sys.stdout.write(text)
        return
    target = Path(out)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render(report: BaseModel, fmt: str) -> str:
    data = report.model_dump(mode="json", by_alias=True)
    if fmt == "json":
        return dump_json(data)
    if "P" in data:
        return dump_csv(["i", "j", "P_ij"], matrix_rows(data["P"]))
    if "entries" in data:
        return dump_csv(["kind", "item", "first", "second", "agrees"], ([e["kind"], e["item"], e["first"], e["second"], e["agrees"]] for e in data["entries"]))
    if "components" in data:
        rows = ([c["component"], p["at"], p["order"], p["residue"]] for c in data["components"] for p in c["poles"])
        return dump_csv(["component", "at", "order", "residue"], rows)
    if "issues" in data:
        return dump_csv(["field", "issue", "severity"], ([i["field"], i["issue"], i["severity"]] for i in data["issues"]))
    raise InputError("csv output is not available for this command; use --format json")


def _job(args: argparse.Namespace) -> JobConfig:
    overrides = {k: getattr(args, k, None) for k in ("wordlen", "degree", "weight", "tol", "threads")}
    settings = load_settings(args.config, overrides)
    command = args.command if args.command != "kz" else f"kz {args.kz_command}"
    try:
        return JobConfig(
            command=command,
            graph=getattr(args, "graph", None),
            params=getattr(args, "params", None),
            ring=args.ring or ("series" if command in ("differentials", "degenerate") else "complex"),
            settings=settings,
            out=args.out,
            format=args.format,
        )
    except ValidationError as e:
        raise InputError(f"invalid job: {e}") from e


def run(args: argparse.Namespace) -> BaseModel:
    job = _job(args)
    logging.basicConfig(
        level=job.settings.log_level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    forge = ForgeOrchestrator(job.settings)
    logger.info(f"running {job.command}")
    if job.command == "validate":
        return forge.validate(job.graph)
    if job.command == "periods":
        return forge.periods(job.graph, job.params, job.ring)
    if job.command == "differentials":
        return forge.differentials(job.graph, job.params, args.kind, job.ring, args.component, args.at)
    if job.command == "degenerate":
        edges = [e.strip() for e in args.edges.split(",") if e.strip()]
        return forge.degenerate(job.graph, job.params, edges)
    if job.command == "invariants":
        conjugator = args.conjugator.split(",") if args.conjugator else None
        ring = args.ring or "rational"
        return forge.invariants(job.graph, job.params, ring, conjugator, args.split, args.order, args.length)
    if job.command == "eta":
        if args.direction:
            try:
                direction = json.loads(args.direction)
            except json.JSONDecodeError as e:
                raise InputError(f"parse error in --direction: {e}") from e
            return forge.gauss_manin(job.graph, job.params, direction, args.tail)
        return forge.eta(job.graph, job.params, args.tail, job.ring, args.convention)
    if job.command == "kz assignment":
        return forge.kz_assignment(job.graph, job.settings.weight, args.eliminate, args.split)
    if job.command == "kz monodromy":
        return forge.kz_monodromy(job.settings.weight, args.loop)
    if job.command == "kz mzv":
        return forge.kz_mzv(parse_indices(args.indices))
    if job.command == "kz limit":
        return forge.kz_limit(job.graph, args.legs, job.settings.weight, args.eliminate, args.split)
    raise InputError(f"unknown command {job.command!r}")


def _failed(report: BaseModel) -> bool:
    return getattr(report, "is_valid", True) is False


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        report = run(args)
        write_output(render(report, args.format), args.out)
    except ForgeError as e:
        logger.error(f"{type(e).__name__}: {e}")
        sys.stderr.write(f"error: {e}\n")
        return e.exit_code
    return 1 if _failed(report) else 0


if __name__ == "__main__":
    sys.exit(main())
