"""Command-line front end.

Exit codes: 0 when every checked claim holds, 1 when a mathematical check
fails (the report says which), 2 for usage or spec errors and interruption.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import signal
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from gmpy2 import mpq

from . import __version__, jsonio
from .dynamics.ode import IntegrationCancelled
from .families import (
    FamilySpecError,
    InverseMismatchError,
    ParsedSpec,
    alpha_bound,
    build_density,
    build_dependent_inverse,
    build_dim4_inverse,
    build_essen_inverse,
    build_hurwitz_F,
    cegmh_field,
    essen_sum_identity_check,
    parse_family_spec,
)
from .inversion import InversionCancelled, InversionError, formal_inverse, jbar_series_check, preservation_check
from .jacobian import is_nilpotent, jacobian_of, rows_dependent_over_R
from .polycore import PolyMap, TermCapExceeded, get_term_cap, to_rational

log = logging.getLogger("nilmap")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
CEGMH_START = (18.0, -12.0, 1.0)


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    spec_path: str
    seed: int | None
    outputs: list[str] = field(default_factory=list)
    toolkit_version: str = __version__
    wall_time_ms: int = 0
    parameters: dict = field(default_factory=dict)
    exit_code: int = 0

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _load_spec(path: str) -> ParsedSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read spec file: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from exc
    try:
        return parse_family_spec(obj)
    except FamilySpecError as exc:
        raise UsageError(f"invalid spec: {exc}") from exc


def _rational_arg(text: str) -> mpq:
    """Exact rational from ``p/q`` or a decimal literal such as ``3.4``."""
    try:
        return to_rational(text)
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _seed_arg(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _emit(report: dict, manifest: RunManifest, out_dir: Path | None, name: str) -> None:
    sys.stdout.write(jsonio.dumps(report))
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest.outputs.append(str(jsonio.write(out_dir / name, report)))


def _nilpotent_map(parsed: ParsedSpec) -> PolyMap:
    # the counterexample is checked as the field itself, which is not nilpotent
    if parsed.family == "cegmh":
        return cegmh_field(parsed.spec.n)
    return parsed.nilpotent_part()


def cmd_verify_nilpotent(args, manifest: RunManifest, cancel) -> int:
    parsed = _load_spec(args.spec)
    H = _nilpotent_map(parsed)
    J = jacobian_of(H)
    cert = is_nilpotent(J)
    witness = rows_dependent_over_R(J)
    report = {
        "family": parsed.family,
        "n": H.nvars,
        "map": H.to_text(),
        **cert.to_json(),
        "rows_dependent": witness is not None,
        "witness": None if witness is None else [str(c) for c in witness],
    }
    _emit(report, manifest, args.out_dir, "certificate.json")
    return EXIT_OK if cert.nilpotent else EXIT_FAILED


def _with_lambda(parsed: ParsedSpec, lam: mpq) -> ParsedSpec:
    if parsed.family in ("essen", "dim4"):
        return dataclasses.replace(parsed, spec=dataclasses.replace(parsed.spec, lam=lam), lam=lam)
    return dataclasses.replace(parsed, lam=lam)


def _closed_form(parsed: ParsedSpec, G) -> dict | None:
    """Compare the family's own inverse construction with the formal one."""
    fam, spec = parsed.family, parsed.spec
    if fam == "essen":
        closed = build_essen_inverse(spec, formal=G)
        return {"source": "back_substitution", "matches_formal": closed == G,
                "sum_identity": essen_sum_identity_check(spec)}
    if fam == "dim4":
        closed = build_dim4_inverse(spec, formal=G)
        return {"source": "back_substitution", "matches_formal": closed == G}
    if fam == "dependent":
        closed, source = build_dependent_inverse(spec, parsed.lam, return_source=True, formal=G)
        return {"source": source, "matches_formal": closed == G}
    return None


def cmd_invert(args, manifest: RunManifest, cancel) -> int:
    parsed = _load_spec(args.spec)
    lam = args.lam if args.lam is not None else (parsed.lam if parsed.lam is not None else mpq(1))
    if not lam:
        raise UsageError("lambda must be nonzero")
    if parsed.family == "hurwitz":
        raise UsageError("invert applies to dependent, essen, dim4 and cegmh specs")
    try:
        parsed = _with_lambda(parsed, lam)
    except FamilySpecError as exc:
        raise UsageError(str(exc)) from exc
    manifest.parameters["lambda"] = str(lam)
    H = parsed.nilpotent_part()
    F = PolyMap.scaled_identity(lam, H.nvars) + H
    try:
        bundle = formal_inverse(F, lam, cancel=cancel)
    except InversionError as exc:
        _emit({"family": parsed.family, "lambda": str(lam), "error": str(exc)}, manifest, args.out_dir, "inverse.json")
        return EXIT_FAILED
    report = {"family": parsed.family, **bundle.to_json()}
    ok = True
    try:
        closed = _closed_form(parsed, bundle.G)
    except InverseMismatchError as exc:
        closed = {"error": str(exc), "matches_formal": False}
    if closed is not None:
        report["closed_form"] = closed
        ok = closed["matches_formal"] and closed.get("sum_identity", True)
    if args.check_preservation:
        rec = preservation_check(F, lam, bundle=bundle)
        pres = rec.to_json()
        pres["jbar_series_identity"] = jbar_series_check(F, bundle)
        report["preservation"] = pres
        ok = ok and rec.nilpotent and pres["jbar_series_identity"]
        if parsed.family in ("essen", "dim4"):
            ok = ok and rec.independent
    _emit(report, manifest, args.out_dir, "inverse.json")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_check_field(args, manifest: RunManifest, cancel) -> int:
    from .dynamics import ScanConfig, density_scan, divergence_numerator, hurwitz_scan, integrability_check
    from .dynamics.scans import restrict_to_plane

    parsed = _load_spec(args.spec)
    if parsed.family != "hurwitz":
        raise UsageError("check-field needs a hurwitz spec")
    spec = parsed.spec
    try:
        bound = alpha_bound(spec)
        alpha = args.alpha if args.alpha is not None else bound + mpq(1, 10)
        rho = build_density(spec, alpha, check_bound=False)
        cfg = ScanConfig(args.samples, args.box, 0.0, args.seed)
    except (FamilySpecError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    manifest.parameters.update(alpha=str(alpha), samples=args.samples, box_halfwidth=args.box)
    F = build_hurwitz_F(spec)
    hur = hurwitz_scan(F, cfg)
    S = divergence_numerator(F, rho)
    on_plane_zero = restrict_to_plane(S).is_zero()
    den = density_scan(S, cfg)
    integrable = integrability_check(rho)
    report = {
        "family": "hurwitz",
        "n": spec.n,
        "alpha_bound": str(bound),
        "alpha": str(alpha),
        "alpha_exceeds_bound": alpha > bound,
        "integrable": integrable,
        "S_vanishes_on_plane": on_plane_zero,
        "hurwitz": hur.to_json(),
        "density": den.to_json(),
    }
    _emit(report, manifest, args.out_dir, "field_report.json")
    ok = hur.passed and den.passed and on_plane_zero and integrable and alpha > bound
    return EXIT_OK if ok else EXIT_FAILED


def cmd_simulate(args, manifest: RunManifest, cancel) -> int:
    from .dynamics import ScanConfig, attractor_experiment, integrate_ensemble, IntegratorConfig

    parsed = _load_spec(args.spec)
    out_dir: Path = args.out_dir
    if args.traj < 0:
        raise UsageError("--traj must be nonnegative")
    if not args.tmax > 0:
        raise UsageError("--tmax must be positive")
    manifest.parameters.update(traj=args.traj, tmax=args.tmax)
    out_dir.mkdir(parents=True, exist_ok=True)
    if parsed.family == "hurwitz":
        F = build_hurwitz_F(parsed.spec)
        summary = attractor_experiment(F, args.traj, ScanConfig(max(args.traj, 1), args.box, 0.0, args.seed),
                                       t_max=args.tmax, min_plane_distance=args.min_plane_distance,
                                       keep_trajectories=True, cancel=cancel)
        trajs = summary.trajectories
        report = {"family": "hurwitz", **summary.to_json()}
        ok = summary.passed
    elif parsed.family == "cegmh":
        F = cegmh_field(parsed.spec.n)
        raw = parsed.raw.get("x0")
        x0 = [float(v) for v in raw] if raw is not None else list(CEGMH_START) + [0.0] * (F.nvars - 3)
        if len(x0) != F.nvars:
            raise UsageError(f"x0 must have length {F.nvars}")
        starts = [x0] if args.traj else []
        trajs = integrate_ensemble(F, starts, IntegratorConfig(t_max=args.tmax), cancel=cancel)
        report = {
            "family": "cegmh",
            "num_traj": len(trajs),
            "trajectories": [t.summary() for t in trajs],
        }
        ok = all(t.terminated == "diverged" for t in trajs)
        report["all_diverged"] = ok
    else:
        raise UsageError("simulate needs a hurwitz or cegmh spec")
    for i, t in enumerate(trajs):
        path = out_dir / f"trajectory_{i:04d}.csv"
        path.write_text(t.to_csv(), encoding="utf-8")
        manifest.outputs.append(str(path))
    manifest.outputs.append(str(jsonio.write(out_dir / "summary.json", report)))
    sys.stdout.write(jsonio.dumps(report))
    return EXIT_OK if ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nilmap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nilmap {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=None):
        sp.add_argument("spec", help="family spec (JSON)")
        sp.add_argument("--out-dir", type=Path, default=out_default,
                        help="directory for reports and the run manifest")

    sp = sub.add_parser("verify-nilpotent", help="certify nilpotency of JH and test row dependence")
    common(sp)
    sp.set_defaults(func=cmd_verify_nilpotent)

    sp = sub.add_parser("invert", help="verified inverse of lambda X + H")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=_rational_arg, default=None)
    sp.add_argument("--check-preservation", action="store_true")
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("check-field", help="almost Hurwitz and density scans")
    common(sp)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=_seed_arg, default=42)
    sp.add_argument("--alpha", type=_rational_arg, default=None, help="density exponent (default: bound + 1/10)")
    sp.add_argument("--box", type=float, default=2.0, help="sampling box half-width")
    sp.set_defaults(func=cmd_check_field)

    sp = sub.add_parser("simulate", help="integrate trajectories and summarize their fate")
    common(sp, Path("out"))
    sp.add_argument("--traj", type=int, default=100)
    sp.add_argument("--tmax", type=float, default=500.0)
    sp.add_argument("--seed", type=_seed_arg, default=42)
    sp.add_argument("--box", type=float, default=2.0)
    sp.add_argument("--min-plane-distance", type=float, default=0.05)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    manifest = RunManifest(args.command, str(args.spec), getattr(args, "seed", None))
    manifest.parameters["term_cap"] = get_term_cap()
    cancel = threading.Event()
    previous = None
    if threading.current_thread() is threading.main_thread():
        previous = signal.signal(signal.SIGINT, lambda *_: cancel.set())
    start = time.perf_counter()
    try:
        code = args.func(args, manifest, cancel)
    except UsageError as exc:
        print(f"nilmap: error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except TermCapExceeded as exc:
        print(f"nilmap: term cap exceeded: {exc}", file=sys.stderr)
        code = EXIT_FAILED
    except (IntegrationCancelled, InversionCancelled):
        print("nilmap: interrupted", file=sys.stderr)
        code = EXIT_USAGE
    finally:
        if previous is not None:
            signal.signal(signal.SIGINT, previous)
    manifest.wall_time_ms = int((time.perf_counter() - start) * 1000)
    manifest.exit_code = code
    out_dir = getattr(args, "out_dir", None)
    if out_dir is not None and code != EXIT_USAGE:
        out_dir.mkdir(parents=True, exist_ok=True)
        jsonio.write(out_dir / "manifest.json", manifest)
    return code


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
