"""
isodense command line.

    python app.py <subcommand> [options]

Every subcommand reads its defaults from config.yaml, writes JSON or CSV to stdout (or
--output) and logs to stderr. Exit codes: 0 success, 1 input error, 2 non-convergence.
"""
import argparse
import json
import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from src import existence, spectral, symmetrize, variational
from src.data_engine import DensityEngine
from src.density_core import DensityModel, classify_convexity, classify_shape
from src.errors import InputError
from src.help_text import DESCRIPTION, EPILOG, EXPRESSION_HELP, ZETA_VERDICT_FOOTER
from src.line1d import SolverSettings, brute_force_profile, profile_sweep, solve_any, sweep_rows
from src.utils import RunConfig, dump_csv, dump_json, load_config, max_workers, write_output

logger = logging.getLogger("isodense")

DENSITY_FLAGS = (("density", "f"), ("psi", "psi"), ("delta", "delta"), ("builtin", "builtin"), ("csv", "csv"))
EXPRESSION_FLAGS = ("--density", "--psi", "--delta")

Outcome = Tuple[str, int]


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors through InputError so they share exit code 1."""

    def error(self, message):
        raise InputError(message)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _add_density(parser: argparse.ArgumentParser, radial: bool = False):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--density", help="density f as an expression (see 'help expressions')")
    group.add_argument("--psi", help="log-density psi as an expression")
    if radial:
        group.add_argument("--delta", help="radial profile delta(r), psi(x) = delta(|x|)")
    group.add_argument("--builtin", help="built-in density name")
    group.add_argument("--csv", help="CSV of samples t,psi")
    parser.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                        help="bind a free identifier of the expression")
    if not radial:
        parser.add_argument("--domain", default="R", help="R, [a,inf) or [a,b]")


def _add_set(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--set", dest="set_path", help="ColumnarSet JSON")
    group.add_argument("--mask", help="binary mask JSON {h, window, rows}")
    group.add_argument("--random", action="store_true", help="random union of disks (uses --seed)")
    parser.add_argument("--c", type=float, default=None, help="density exp(c|x|^2); required with --mask")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isodense", description=DESCRIPTION, epilog=EPILOG,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", default="config.yaml")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--output", default=None, help="write the main artifact here instead of stdout")
    parser.add_argument("--format", dest="fmt", choices=["json", "csv"], default=None)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("profile", help="isoperimetric profile of a line density")
    _add_density(p)
    p.add_argument("--volume", type=float, nargs="+", required=True)
    p.add_argument("--free-boundary", action="store_true")

    p = sub.add_parser("classify", help="shape and log-convexity class")
    _add_density(p)
    p.add_argument("--window", type=float, nargs=2, default=None)
    p.add_argument("--samples", type=int, default=None)

    p = sub.add_parser("stability", help="second variation of a centred ball")
    _add_density(p, radial=True)
    p.add_argument("--n", type=int, required=True, help="sphere dimension (ambient n+1)")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--modes", type=int, default=None)

    p = sub.add_parser("meancurv", help="weighted mean curvature of spheres and hyperplanes")
    _add_density(p, radial=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--surface", choices=["sphere", "hyperplane"], default="sphere")
    p.add_argument("--r", type=float, default=None, help="sphere radius")
    p.add_argument("--c", type=float, default=None, help="hyperplane offset")
    p.add_argument("--point", type=float, nargs="+", default=None, help="point on the hyperplane")
    p.add_argument("--rigidity", type=float, nargs=2, default=None, metavar=("R0", "R1"),
                   help="check whether off-origin hyperplanes can have constant curvature")

    p = sub.add_parser("firstvar", help="finite-difference first variation residuals")
    _add_density(p, radial=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--surface", choices=["sphere", "hyperplane"], default="sphere")
    p.add_argument("--size", type=float, default=1.0, help="sphere radius or hyperplane offset")
    p.add_argument("--flow", choices=["constant", "harmonic"], default="constant")
    p.add_argument("--h", type=float, default=None)

    p = sub.add_parser("symmetrize", help="Steiner symmetrization towards the centred ball")
    _add_set(p)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--h", type=float, default=None, help="grid spacing for --random")
    p.add_argument("--no-rotations", action="store_true")
    p.add_argument("--final", default=None, help="write the final set JSON here")
    p.add_argument("--reflect", type=int, default=None, metavar="AXIS",
                   help="apply one reflection in {x_AXIS = 0} instead of symmetrizing")

    p = sub.add_parser("existence", help="zeta(m) table and divergence verdict")
    _add_density(p, radial=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m-max", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--mode", choices=[m.value for m in existence.ZetaMode], default="radial-formula")

    p = sub.add_parser("annulus-check", help="planar inequality for sets outside a disk")
    _add_set(p)
    p.add_argument("--r0", type=float, required=True)

    for name, text in (("eigen", "lowest Dirichlet eigenvalue"),
                       ("faber-krahn", "eigenvalue comparison against the centred ball")):
        p = sub.add_parser(name, help=text)
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--mask", help="binary mask JSON {h, window, rows}")
        group.add_argument("--interval", type=float, nargs=2, metavar=("A", "B"))
        p.add_argument("--h", type=float, default=None, help="grid spacing for --interval")
        p.add_argument("--c", type=float, required=True)
        p.add_argument("--sign-convention", choices=[s.value for s in spectral.SignConvention], default=None)
        if name == "faber-krahn":
            p.add_argument("--rel-tol", type=float, default=1e-2)

    p = sub.add_parser("oracle", help="brute-force profile on a grid")
    _add_density(p)
    p.add_argument("--volume", type=float, required=True)
    p.add_argument("--window", type=float, nargs=2, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--max-components", type=int, default=None)
    p.add_argument("--free-boundary", action="store_true")

    sub.add_parser("help", help="describe the density expression language")
    return parser


def _parameters(pairs: Sequence[str]) -> Dict[str, float]:
    bound = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise InputError(f"--param expects NAME=VALUE, got '{pair}'")
        try:
            bound[name.strip()] = float(value)
        except ValueError as e:
            raise InputError(f"--param {name}: {e}") from e
    return bound


def to_run_config(args: argparse.Namespace) -> RunConfig:
    """Flatten parsed flags into a RunConfig; subcommand options land in knobs."""
    values = vars(args).copy()
    density, kind = None, "f"
    for flag, flag_kind in DENSITY_FLAGS:
        if values.pop(flag, None) is not None and density is None:
            density, kind = getattr(args, flag), flag_kind
    common = {"subcommand", "config", "log_level", "seed", "output", "fmt", "param", "domain"}
    knobs = {k: v for k, v in values.items() if k not in common}
    return RunConfig(subcommand=args.subcommand, density=density, density_kind=kind,
                     parameters=_parameters(values.get("param") or []),
                     domain=values.get("domain") or "R", knobs=knobs, output=args.output,
                     fmt=args.fmt or "", seed=args.seed)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _density(run_config: RunConfig, dimension: Optional[int] = None) -> DensityModel:
    if run_config.density is None:
        raise InputError("No density given (use --density, --psi, --delta, --builtin or --csv)")
    engine = DensityEngine()
    return engine.load(run_config.density, run_config.density_kind, run_config.parameters,
                       run_config.domain, dimension)


def _radial(run_config: RunConfig) -> variational.RadialDensity:
    n = run_config.knobs["n"]
    if n < 1:
        raise InputError(f"--n must be a positive integer, got {n}")
    return variational.RadialDensity(_density(run_config, dimension=n + 1))


def _read_json(path: str) -> dict:
    if not os.path.exists(path):
        raise InputError(f"File not found: {path}")
    with open(path, "r") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise InputError(f"Malformed JSON in {path}: {e}") from e


def _columnar_set(run_config: RunConfig, settings: dict) -> symmetrize.ColumnarSet:
    knobs = run_config.knobs
    c = knobs.get("c")
    if knobs.get("set_path"):
        if c is not None:
            raise InputError("--c conflicts with --set; the set file carries its own c")
        return symmetrize.ColumnarSet.from_dict(_read_json(knobs["set_path"]))
    if knobs.get("mask"):
        if c is None:
            raise InputError("--mask needs --c")
        return symmetrize.from_mask(_read_json(knobs["mask"]), c)
    if knobs.get("random"):
        if run_config.seed is None:
            raise InputError("--random needs --seed")
        h = knobs.get("h") or settings["symmetrize"]["h"]
        return symmetrize.random_blobs(run_config.seed, h=h, c=1.0 if c is None else c)
    raise InputError("No set given (use --set, --mask or --random)")


def _grid_domain(run_config: RunConfig) -> spectral.GridDomain:
    knobs = run_config.knobs
    if knobs.get("mask"):
        return spectral.GridDomain.from_mask(_read_json(knobs["mask"]))
    if knobs.get("h") is None:
        raise InputError("--interval needs --h")
    a, b = knobs["interval"]
    return spectral.GridDomain.interval(a, b, knobs["h"])


def cmd_profile(run_config: RunConfig, settings: dict) -> Outcome:
    density = _density(run_config)
    solver = SolverSettings.from_config(settings)
    volumes = run_config.knobs["volume"]
    free = run_config.knobs["free_boundary"]
    if len(volumes) == 1 and run_config.fmt != "csv":
        return dump_json(solve_any(density, volumes[0], free, solver).to_dict()), 0
    results = profile_sweep(density, volumes, free, solver, workers=max_workers(settings))
    if run_config.fmt == "json":
        return dump_json({"results": [r.to_dict() for r in results]}), 0
    return dump_csv(pd.DataFrame(sweep_rows(results), columns=["volume", "infimum", "attained", "kind"])), 0


def cmd_classify(run_config: RunConfig, settings: dict) -> Outcome:
    density = _density(run_config)
    section = settings["profile"]
    window = tuple(run_config.knobs["window"] or section["classify_window"])
    samples = run_config.knobs["samples"] or section["classify_samples"]
    shape = classify_shape(density, window, samples)
    convexity = classify_convexity(density, window, samples)
    payload = shape.to_dict()
    payload["convexity"] = convexity.value if convexity else None
    payload["density"] = density.name
    return dump_json(payload), 0


def cmd_stability(run_config: RunConfig, settings: dict) -> Outcome:
    density = _radial(run_config)
    modes = run_config.knobs["modes"] or settings["variational"]["modes"]
    return dump_json(variational.ball_stability(density, run_config.knobs["r"], modes).to_dict()), 0


def cmd_meancurv(run_config: RunConfig, settings: dict) -> Outcome:
    density = _radial(run_config)
    knobs = run_config.knobs
    if knobs["rigidity"] is not None:
        report = variational.hyperplane_cmc_rigidity(density, tuple(knobs["rigidity"]))
        return dump_json(report.to_dict()), 0
    if knobs["surface"] == "sphere":
        if knobs["r"] is None:
            raise InputError("--surface sphere needs --r")
        value = variational.mean_curvature_sphere(density, knobs["r"])
        return dump_json({"surface": "sphere", "r": knobs["r"], "n": density.n, "H": value}), 0
    if knobs["c"] is None:
        raise InputError("--surface hyperplane needs --c")
    point = knobs["point"] or [knobs["c"]] + [0.0] * density.n
    value = variational.mean_curvature_hyperplane(density, knobs["c"], point)
    return dump_json({"surface": "hyperplane", "c": knobs["c"], "point": point, "n": density.n, "H": value}), 0


def cmd_firstvar(run_config: RunConfig, settings: dict) -> Outcome:
    density = _radial(run_config)
    knobs, section = run_config.knobs, settings["variational"]
    result = variational.first_variation_check(
        density, variational.Surface(knobs["surface"]), knobs["size"], variational.Flow(knobs["flow"]),
        knobs["h"] or section["fd_step"], section["sphere_polar"], section["sphere_azimuth"])
    return dump_json(result.to_dict()), 0


def cmd_symmetrize(run_config: RunConfig, settings: dict) -> Outcome:
    cset = _columnar_set(run_config, settings)
    knobs, section = run_config.knobs, settings["symmetrize"]
    if knobs["reflect"] is not None:
        reflection = symmetrize.hsiang_reflect(cset, knobs["reflect"])
        if knobs["final"]:
            write_output(dump_json(reflection.result.to_dict(section["margin_cells"])), knobs["final"])
        return dump_json(reflection.to_dict()), 0
    run = symmetrize.converge_to_ball(cset, knobs["max_steps"] or section["max_steps"], knobs["tol"],
                                      rotations=not knobs["no_rotations"])
    if knobs["final"]:
        write_output(dump_json(run.final.to_dict(section["margin_cells"])), knobs["final"])
    if run_config.fmt == "json":
        payload = run.to_dict()
        payload["log"] = run.to_frame().to_dict(orient="records")
        return dump_json(payload), 0
    return dump_csv(run.to_frame()), 0


def cmd_existence(run_config: RunConfig, settings: dict) -> Outcome:
    n = run_config.knobs["n"]
    density = _density(run_config, dimension=n + 1)
    section = settings["existence"]
    seq = existence.zeta_sequence(density, n, run_config.knobs["m_max"] or section["m_max"],
                                  existence.ZetaMode(run_config.knobs["mode"]), section["annulus_samples"])
    horizon = min(run_config.knobs["horizon"] or section["horizon"], len(seq.log_values))
    verdict = existence.divergence_verdict(seq, horizon)
    if run_config.fmt == "json":
        return dump_json({"n": n, "mode": seq.mode, "log_zeta": list(seq.log_values),
                          "verdict": verdict, "diagnostic": True}), 0
    return dump_csv(seq.to_frame(), footer=ZETA_VERDICT_FOOTER.format(verdict=verdict.value)), 0


def cmd_annulus_check(run_config: RunConfig, settings: dict) -> Outcome:
    cset = _columnar_set(run_config, settings)
    return dump_json(existence.planar_annulus_inequality_check(cset, run_config.knobs["r0"]).to_dict()), 0


def _convention(run_config: RunConfig, settings: dict) -> spectral.SignConvention:
    return spectral.SignConvention(run_config.knobs["sign_convention"] or settings["spectral"]["sign_convention"])


def cmd_eigen(run_config: RunConfig, settings: dict) -> Outcome:
    domain = _grid_domain(run_config)
    section = settings["spectral"]
    result = spectral.lambda1(domain, run_config.knobs["c"], _convention(run_config, settings),
                              section["tol"], section["max_iter"])
    return dump_json(result.to_dict()), 0 if result.converged else 2


def cmd_faber_krahn(run_config: RunConfig, settings: dict) -> Outcome:
    domain = _grid_domain(run_config)
    section = settings["spectral"]
    result = spectral.faber_krahn_compare(domain, run_config.knobs["c"], _convention(run_config, settings),
                                          run_config.knobs["rel_tol"], section["tol"], section["max_iter"])
    return dump_json(result.to_dict()), 0


def cmd_oracle(run_config: RunConfig, settings: dict) -> Outcome:
    density = _density(run_config)
    section, knobs = settings["oracle"], run_config.knobs
    result = brute_force_profile(density, knobs["volume"], tuple(knobs["window"] or section["window"]),
                                 knobs["points"] or section["points"],
                                 knobs["max_components"] or section["max_components"], knobs["free_boundary"])
    return dump_json(result.to_dict()), 0


def cmd_help(run_config: RunConfig, settings: dict) -> Outcome:
    return EXPRESSION_HELP, 0


COMMANDS: Dict[str, Callable[[RunConfig, dict], Outcome]] = {
    "profile": cmd_profile,
    "classify": cmd_classify,
    "stability": cmd_stability,
    "meancurv": cmd_meancurv,
    "firstvar": cmd_firstvar,
    "symmetrize": cmd_symmetrize,
    "existence": cmd_existence,
    "annulus-check": cmd_annulus_check,
    "eigen": cmd_eigen,
    "faber-krahn": cmd_faber_krahn,
    "oracle": cmd_oracle,
    "help": cmd_help,
}


def _error_envelope(error: Exception, code: int) -> str:
    return dump_json({"success": False, "error": str(error), "error_type": type(error).__name__,
                      "exit_code": code})


def run(run_config: RunConfig, settings: Optional[dict] = None) -> int:
    """Execute one subcommand; artifacts go to run_config.output or stdout."""
    settings = settings or load_config()
    handler = COMMANDS.get(run_config.subcommand)
    try:
        if handler is None:
            raise InputError(f"Unknown subcommand '{run_config.subcommand}'")
        text, code = handler(run_config, settings)
    except ValueError as e:
        logger.error(f"{run_config.subcommand}: {e}")
        print(_error_envelope(e, 1))
        return 1
    except ArithmeticError as e:
        logger.error(f"{run_config.subcommand}: {e}")
        print(_error_envelope(e, 2))
        return 2
    write_output(text, run_config.output)
    return code


def _attach_expressions(argv: List[str]) -> List[str]:
    """'--delta -sqrt(r^2+1)' becomes '--delta=-sqrt(r^2+1)' so argparse keeps the leading minus."""
    joined, i = [], 0
    while i < len(argv):
        token = argv[i]
        if token in EXPRESSION_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and not argv[i + 1].startswith("--"):
            joined.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        joined.append(token)
        i += 1
    return joined


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = _attach_expressions(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except InputError as e:
        print(_error_envelope(e, 1))
        return 1
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        run_config = to_run_config(args)
    except InputError as e:
        print(_error_envelope(e, 1))
        return 1
    logger.info(f"Running {run_config.subcommand} with {run_config.to_dict()}")
    return run(run_config, load_config(args.config))


if __name__ == "__main__":
    sys.exit(main())
