"""Command-line front end.

    vortexlab <experiment> [flags] [--config FILE] [--out DIR]

Experiments: crystal, spectrum, bounds, escape, blob, domain, verify.  A
config file holds flat ``key = value`` lines using the long flag names; it
is expanded in front of the command-line flags, so explicit flags win.

Exit status: 0 success, 1 acceptance failure (verify), 2 usage or
parameter error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError, VortexLabError
from .export import write_csv, write_text
from .report import svg_polylines, svg_scatter, tagged, to_json, versions

EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    name: str
    parameters: dict = field(default_factory=dict)
    out_dir: str = "."


def parse_grid(text: str) -> list[float]:
    """``a:b:h`` -> ``[a, a+h, ..., b]`` (inclusive, rounded to 12 decimals)."""
    try:
        a, b, h = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like start:stop:step, got {text!r}")
    if not h > 0 or b < a:
        raise argparse.ArgumentTypeError(f"grid needs step > 0 and stop >= start, got {text!r}")
    n = int(math.floor((b - a) / h + 1e-9)) + 1
    return [round(a + k * h, 12) for k in range(n)]


def parse_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    return lo, hi


def read_config(path: str) -> list[str]:
    """Flat ``key = value`` file -> flag tokens.  ``true``/``false`` toggle switches."""
    tokens = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}")
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise UsageError(f"{path}:{lineno}: empty key")
        flag = "--" + key.replace("_", "-")
        low = value.lower()
        if low in ("true", "yes", "on"):
            tokens.append(flag)
        elif low in ("false", "no", "off"):
            continue
        else:
            tokens += [flag, value]
    return tokens


def _settings(args):
    from .ode import IntegratorSettings
    return IntegratorSettings(rel_tol=args.rtol, abs_tol=args.atol, max_steps=args.max_steps)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--config", help="flat key = value file with default flag values")
    p.add_argument("--rtol", type=float, default=1e-11, help="integrator relative tolerance")
    p.add_argument("--atol", type=float, default=1e-13, help="integrator absolute tolerance")
    p.add_argument("--max-steps", type=int, default=200_000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vortexlab", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="experiment", required=True)

    p = sub.add_parser("crystal", help="build a vortex crystal and report its stationarity residual")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    _common(p)

    p = sub.add_parser("spectrum", help="linearization spectrum and confinement constants")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    _common(p)

    p = sub.add_parser("bounds", help="nu / xi_1 thresholds, or a nu curve over an alpha grid")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=None, help="concentration exponent for beta_0")
    p.add_argument("--beta", type=float, default=None, help="exit exponent for the xi_1 threshold")
    p.add_argument("--curve", action="store_true", help="emit nu_min over --alpha-grid as CSV")
    p.add_argument("--alpha-grid", type=parse_grid, default=parse_grid("1:1.95:0.05"))
    p.add_argument("--parallel", type=int, default=0, help="worker processes for grid points")
    _common(p)

    p = sub.add_parser("escape", help="escape experiment from a perturbed crystal")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--beta", type=float, default=0.75)
    p.add_argument("--window", type=parse_pair, default=None, help="fit window lo:hi in distance units")
    p.add_argument("--horizon", type=float, default=None)
    _common(p)

    p = sub.add_parser("blob", help="marker-cloud blobs around a perturbed crystal")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--nu", type=float, default=4.0)
    p.add_argument("--beta", type=float, default=0.75)
    p.add_argument("--markers", type=int, default=200)
    p.add_argument("--self-interaction", action="store_true",
                   help="include intra-blob interactions (very stiff for concentrated blobs)")
    p.add_argument("--samples", type=int, default=400, help="diagnostic snapshots")
    p.add_argument("--dump-markers", action="store_true", help="also write markers.csv at 5 snapshots")
    _common(p)

    p = sub.add_parser("domain", help="hexagonal domain: Taylor data, saddle record, boundary, Robin field")
    p.add_argument("--delta", type=float, default=0.75)
    p.add_argument("--svg", action="store_true", help="write domain.svg, domains.svg and robin.svg")
    p.add_argument("--escape", action="store_true", help="also run the single-vortex escape experiment")
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--beta", type=float, default=0.75)
    p.add_argument("--radii", type=int, default=24, help="Robin field grid radii")
    p.add_argument("--angles", type=int, default=72, help="Robin field grid angles")
    _common(p)

    p = sub.add_parser("verify", help="run the acceptance suite; nonzero exit on failure")
    p.add_argument("--criteria", default=None, help="comma-separated subset, e.g. 1,2,3")
    _common(p)
    return parser


def _config_record(cfg: ExperimentConfig) -> dict:
    params = {}
    for k, v in cfg.parameters.items():
        if k in ("out", "config", "experiment"):
            continue
        params[k] = list(v) if isinstance(v, tuple) else v
    return {"experiment": cfg.name, "parameters": params}


def _write_report(cfg: ExperimentConfig, filename: str, results: dict) -> str:
    doc = {"config": _config_record(cfg), "versions": versions(), "results": results}
    text = to_json(doc)
    write_text(os.path.join(cfg.out_dir, filename), text)
    return text


# -- experiments ----------------------------------------------------------------

def _cmd_crystal(args, cfg):
    from .core import AlphaModel
    from .crystal import CrystalSpec, build_crystal, center_intensity_sum, stationarity_residual

    m = AlphaModel(args.alpha)
    spec = CrystalSpec(args.n, m)
    Z = build_crystal(spec)
    s = center_intensity_sum(spec)
    res = {
        "n": tagged(args.n, "input"),
        "alpha": tagged(m.alpha, "input"),
        "c_alpha": tagged(m.c_alpha, "closed-form"),
        "positions": tagged(Z.positions, "closed-form"),
        "intensities": tagged(Z.intensities, "closed-form"),
        "center_intensity_imaginary_residue": tagged(s.imag, "computed"),
        "stationarity_residual": tagged(stationarity_residual(m, Z), "computed"),
    }
    return _write_report(cfg, "crystal.json", res)


def _spectrum_record(m, Z, rep) -> dict:
    from .linearization import symmetry_defect

    res = {
        "n": tagged(Z.n, "input"),
        "alpha": tagged(m.alpha, "input"),
        "c_alpha": tagged(m.c_alpha, "closed-form"),
        "eigenvalues": tagged([complex(e) for e in rep.eigenvalues], "computed"),
        "lambda0": tagged(rep.lambda0, "computed"),
        "dominant_is_real": tagged(rep.dominant_is_real, "computed"),
        "unstable_eigenvector": tagged(rep.unstable_eigenvector, "computed"),
        "eigenvector_residual": tagged(rep.eigenvector_residual, "computed"),
        "kappa1": tagged(rep.kappa1, "computed"),
        "kappa2": tagged(rep.kappa2, "computed"),
        "kappa2_without_c_alpha": tagged(rep.kappa2_unscaled, "computed"),
        "spectrum_symmetry_defect": tagged(symmetry_defect(rep.eigenvalues), "computed"),
    }
    if Z.n == 3:
        lam = m.c_alpha * (2.0 - 2.0 ** (-m.alpha)) * math.sqrt(m.alpha)
        res["lambda0_closed_form"] = tagged(lam, "closed-form")
    return res


def _cmd_spectrum(args, cfg):
    from .core import AlphaModel
    from .crystal import CrystalSpec, build_crystal
    from .linearization import linearize

    m = AlphaModel(args.alpha)
    Z = build_crystal(CrystalSpec(args.n, m))
    return _write_report(cfg, "spectrum.json", _spectrum_record(m, Z, linearize(m, Z)))


def _curve_point(job):
    from .bounds import nu_curve_details
    n, a = job
    return nu_curve_details(n, [a])[0]


def _cmd_bounds(args, cfg):
    from .bounds import g_closed_form, threshold_report, xi1_threshold
    from .core import AlphaModel
    from .crystal import CrystalSpec, build_crystal
    from .linearization import linearize

    if args.curve:
        jobs = [(args.n, a) for a in args.alpha_grid]
        if args.parallel and args.parallel > 1:
            with ProcessPoolExecutor(max_workers=args.parallel) as pool:
                pts = list(pool.map(_curve_point, jobs))
        else:
            pts = [_curve_point(j) for j in jobs]
        header = ["alpha", "nu_min", "lambda0", "kappa1", "kappa2", "dominant_is_real"]
        if args.n == 3:
            header.append("g_closed_form")
        rows = []
        for p in pts:
            row = [p.alpha, p.nu_min, p.lambda0, p.kappa1, p.kappa2, p.dominant_is_real]
            if args.n == 3:
                row.append(g_closed_form(p.alpha))
            rows.append(row)
        write_csv(os.path.join(cfg.out_dir, "nu_curve.csv"), header, rows)
        res = {
            "n": tagged(args.n, "input"),
            "alpha_grid": tagged(list(args.alpha_grid), "input"),
            "max_nu_min": tagged(max(p.nu_min for p in pts), "computed"),
            "all_below_4": tagged(all(p.nu_min < 4.0 for p in pts), "computed"),
            "complex_dominant_alphas": tagged([p.alpha for p in pts if not p.dominant_is_real], "computed"),
        }
        return _write_report(cfg, "bounds_curve.json", res)

    m = AlphaModel(args.alpha)
    rep = linearize(m, build_crystal(CrystalSpec(args.n, m)))
    tr = threshold_report(m.alpha, rep.kappa1, rep.kappa2, rep.lambda0, args.nu)
    res = {
        "n": tagged(args.n, "input"),
        "alpha": tagged(m.alpha, "input"),
        "nu": tagged(args.nu, "input"),
        "lambda0": tagged(tr.lambda0, "computed"),
        "kappa1": tagged(tr.kappa1, "computed"),
        "kappa2": tagged(tr.kappa2, "computed"),
        "nu_min": tagged(tr.nu_min, "computed"),
        "xi1_factor": tagged(tr.xi1_factor, "computed"),
        "beta_critical": tagged(tr.beta_critical, "closed-form"),
        "beta0": tagged(tr.beta0, "computed"),
    }
    if args.beta is not None:
        res["beta"] = tagged(args.beta, "input")
        res["xi1_threshold"] = tagged(xi1_threshold(args.beta, tr.lambda0), "computed")
    if args.n == 3:
        res["g_closed_form"] = tagged(g_closed_form(m.alpha), "closed-form")
    return _write_report(cfg, "bounds.json", res)


def _cmd_escape(args, cfg):
    from .core import AlphaModel
    from .crystal import CrystalSpec
    from .ode import escape_experiment, trajectory_csv

    m = AlphaModel(args.alpha)
    r = escape_experiment(m, CrystalSpec(args.n, m), args.epsilon, args.beta, _settings(args),
                          horizon=args.horizon, window=args.window)
    tr = r.trajectory
    trajectory_csv(tr.times, tr.flat_states, os.path.join(cfg.out_dir, "trajectory.csv"))
    drift = tr.invariant_drift()
    res = {
        "epsilon": tagged(r.epsilon, "input"),
        "beta": tagged(r.beta, "input"),
        "lambda0": tagged(r.lambda0, "computed"),
        "tau_z": tagged(r.tau_z, "measured"),
        "tau_over_abs_log_eps": tagged(r.tau_ratio, "measured"),
        "prediction": tagged(r.prediction, "computed"),
        "linear_escape_estimate": tagged(((1 - r.beta) * abs(math.log(r.epsilon)) + math.log(4.0)) / r.lambda0,
                                         "computed"),
        "fitted_rate": tagged(r.fitted_rate, "measured"),
        "fit_window": tagged(list(r.window), "input" if args.window else "computed"),
        "fit_points": tagged(r.fit_points, "measured"),
        "steps": tagged(tr.solution.n_steps, "measured"),
        "hamiltonian_drift": tagged(drift.hamiltonian, "measured"),
        "momentum_drift": tagged(drift.linear_momentum, "measured"),
        "angular_impulse_drift": tagged(drift.angular_impulse, "measured"),
    }
    return _write_report(cfg, "escape.json", res)


def _cmd_blob(args, cfg):
    from .blobs import blob_escape, diagnostics_csv, markers_csv
    from .core import AlphaModel
    from .crystal import CrystalSpec

    m = AlphaModel(args.alpha)
    r = blob_escape(m, CrystalSpec(args.n, m), args.epsilon, args.nu, args.beta, args.markers,
                    _settings(args), self_interaction=args.self_interaction, n_times=args.samples)
    diagnostics_csv(r.diagnostics, os.path.join(cfg.out_dir, "blob_diagnostics.csv"))
    if args.dump_markers:
        markers_csv(r.cloud, np.linspace(0.0, r.tau_z, 5), os.path.join(cfg.out_dir, "markers.csv"))
    d = r.diagnostics
    ex = r.exit_time if r.exit_time is not None else d.times[-1]
    mask = d.times <= ex
    env = d.inertias[0][None, :] * np.exp(1.2 * 2.0 * r.kappa1 * d.times[:, None])
    res = {
        "epsilon": tagged(args.epsilon, "input"),
        "nu": tagged(args.nu, "input"),
        "beta": tagged(args.beta, "input"),
        "markers_per_blob": tagged(args.markers, "input"),
        "self_interaction": tagged(args.self_interaction, "input"),
        "patch_radius": tagged(args.epsilon ** (args.nu / 2) / 4, "closed-form"),
        "patch_amplitude": tagged(16 * np.abs(r.cloud.template.blob_intensity) * args.epsilon ** (-args.nu) / math.pi,
                                  "closed-form"),
        "lambda0": tagged(r.lambda0, "computed"),
        "kappa1": tagged(r.kappa1, "computed"),
        "tau_z_oracle": tagged(r.tau_z, "measured"),
        "exit_time": tagged(r.exit_time, "measured"),
        "exit_time_bound": tagged(1.1 * r.prediction, "computed"),
        "max_barycenter_gap": tagged(float(r.gap.max()), "measured"),
        "max_inertia_envelope_ratio": tagged(float(np.max(d.inertias[mask] / env[mask])), "measured"),
        "regularizations": tagged(r.cloud.regularizations, "measured"),
        "invariant_drift": tagged(r.invariant_drift, "measured"),
    }
    return _write_report(cfg, "blob_summary.json", res)


def _cmd_domain(args, cfg):
    from .bounds import domain_thresholds
    from .domain import HexDomain, boundary_csv, domain_escape, robin_csv, robin_field, rhs_jacobian

    dom = HexDomain(args.delta)
    t = dom.taylor
    th = domain_thresholds(abs(t.t1), abs(t.t3))
    ev = np.linalg.eigvals(rhs_jacobian(dom, 1.0))
    boundary_csv(dom, os.path.join(cfg.out_dir, "boundary.csv"))
    field_ = robin_field(dom, args.radii, args.angles)
    robin_csv(field_, os.path.join(cfg.out_dir, "robin_field.csv"))
    res = {
        "delta": tagged(dom.delta, "input"),
        "S1": tagged(t.s1, "closed-form"),
        "S2": tagged(t.s2, "closed-form"),
        "S3": tagged(t.s3, "closed-form"),
        "T1": tagged(t.t1, "closed-form"),
        "T3": tagged(t.t3, "closed-form"),
        "vertices": tagged([complex(v) for v in dom.vertices], "computed"),
        "saddle": tagged(th.saddle, "closed-form"),
        "lambda_plus": tagged(th.lambda_plus, "closed-form"),
        "lambda_minus": tagged(th.lambda_minus, "closed-form"),
        "lambda0": tagged(th.lambda0, "closed-form"),
        "lambda0_finite_difference": tagged(float(max(ev.real)), "computed"),
        "nu_min": tagged(th.nu_min, "closed-form"),
        "kappa1": tagged(th.kappa1, "closed-form"),
        "kappa2": tagged(th.kappa2, "closed-form"),
        "ratio_T3_over_T1_cubed": tagged(th.ratio, "closed-form"),
    }
    if args.escape:
        esc = domain_escape(dom, args.epsilon, args.beta, 1.0, _settings(args))
        res["escape"] = {
            "epsilon": tagged(args.epsilon, "input"),
            "beta": tagged(args.beta, "input"),
            "tau_z": tagged(esc.escape.tau_z, "measured"),
            "fitted_rate": tagged(esc.escape.fitted_rate, "measured"),
            "level_line_drift": tagged(esc.level_drift, "measured"),
        }
    if args.svg:
        write_text(os.path.join(cfg.out_dir, "domain.svg"),
                   svg_polylines([(f"delta = {dom.delta:g}", dom.boundary)], f"Hexagonal domain, delta = {dom.delta:g}",
                                 markers=list(dom.vertices) + [0j]))
        family = [(f"delta = {d:.4g}", HexDomain(d).boundary) for d in (0.5, 2.0 / 3.0, 0.75, 0.9)]
        write_text(os.path.join(cfg.out_dir, "domains.svg"),
                   svg_polylines(family, "Hexagonal domains for several delta"))
        write_text(os.path.join(cfg.out_dir, "robin.svg"),
                   svg_scatter(field_.z, field_.gamma_tilde, f"Robin function, delta = {dom.delta:g}",
                               outline=dom.boundary))
    return _write_report(cfg, "domain.json", res)


def _cmd_verify(args, cfg):
    from . import acceptance

    if args.criteria:
        try:
            nums = [int(x) for x in args.criteria.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"--criteria must be comma-separated integers, got {args.criteria!r}")
        bad = [k for k in nums if k not in acceptance.CRITERIA]
        if bad:
            raise UsageError(f"unknown criteria {bad}")
    else:
        nums = None
    results = acceptance.run_all(nums)
    for r in results:
        print(acceptance.format_line(r))
    summary = {str(r.number): {"title": r.title, "passed": r.passed, "seconds": r.seconds,
                               "checks": [{"name": c.name, "passed": c.passed,
                                           "value": c.value if not isinstance(c.value, bool) else str(c.value),
                                           "threshold": c.threshold} for c in r.checks]}
               for r in results}
    write_text(os.path.join(cfg.out_dir, "verify.json"), to_json(summary))
    return all(r.passed for r in results)


COMMANDS = {
    "crystal": _cmd_crystal,
    "spectrum": _cmd_spectrum,
    "bounds": _cmd_bounds,
    "escape": _cmd_escape,
    "blob": _cmd_blob,
    "domain": _cmd_domain,
    "verify": _cmd_verify,
}


def _expand_config(argv: list[str]) -> list[str]:
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or not argv:
        return argv
    # config tokens go right after the experiment name so later flags override them
    return [argv[0], *read_config(known.config), *argv[1:]]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except UsageError as exc:
        print(f"vortexlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    cfg = ExperimentConfig(args.experiment, dict(vars(args)), args.out)
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
        out = COMMANDS[args.experiment](args, cfg)
    except UsageError as exc:
        print(f"vortexlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"vortexlab: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"vortexlab: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except VortexLabError as exc:
        print(f"vortexlab: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.experiment == "verify":
        return 0 if out else 1
    sys.stdout.write(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
