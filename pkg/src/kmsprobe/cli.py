"""Command-line runner for scenario files.

    kmsprobe run SCENARIO [--out DIR] [--workers N] [--tolerance-overrides k=v,...]
    kmsprobe check SCENARIO
    kmsprobe list-kernels
    kmsprobe plotdata RESULTS_DIR --kind spectrum|sweep|kernel

Exit codes: 0 success, 1 validation, 2 numerical failure, 3 verdict failure.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import datetime
import hashlib
import json
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .config import (ConfigError, apply_tolerance_overrides, bundled_scenarios,
                     config_hash, load_config, parse_config, serialize_config)
from .correlators import (CATALOG, COUPLINGS, OPERATORS, background_for,
                          complex_operator_set, hermitian_set, pointlike_kernel,
                          smeared_correlator)
from .detector import (DetectorSetup, DetectorSpec, bump_switching,
                       gaussian_profile, gaussian_switching, mu_preset, point_profile,
                       response_rows, RESPONSE_COLUMNS)
from .errors import (AssumptionError, KmsProbeError, OutOfDomainError, PreconditionError,
                     UnsupportedKernelError)
from .fourier import kernel_fourier
from .tables import read_table, write_table
from .thermometry import (SWEEP_COLUMNS, acceleration_to_inverse_length,
                          anti_periodicity_residual, detailed_balance_residual,
                          edr_beta_estimate, edr_convergence_sweep, smearing_moments,
                          sweep_rows, unruh_temperature, validity_bounds)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_VERDICT = 0, 1, 2, 3
RESIDUAL_COLUMNS = ["check", "omega", "value", "tolerance", "status"]
SPECTRUM_POINTS = 201
KERNEL_POINTS = 201


# ---------------------------------------------------------------------------
# pipeline assembly

def natural_acceleration(cfg):
    a = cfg.kernel.a
    return acceleration_to_inverse_length(a) if cfg.units == "SI" else a


def build_profile(cfg):
    sm = cfg.smearing
    if sm.profile == "point":
        return point_profile(center=sm.center)
    return gaussian_profile(sm.sigma, center=sm.center, n=sm.nodes)


def build_correlators(cfg):
    k = cfg.kernel
    a = natural_acceleration(cfg)
    beta = k.beta if k.name == "thermal_inertial" else None
    profile = build_profile(cfg)
    pointlike = cfg.smearing.profile == "point" and not any(cfg.smearing.center)
    if pointlike and k.coupling == "scalar":
        base = pointlike_kernel(k.name, a=a, beta=beta)
        return hermitian_set(base) if k.operator == "hermitian" else complex_operator_set(base)
    bg = background_for(k.name, a=a, beta=beta)
    direction = k.direction if k.coupling == "derivative" else None
    return smeared_correlator(bg, profile, operator=k.operator, direction=direction)


def build_setup(cfg, omega=None, mu=None):
    d = cfg.detector
    mu_in, mu_ni = mu_preset(mu or d.mu, d.seed)
    det = DetectorSpec(omega if omega is not None else d.omegas[0],
                       mu_in=mu_in, mu_ni=mu_ni, lam=d.lam)
    chi = gaussian_switching() if cfg.switching.shape == "gaussian" else bump_switching()
    return DetectorSetup(build_correlators(cfg), det, chi, route=cfg.switching.route,
                         spectrum=cfg.switching.spectrum, label=cfg.name)


# ---------------------------------------------------------------------------
# per-gap job (runs in worker processes; rebuilt from the serialized config)

def _failure_text(exc):
    return type(exc).__name__ + ":" + str(exc).replace("\t", " ").replace("\n", " ")


def _omega_job(cfg_text, omega):
    cfg = parse_config(cfg_text)
    setup = build_setup(cfg, omega=omega)
    Ts = cfg.sweep.T
    try:
        sweep = edr_convergence_sweep(setup, Ts, tol=cfg.sweep.tolerance,
                                      raise_on_failure=False)
    except KmsProbeError as exc:
        batch = []
        for T in Ts:
            try:
                batch.append(((omega, T), setup.response(T)))
            except KmsProbeError as inner:
                batch.append(((omega, T), inner))
        return {"omega": omega, "responses": response_rows(batch), "sweep": [],
                "verdict": "numerical-failure", "error": _failure_text(exc)}
    batch = [((omega, r.T), r) for r in sweep.responses]
    out = {"omega": omega, "responses": response_rows(batch),
           "sweep": sweep_rows(cfg.name, sweep), "verdict": sweep.verdict,
           "beta_hat": sweep.terminal.beta_hat, "beta_nominal": sweep.beta_nominal,
           "rel_error": sweep.errors[-1]}
    if cfg.checks.route_equivalence:
        worst = 0.0
        for r in sweep.responses:
            other_route = "direct" if r.route == "fourier" else "fourier"
            o = setup.response(r.T, route=other_route)
            for x, y in ((r.log_p_up, o.log_p_up), (r.log_p_down, o.log_p_down)):
                worst = max(worst, abs(math.expm1(x - y)))
        out["route_diff"] = worst
    return out


def _run_jobs(cfg, workers):
    text = serialize_config(cfg)
    omegas = sorted(cfg.detector.omegas)
    if workers > 1 and len(omegas) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_omega_job, [text] * len(omegas), omegas))
    else:
        results = [_omega_job(text, om) for om in omegas]
    return sorted(results, key=lambda r: r["omega"])


# ---------------------------------------------------------------------------
# checks

def _status(ok):
    return "pass" if ok else "fail"


def _kms_checks(cfg, setup, rows):
    c = cfg.checks
    beta = setup.beta_nominal
    if not math.isfinite(beta):
        for name, flag in (("detailed_balance", c.detailed_balance),
                           ("anti_periodicity", c.anti_periodicity)):
            if flag:
                rows.append([name, math.nan, math.nan, c.kms_tolerance, "n/a: no finite beta"])
        return
    if c.detailed_balance:
        grid = np.linspace(-c.omega_max, c.omega_max, c.n_omega) / beta
        r = detailed_balance_residual(setup.w_in, beta, grid, swapped=setup.w_ni)
        rows.append(["detailed_balance", math.nan, r, c.kms_tolerance,
                     _status(r < c.kms_tolerance)])
    if c.anti_periodicity:
        tau = np.linspace(-c.tau_max, c.tau_max, c.n_tau)
        tau = tau[tau != 0]
        r = anti_periodicity_residual(setup.w_in, beta, tau, swapped=setup.w_ni)
        rows.append(["anti_periodicity", math.nan, r, 1e-8, _status(r < 1e-8)])


def _mu_check(cfg, rows):
    c = cfg.checks
    if not c.mu_presets:
        return
    T = cfg.sweep.T[-1]
    for om in sorted(cfg.detector.omegas):
        bh = []
        for name in c.mu_presets:
            res = build_setup(cfg, omega=om, mu=name).response(T)
            bh.append(edr_beta_estimate(res.p_up, res.p_down, om, T,
                                        res.log_p_up, res.log_p_down).beta_hat)
        spread = (max(bh) - min(bh)) / abs(np.mean(bh))
        rows.append(["mu_spread", om, spread, c.mu_spread, _status(spread < c.mu_spread)])


def _validity_check(cfg, rows, lines):
    c = cfg.checks
    if not c.validity:
        return
    a = natural_acceleration(cfg) if cfg.kernel.name == "vacuum_accelerated" else 0.0
    a_i = (a, 0.0, 0.0)
    rep = smearing_moments(build_profile(cfg), a_i=a_i)
    val = validity_bounds(rep, a_i=a_i, threshold=c.validity_threshold)
    rows.append(["validity_adx", math.nan, val.adx, c.validity_threshold,
                 _status(val.adx < c.validity_threshold)])
    rows.append(["validity_dipole", math.nan, val.bound_dipole, c.validity_threshold,
                 _status(val.bound_dipole < c.validity_threshold)])
    rows.append(["validity_quadrupole", math.nan, val.bound_quadrupole,
                 c.validity_threshold, _status(val.bound_quadrupole < c.validity_threshold)])
    lines += [f"validity.{ln}" for ln in val.lines()]


# ---------------------------------------------------------------------------
# plot-ready series

def _write_spectrum(path, setup, meta):
    beta = setup.beta_nominal
    scale = 1.0 / beta if math.isfinite(beta) else 1.0
    omega = np.linspace(-8.0, 8.0, SPECTRUM_POINTS) * scale
    w = setup.w_in
    method = "closed" if w.spectrum is not None else "damped"
    val = kernel_fourier(w, omega, method=method)
    rows = [(o, v.real, v.imag) for o, v in zip(omega, np.atleast_1d(val))]
    write_table(path, ["omega", "re_w_tilde", "im_w_tilde"], rows,
                meta=dict(meta, kind="spectrum", method=method))


def _write_kernel(path, setup, meta):
    beta = setup.beta_nominal
    span = 2.0 * beta if math.isfinite(beta) else 10.0
    tau = np.linspace(-span, span, KERNEL_POINTS)
    tau = tau[tau != 0]
    # the kernel is shown on the shifted line Im = -eps to stay off light-cone poles
    eps = 0.05 * (beta if math.isfinite(beta) else 1.0)
    w = setup.w_in.eval(tau, eps)
    rows = [(t, v.real, v.imag, eps) for t, v in zip(tau, w)]
    write_table(path, ["dtau", "re_w", "im_w", "eps"], rows,
                meta=dict(meta, kind="kernel", label=setup.w_in.label))


# ---------------------------------------------------------------------------
# run

def _file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_scenario(cfg, out=None, workers=1, stream=None):
    """Run every stage of a validated scenario and write the result files.

    Returns the exit status. Tables are written in a fixed order with fixed
    formatting so repeated runs are byte-identical; only manifest.json carries
    a timestamp.
    """
    stream = stream or sys.stdout
    out_dir = Path(out or cfg.output.directory)
    meta = {"scenario": cfg.name, "units": cfg.units, "config_sha256": config_hash(cfg)}

    try:
        jobs = _run_jobs(cfg, workers)
        setup = build_setup(cfg)
        residual_rows = []
        validity_lines = []
        _kms_checks(cfg, setup, residual_rows)
        _mu_check(cfg, residual_rows)
        _validity_check(cfg, residual_rows, validity_lines)
    except (PreconditionError, OutOfDomainError, AssumptionError,
            UnsupportedKernelError) as exc:
        print(f"validation error: {_failure_text(exc)}", file=stream)
        return EXIT_VALIDATION
    except KmsProbeError as exc:
        print(f"numerical failure: {_failure_text(exc)}", file=stream)
        return EXIT_NUMERICAL

    for job in jobs:
        if "route_diff" in job:
            tol = cfg.checks.route_tolerance
            residual_rows.append(["route_equivalence", job["omega"], job["route_diff"], tol,
                                  _status(job["route_diff"] < tol)])

    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    files["responses.tsv"] = out_dir / "responses.tsv"
    write_table(files["responses.tsv"], RESPONSE_COLUMNS,
                [row for job in jobs for row in job["responses"]], meta=meta)
    files["edr_sweep.tsv"] = out_dir / "edr_sweep.tsv"
    write_table(files["edr_sweep.tsv"], SWEEP_COLUMNS,
                [row for job in jobs for row in job["sweep"]], meta=meta)
    files["residuals.tsv"] = out_dir / "residuals.tsv"
    write_table(files["residuals.tsv"], RESIDUAL_COLUMNS, residual_rows, meta=meta)
    files["spectrum.tsv"] = out_dir / "spectrum.tsv"
    _write_spectrum(files["spectrum.tsv"], setup, meta)
    files["kernel.tsv"] = out_dir / "kernel.tsv"
    _write_kernel(files["kernel.tsv"], setup, meta)

    numerical = any(j["verdict"] == "numerical-failure" for j in jobs) or any(
        row[-1] != "ok" for j in jobs for row in j["responses"])
    sweep_ok = all(j["verdict"] == cfg.sweep.expect for j in jobs)
    checks_ok = all(row[-1] != "fail" for row in residual_rows)

    lines = [f"scenario: {cfg.name}", f"config_sha256: {meta['config_sha256']}",
             f"units: {cfg.units}",
             f"kernel: {cfg.kernel.name} operator={cfg.kernel.operator} "
             f"coupling={cfg.kernel.coupling} profile={cfg.smearing.profile}"]
    if cfg.kernel.name == "vacuum_accelerated":
        a_nat = natural_acceleration(cfg)
        lines.append(f"unruh_temperature_natural: {unruh_temperature(a_nat):.12g}")
        if cfg.units == "SI":
            lines.append(f"unruh_temperature_K: {unruh_temperature(cfg.kernel.a, 'SI'):.12g}")
    for j in jobs:
        tag = f"omega={j['omega']:.12g}"
        if j["verdict"] == "numerical-failure":
            lines.append(f"{tag} sweep: numerical-failure ({j['error']})")
            continue
        lines.append(f"{tag} beta_hat: {j['beta_hat']:.12g}")
        lines.append(f"{tag} beta_nominal: {j['beta_nominal']:.12g}")
        lines.append(f"{tag} rel_error: {j['rel_error']:.6g}")
        lines.append(f"{tag} sweep_verdict: {j['verdict']} (expected {cfg.sweep.expect})")
    for row in residual_rows:
        om = "" if math.isnan(row[1]) else f" omega={row[1]:.12g}"
        lines.append(f"check {row[0]}{om}: {row[2]:.6g} tol {row[3]:.3g} -> {row[4]}")
    lines += validity_lines
    if numerical:
        status, code = "NUMERICAL-FAILURE", EXIT_NUMERICAL
    elif not (sweep_ok and checks_ok):
        status, code = "FAIL", EXIT_VERDICT
    else:
        status, code = "PASS", EXIT_OK
    lines.append(f"overall: {status}")
    files["verdict.txt"] = out_dir / "verdict.txt"
    files["verdict.txt"].write_text("\n".join(lines) + "\n")

    manifest = {
        "scenario": cfg.name,
        "config_sha256": meta["config_sha256"],
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "exit_code": code,
        "files": {name: _file_hash(p) for name, p in sorted(files.items())},
        "config": serialize_config(cfg),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print("\n".join(lines), file=stream)
    return code


# ---------------------------------------------------------------------------
# plotdata

PLOT_KINDS = ("spectrum", "sweep", "kernel")


def emit_plotdata(results_dir, kind, out=None):
    """Write a two- or three-column series from a results directory; returns the path."""
    results_dir = Path(results_dir)
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {PLOT_KINDS}")
    out = Path(out) if out else results_dir / f"plot_{kind}.tsv"
    if kind == "sweep":
        meta, cols, rows = read_table(results_dir / "edr_sweep.tsv")
        ix = {c: i for i, c in enumerate(cols)}
        series = []
        for r in rows:
            bh, bn = float(r[ix["beta_hat"]]), float(r[ix["beta_nominal"]])
            series.append((float(r[ix["T"]]), bh, abs(bh - bn), float(r[ix["omega"]])))
        series.sort(key=lambda s: (s[3], s[0]))
        write_table(out, ["T", "beta_hat", "abs_beta_hat_minus_beta_nominal"],
                    [s[:3] for s in series],
                    meta={"kind": "sweep", "units": meta.get("units", "natural"),
                          "x": "interaction time T", "y": "beta_hat",
                          "y2": "|beta_hat - beta_nominal|",
                          "omegas": " ".join(f"{s[3]:.12g}" for s in series)})
    elif kind == "spectrum":
        meta, cols, rows = read_table(results_dir / "spectrum.tsv")
        write_table(out, ["omega", "re_w_tilde", "im_w_tilde"],
                    [[float(x) for x in r] for r in rows],
                    meta={"kind": "spectrum", "units": meta.get("units", "natural"),
                          "x": "frequency omega", "y": "Re w~(omega)", "y2": "Im w~(omega)"})
    else:
        meta, cols, rows = read_table(results_dir / "kernel.tsv")
        write_table(out, ["dtau", "re_w", "im_w"], [[float(x) for x in r[:3]] for r in rows],
                    meta={"kind": "kernel", "units": meta.get("units", "natural"),
                          "x": "proper-time difference", "y": "Re w", "y2": "Im w",
                          "eps": rows[0][3] if rows else "0"})
    return out


# ---------------------------------------------------------------------------
# entry point

def _resolve(path):
    p = Path(path)
    if not p.exists():
        named = bundled_scenarios()
        if path in named:
            return named[path]
    return p


class _Parser(argparse.ArgumentParser):
    """Usage errors count as validation failures (exit 1), not numerical ones."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _parser():
    ap = _Parser(prog="kmsprobe", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    run = sub.add_parser("run", help="run a scenario file (or a bundled scenario name)")
    run.add_argument("scenario")
    run.add_argument("--out", help="output directory (overrides output.directory)")
    run.add_argument("--workers", type=int, default=1, help="worker processes over gaps")
    run.add_argument("--tolerance-overrides", default="",
                     help="comma list of key=value for sweep.tolerance, kms, route, "
                          "mu_spread, validity")
    chk = sub.add_parser("check", help="validate a scenario without running it")
    chk.add_argument("scenario")
    chk.add_argument("--tolerance-overrides", default="")
    sub.add_parser("list-kernels", help="list catalog kernels, couplings and scenarios")
    pd = sub.add_parser("plotdata", help="extract plot-ready series from a results dir")
    pd.add_argument("results_dir")
    pd.add_argument("--kind", required=True, choices=PLOT_KINDS)
    pd.add_argument("--out")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.verb == "list-kernels":
        for title, table in (("kernels", CATALOG), ("couplings", COUPLINGS),
                             ("operators", OPERATORS)):
            print(f"{title}:")
            for k, v in table.items():
                print(f"  {k:<20} {v}")
        print("bundled scenarios:")
        for name in bundled_scenarios():
            print(f"  {name}")
        return EXIT_OK
    if args.verb == "plotdata":
        try:
            print(emit_plotdata(args.results_dir, args.kind, args.out))
        except FileNotFoundError as exc:
            print(f"missing results: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        return EXIT_OK
    try:
        cfg = load_config(_resolve(args.scenario))
        cfg = apply_tolerance_overrides(cfg, args.tolerance_overrides)
    except ConfigError as exc:
        for path, msg in exc.problems:
            print(f"validation error: {path}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.verb == "check":
        print(f"ok {cfg.name} {config_hash(cfg)}")
        return EXIT_OK
    if args.workers < 1:
        print("validation error: --workers: must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    return run_scenario(cfg, out=args.out, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
