"""Command-line experiment runner.

    wavemoments <subcommand> [--config FILE] [--out DIR] [--seed N]
                             [--threads N] [--tolerance-profile fast|strict]

Every run writes its artifacts plus ``manifest.json`` (config echo, version,
seed, wall time, check results, sha256 of each artifact) into the output
directory.  Artifacts depend only on the configuration and the seed; timings
live in the manifest alone.

Exit status: 0 success, 1 failed validation or numerical failure, 2 usage or
configuration error.  Each flag can also be set through an environment
variable WAVEMOMENTS_<FLAG> (e.g. WAVEMOMENTS_SEED); flags win over the
environment.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, jsonable_config, load_config
from .core import (IsotropicSpectrum, PhysicalParams, capillary_system, geometric_grid,
                   power_law_system, zf_spectrum)
from .integrate import IntegratorControls, StiffnessError
from .kinetic import FrozenRates, SelfConsistentRates, consistency_check, evolve_ke
from .moments import (DeviationTrajectory, evolve_deviations, evolve_hierarchy,
                      init_hierarchy, log_gaussian_bump, transport_wave_diagnostic)
from .rates import (TOLERANCE_PROFILES, QuadratureError, dimensionless_rate_constant,
                    kz_constant, mc_rate_oracle, rate_components, rate_field)
from .resonance import angular_weight, mc_angular_oracle
from . import validation

ENV_PREFIX = "WAVEMOMENTS_"
SUBCOMMANDS = ("rates", "ke", "moments", "capillary-fluctuations", "transport-wave",
               "constants", "validate", "oracle")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _json_default(obj):
    """numpy scalars and arrays in manifests."""
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


class Run:
    """Collects artifacts for one invocation and writes the manifest."""

    def __init__(self, out: Path, subcommand: str, cfg: dict, args):
        self.out = out
        self.subcommand = subcommand
        self.cfg = cfg
        self.args = args
        self.artifacts: list = []
        self.checks: list = []
        self.timings: dict = {}
        self.errors: list = []
        self.info: dict = {}
        self.t0 = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str):
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
        self.artifacts.append(name)

    def adopt(self, names):
        self.artifacts.extend(names)

    def finish(self, status: int) -> int:
        files = []
        for name in sorted(set(self.artifacts)):
            data = (self.out / name).read_bytes()
            files.append({"file": name, "sha256": hashlib.sha256(data).hexdigest(),
                          "bytes": len(data)})
        manifest = {
            "tool": "wavemoments",
            "version": __version__,
            "subcommand": self.subcommand,
            "seed": self.args.seed,
            "threads": self.args.threads,
            "tolerance_profile": self.args.tolerance_profile,
            "config": jsonable_config(self.cfg),
            "wall_time_s": round(time.perf_counter() - self.t0, 3),
            "timings_s": self.timings,
            "checks": self.checks,
            "info": self.info,
            "errors": self.errors,
            "exit_status": status,
            "artifacts": files,
        }
        (self.out / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
        return status


def build_system(cfg):
    s = cfg["system"]
    if s["kind"] == "capillary":
        return capillary_system(s["sigma"], s["rho"])
    return power_law_system(s["alpha"], s["coefficient"], s["vertex"], s["epsilon"])


def build_params(cfg) -> PhysicalParams:
    return PhysicalParams(cfg["system"]["sigma"], cfg["system"]["rho"],
                          cfg["spectrum"]["flux"], cfg["spectrum"]["kz_constant"])


def build_grid(cfg):
    g = cfg["grid"]
    return geometric_grid(g["k_min"], g["k_max"], g["nodes"])


def build_spectrum(cfg) -> IsotropicSpectrum:
    sp = cfg["spectrum"]
    if sp["kind"] == "file":
        if not sp["file"]:
            raise ConfigError("[spectrum] kind = file needs 'file'")
        if not Path(sp["file"]).is_file():
            raise ConfigError(f"spectrum file not found: {sp['file']}")
        return IsotropicSpectrum.from_csv(sp["file"], sp["extrapolation"])
    grid = build_grid(cfg)
    if sp["kind"] == "zf":
        return zf_spectrum(build_params(cfg), grid)
    if sp["kind"] == "powerlaw":
        vals = sp["amplitude"] * grid ** (-sp["exponent"])
    else:
        vals = sp["amplitude"] * np.exp(-grid / sp["scale"])
    return IsotropicSpectrum(grid, vals, sp["extrapolation"])


def build_settings(cfg, profile: str):
    base = TOLERANCE_PROFILES[profile]
    over = {k: v for k, v in cfg["quadrature"].items() if v is not None}
    return replace(base, **over)


def build_controls(cfg) -> IntegratorControls:
    i = cfg["integrator"]
    return IntegratorControls(rtol=i["rtol"], checkpoints=i["checkpoints"])


def _plot_script(csv_name: str, x: str, y: str, group: str, title: str, logy=False) -> str:
    return f'''"""Plot {title} from {csv_name} (generated; needs matplotlib)."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

series = defaultdict(lambda: ([], []))
with open("{csv_name}", newline="") as fh:
    for row in csv.DictReader(fh):
        xs, ys = series[row["{group}"]]
        xs.append(float(row["{x}"]))
        ys.append(float(row["{y}"]))
for label, (xs, ys) in sorted(series.items(), key=lambda kv: float(kv[0])):
    plt.plot(xs, ys, label="{group}=" + label)
plt.xlabel("{x}")
plt.ylabel("{y}")
{"plt.yscale('log')" if logy else ""}
plt.title("{title}")
plt.legend(fontsize="small")
plt.savefig("{csv_name.rsplit('.', 1)[0]}.png", dpi=150)
'''


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_rates(run: Run, settings):
    system = build_system(run.cfg)
    spec = build_spectrum(run.cfg)
    field = rate_field(system, spec, spec.grid, settings, run.args.threads)
    run.write("rates.csv", field.to_csv())
    report = consistency_check(field, spec, system, settings, run.args.threads)
    run.write("consistency.csv", _csv_text(
        ["k", "residual", "bound"], zip(spec.grid, report.residual, report.bound)))
    run.info["consistency_ok"] = report.ok
    run.info["warnings"] = list(field.warnings)
    return 0


def _rates_provider(cfg, system, spec, settings, threads):
    mode = cfg["scenario"]["rates"]
    if mode == "self-consistent":
        return SelfConsistentRates(system, spec.grid, settings, threads)
    field = rate_field(system, spec, spec.grid, settings, threads)
    if mode == "frozen":
        return FrozenRates.from_field(field)
    return FrozenRates.stationary(field.gamma, spec.values)


def cmd_ke(run: Run, settings):
    system = build_system(run.cfg)
    spec = build_spectrum(run.cfg)
    rates = _rates_provider(run.cfg, system, spec, settings, run.args.threads)
    traj = evolve_ke(system, spec, run.cfg["integrator"]["t_end"], build_controls(run.cfg), rates)
    run.adopt(f"ke/{name}" for name in traj.write(run.out / "ke"))
    run.info["energy_drift"] = traj.energy_drift
    return 0


def cmd_moments(run: Run, settings):
    sc = run.cfg["scenario"]
    system = build_system(run.cfg)
    spec = build_spectrum(run.cfg)
    rates = _rates_provider(run.cfg, system, spec, settings, run.args.threads)
    h0 = init_hierarchy(spec, sc["P"], sc["initial"], sc["f_table"] or None)
    sol = evolve_hierarchy(rates, h0, run.cfg["integrator"]["t_end"], build_controls(run.cfg))
    for i, h in enumerate(sol.trajectory):
        run.write(f"moments/hierarchy_{i:04d}.csv", h.to_csv())
    for i, d in enumerate(sol.deviations):
        run.write(f"moments/deviations_{i:04d}.csv", d.to_csv())
    run.write("moments/solution.json",
              json.dumps(sol.manifest(), indent=2, sort_keys=True, default=_json_default) + "\n")
    return 0


def cmd_capillary_fluctuations(run: Run, settings):
    cfg = run.cfg
    params = build_params(cfg)
    source = cfg["scenario"]["gamma_source"]
    const = None
    if source == "computed":
        const = dimensionless_rate_constant(capillary_system(params.sigma, params.rho), settings=settings).value
    g = cfg["grid"]
    grid, times, xi2, theory, n = validation.fluctuation_experiment(
        params, g["nodes"], (g["k_min"], g["k_max"]), source, const,
        checkpoints=max(cfg["integrator"]["checkpoints"], 101))
    rows = []
    for ti, t in enumerate(times):
        for i, k in enumerate(grid):
            rel = xi2[ti, i] / theory[ti, i] - 1.0 if theory[ti, i] > 0 else 0.0
            rows.append((float(k), float(t), float(xi2[ti, i]), float(theory[ti, i]), float(rel),
                         float(xi2[ti, i] / n[i] ** 2)))
    run.write("xi2_surface.csv", _csv_text(["k", "t", "xi2", "xi2_closed_form", "rel_err", "xi2_over_n2"], rows))
    ts = validation.saturation_times(grid, times, xi2, n)
    run.write("saturation.csv", _csv_text(["k", "t_saturation"], zip(grid, ts)))
    slope = float(np.polyfit(np.log(grid), np.log(ts), 1)[0])
    worst = float(max(abs(r[4]) for r in rows))
    run.info.update(saturation_slope=slope, max_rel_err=worst, gamma_source=source)
    run.write("plot_xi2.py", _plot_script("xi2_surface.csv", "t", "xi2_over_n2", "k",
                                          "fluctuation growth xi^2/n^2"))
    return 0 if worst < 1e-6 else 1


def cmd_transport_wave(run: Run, settings):
    sc = run.cfg["scenario"]
    F0 = log_gaussian_bump(sc["transport_P"], sc["transport_p0"], sc["transport_width"])
    thetas = np.linspace(0.0, sc["theta_end"], 21)
    _, vals = evolve_deviations(F0, sc["theta_end"], IntegratorControls(rtol=run.cfg["integrator"]["rtol"]),
                                checkpoint_times=thetas)
    rep = transport_wave_diagnostic(DeviationTrajectory(thetas, vals))
    run.write("transport.csv", _csv_text(
        ["theta", "peak_p", "peak_ln_p", "width_ln_p", "amplitude"],
        zip(thetas, rep.position_p, rep.position_x, rep.width_x, rep.amplitude)))
    p = np.arange(2, sc["transport_P"] + 1)
    stride = max(1, thetas.size // 5)
    rows = [(float(thetas[i]), int(pp), float(vals[i, j]))
            for i in range(0, thetas.size, stride) for j, pp in enumerate(p)]
    run.write("deviation_snapshots.csv", _csv_text(["theta", "p", "F"], rows))
    run.write("plot_transport.py", _plot_script("deviation_snapshots.csv", "p", "F", "theta",
                                                "deviation wave in p"))
    run.info.update(speed=rep.speed, width_variation=rep.width_variation,
                    amplitude_loss_per_theta=rep.amplitude_decay_per_unit_theta,
                    truncated=rep.truncated)
    return 1 if rep.truncated else 0


def cmd_constants(run: Run, settings):
    t0 = time.perf_counter()
    system = capillary_system()
    I = dimensionless_rate_constant(system, settings=settings)
    C = kz_constant(system, settings)
    run.timings["constants"] = round(time.perf_counter() - t0, 3)
    verdict = validation.normalization_verdict(seed=run.args.seed, rate_constant=I.value)
    ref_c = validation.REFERENCE_KZ_CONSTANT
    data = {
        "rate_constant_I": I.value,
        "rate_constant_rel_error": I.rel_error,
        "reference_I": validation.REFERENCE_RATE_CONSTANT,
        "factor_reference_over_computed": verdict.factor_to_reference,
        "prefactor_computed_I_times_C_ref_over_16pi": I.value * ref_c / (16 * math.pi),
        "prefactor_reference_I_times_C_ref_over_16pi":
            validation.REFERENCE_RATE_CONSTANT * ref_c / (16 * math.pi),
        "reference_prefactor": validation.REFERENCE_PREFACTOR,
        "kz_constant_implied_by_vertex": C,
        "reference_kz_constant": ref_c,
        "mc_eta_ratio": verdict.eta_ratio, "mc_eta_z": verdict.eta_z,
        "mc_gamma_ratio": verdict.gamma_ratio, "mc_gamma_z": verdict.gamma_z,
        "mc_measure_confirmed": verdict.measure_confirmed,
        "verdict": verdict.text(),
    }
    run.write("constants.json", json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
    run.info["verdict"] = verdict.text()
    print(f"I = {I.value:.6f} +- {I.value * I.rel_error:.1e}   "
          f"(reference 4.30, factor {verdict.factor_to_reference:.4f})")
    print(f"I*C/(16 pi) = {data['prefactor_computed_I_times_C_ref_over_16pi']:.4f} with C = {ref_c}; "
          f"4.30*C/(16 pi) = {data['prefactor_reference_I_times_C_ref_over_16pi']:.4f}")
    print(f"KZ constant implied by the vertex: {C:.4f}")
    print(verdict.text())
    return 0 if abs(verdict.factor_to_reference - 1) <= 0.05 else 1


def cmd_validate(run: Run, settings):
    results = validation.run_all(seed=run.args.seed, settings=settings, threads=run.args.threads)
    rows = []
    for r in results:
        print(r.line())
        d = r.as_dict()
        run.timings[f"check_{r.number:02d}"] = d.pop("seconds")
        d["measured"] = {k: v for k, v in d["measured"].items() if not k.endswith("runtime_s")}
        run.timings.update({f"check_{r.number:02d}_{k}": v for k, v in r.measured.items()
                            if k.endswith("runtime_s")})
        run.checks.append({"number": r.number, "name": r.name, "passed": r.passed,
                           "measured": d["measured"]})
        rows.append(d)
    run.write("validation.json", json.dumps(rows, indent=2, sort_keys=True, default=_json_default) + "\n")
    failed = [r.number for r in results if not r.passed]
    run.info["failed"] = failed
    return 1 if failed else 0


def cmd_oracle(run: Run, settings):
    sc = run.cfg["scenario"]
    seed = run.args.seed
    rows = []
    for i, (k, k1, k2) in enumerate(validation.random_triads(sc["oracle_triads"], seed)):
        o = mc_angular_oracle(k, k1, k2, samples=10**6, seed=seed + i)
        exact = angular_weight(k, k1, k2)
        rows.append((k, k1, k2, exact, o.estimate, o.stderr, (o.estimate - exact) / o.stderr))
    run.write("angular_oracle.csv", _csv_text(["k", "k1", "k2", "analytic", "mc", "stderr", "z"], rows))
    system = build_system(run.cfg)
    spec = build_spectrum(run.cfg)
    rows = []
    for k in sc["oracle_k"]:
        rc = rate_components(system, spec, k, settings)
        mc = mc_rate_oracle(system, spec, k, samples=sc["oracle_samples"], seed=seed)
        rows.append((k, rc.eta, mc.eta, mc.eta_stderr, (mc.eta - rc.eta) / mc.eta_stderr,
                     rc.gamma, mc.gamma, mc.gamma_stderr, (mc.gamma - rc.gamma) / mc.gamma_stderr))
    run.write("rate_oracle.csv", _csv_text(
        ["k", "eta_quad", "eta_mc", "eta_stderr", "eta_z",
         "gamma_quad", "gamma_mc", "gamma_stderr", "gamma_z"], rows))
    zmax = max(max(abs(r[4]), abs(r[8])) for r in rows)
    run.info["rate_oracle_max_abs_z"] = zmax
    return 0 if zmax < 4 else 1


COMMANDS = {
    "rates": cmd_rates,
    "ke": cmd_ke,
    "moments": cmd_moments,
    "capillary-fluctuations": cmd_capillary_fluctuations,
    "transport-wave": cmd_transport_wave,
    "constants": cmd_constants,
    "validate": cmd_validate,
    "oracle": cmd_oracle,
}

# subcommands whose default configuration is not the capillary/ZF one
DEFAULT_OVERRIDES = {
    "oracle": {"system": {"kind": "powerlaw", "alpha": 2.0},
               "spectrum": {"kind": "exponential", "extrapolation": "zero"},
               "grid": {"k_min": 1e-4, "k_max": 10.0, "nodes": 200}},
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavemoments",
                                 description="Moment hierarchy of three-wave turbulence: "
                                             "rates, kinetic equation, fluctuation dynamics.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=_env("CONFIG"), help="INI configuration file")
    common.add_argument("--out", default=_env("OUT"), help="output directory (default out/<subcommand>)")
    common.add_argument("--seed", type=int, default=int(_env("SEED", "0")), help="seed for Monte-Carlo oracles")
    common.add_argument("--threads", type=int, default=int(_env("THREADS", "1")),
                        help="worker processes for per-node rate maps")
    common.add_argument("--tolerance-profile", choices=sorted(TOLERANCE_PROFILES),
                        default=_env("TOLERANCE_PROFILE", "strict"))
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=COMMANDS[name].__name__.replace("cmd_", ""))
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.seed < 0 or args.threads < 1:
        print("error: seed must be >= 0 and threads >= 1", file=sys.stderr)
        return 2
    if args.tolerance_profile not in TOLERANCE_PROFILES:
        print(f"error: unknown tolerance profile {args.tolerance_profile!r}", file=sys.stderr)
        return 2
    try:
        base = load_config(None)
        for sec, vals in DEFAULT_OVERRIDES.get(args.command, {}).items():
            base[sec].update(vals)
        cfg = load_config(args.config, base)
        settings = build_settings(cfg, args.tolerance_profile)
        if args.command in ("rates", "ke", "moments", "oracle"):
            build_spectrum(cfg)       # surface config errors before creating artifacts
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else Path("out") / args.command
    run = Run(out, args.command, cfg, args)
    try:
        status = COMMANDS[args.command](run, settings)
    except (StiffnessError, QuadratureError, ArithmeticError, ValueError) as exc:
        run.errors.append({"type": type(exc).__name__, "message": str(exc),
                           "traceback": traceback.format_exc().splitlines()[-3:]})
        print(f"error: {exc}", file=sys.stderr)
        status = 1
    return run.finish(status)


if __name__ == "__main__":
    sys.exit(main())
