"""Command-line front end: ``gen``, ``run``, ``compare`` and ``tensor-dump``.

Configuration is a flat ``key = value`` text file plus ``--set key=value``
overrides.  Relative output directories are placed under
``$SGEIG_OUTPUT_ROOT`` when that variable is set.
"""

import argparse
import csv
import dataclasses
import json
import os
import sys
import time

import numpy as np

from .errors import ConfigurationError, InputError, SgeigError
from .gpc import GpcBasis, smolyak_grid, triple_product_tensor
from .operators import load_bundle, save_bundle
from .precond import PrecondConfig
from .problems import DEFAULT_CORR, synthetic_problem
from .sampling import (GpcCoefficients, draw_points, kde, moments, new_seed, project_coefficients,
                       read_coefficients_csv, run_mc, run_sc, sample_gpc)
from .sgcore import SGProblem, sample_residuals, save_state
from .solver import NewtonOptions, newton_solve

ENV_OUTPUT_ROOT = "SGEIG_OUTPUT_ROOT"
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
FAMILY_OF = {"lognormal": "hermite", "affine": "legendre"}


@dataclasses.dataclass
class RunConfig:
    """Every setting of a ``gen`` or ``run`` invocation (see README for the key list)."""

    bundle: str = ""
    field: str = "affine"
    family: str = ""
    m_xi: int = 2
    p: int = 3
    cov: float = 0.01
    nu1: float = 0.1
    wind_x: float = 1.0
    wind_y: float = 0.5
    n: int = 11
    dim: int = 2
    corr_x: float = -1.0
    corr_y: float = -1.0
    convention: str = "projection"
    method: str = "sg"
    n_samples: int = 1000
    seed: str = ""
    level: int = 4
    mc_project: bool = False
    precond: str = "cMB"
    eps_re: str = ""
    eps_im: str = ""
    p_t: str = ""
    update: str = ""
    mode: str = "auto"
    rho: float = 0.9
    c: float = 0.25
    tau: float = 0.1
    tol: float = 1e-10
    max_newton: int = 30
    max_gmres: int = 200
    output: str = ""

    @classmethod
    def from_pairs(cls, pairs, base=None):
        cfg = dataclasses.replace(base) if base is not None else cls()
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for key, val in pairs:
            key = key.strip()
            val = val.strip()
            if key not in types:
                raise ConfigurationError(f"unknown configuration key {key!r}")
            setattr(cfg, key, _convert(key, val, types[key]))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path=None, overrides=()):
        pairs = read_config_file(path) if path else []
        pairs += [_split_pair(s, "--set") for s in overrides]
        return cls.from_pairs(pairs)

    def validate(self):
        if self.field not in FAMILY_OF:
            raise ConfigurationError(f"field must be one of {sorted(FAMILY_OF)}")
        if self.family and not self.bundle and self.family != FAMILY_OF[self.field]:
            raise ConfigurationError(f"family {self.family!r} is inconsistent with the {self.field} field "
                                     f"(expected {FAMILY_OF[self.field]!r})")
        if self.method not in ("sg", "sc", "mc"):
            raise ConfigurationError("method must be sg, sc or mc")
        if self.mode not in ("auto", "complex", "real"):
            raise ConfigurationError("mode must be auto, complex or real")
        if self.m_xi < 1 or self.p < 0 or self.n < 2 or self.level < 1 or self.n_samples < 1:
            raise ConfigurationError("need m_xi >= 1, p >= 0, n >= 2, level >= 1, n_samples >= 1")
        if self.cov < 0 or self.nu1 <= 0:
            raise ConfigurationError("need cov >= 0 and nu1 > 0")
        if self.seed:
            try:
                int(self.seed)
            except ValueError:
                raise ConfigurationError("seed must be an integer") from None
        self.precond_config().resolved(self.p)
        self.newton_options()

    def precond_config(self):
        def opt(s, conv):
            return conv(s) if s != "" else None
        return PrecondConfig(self.precond, opt(self.eps_re, float), opt(self.eps_im, float),
                             opt(self.p_t, int), opt(self.update, _parse_bool))

    def newton_options(self):
        try:
            return NewtonOptions(self.rho, self.c, self.tau, self.tol, self.max_newton, self.max_gmres)
        except InputError as exc:
            raise ConfigurationError(str(exc)) from None

    def to_text(self):
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"


def _parse_bool(s):
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {s!r}")


def _convert(key, val, typ):
    try:
        if typ in (int, "int"):
            return int(val)
        if typ in (float, "float"):
            return float(val)
        if typ in (bool, "bool"):
            return _parse_bool(val)
        return val
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {val!r}") from None


def _split_pair(text, where):
    if "=" not in text:
        raise ConfigurationError(f"{where}: expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def read_config_file(path):
    """``key = value`` lines; blank lines and ``#`` comments ignored."""
    if not os.path.isfile(path):
        raise ConfigurationError(f"configuration file {path} not found")
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                pairs.append(_split_pair(line, f"{path}:{lineno}"))
    return pairs


def output_dir(path, default):
    path = path or default
    root = os.environ.get(ENV_OUTPUT_ROOT)
    if root and not os.path.isabs(path):
        path = os.path.join(root, path)
    os.makedirs(path, exist_ok=True)
    return path


def build_operator(cfg):
    """Synthetic operator from the configuration, or the configured bundle."""
    if cfg.bundle:
        A = load_bundle(cfg.bundle)
        if cfg.family and cfg.family != A.family:
            raise ConfigurationError(f"bundle family {A.family!r} differs from configured {cfg.family!r}")
        if cfg.m_xi != A.m_xi:
            raise ConfigurationError(f"bundle has m_xi={A.m_xi}, configuration says {cfg.m_xi}")
        return A, None
    corr = DEFAULT_CORR[cfg.field]
    corr = (cfg.corr_x if cfg.corr_x > 0 else corr[0], cfg.corr_y if cfg.corr_y > 0 else corr[1])
    return synthetic_problem(cfg.field, cfg.n, cfg.m_xi, cfg.p, cfg.cov, cfg.nu1,
                             (cfg.wind_x, cfg.wind_y), corr, cfg.dim, cfg.convention)


def _write_config(cfg, directory):
    with open(os.path.join(directory, "config.txt"), "w") as fh:
        fh.write(cfg.to_text())


def _complex_json(z):
    return [float(np.real(z)), float(np.imag(z))]


def cmd_gen(cfg, out=None):
    """Write the configured operator as a Matrix Market bundle; returns the directory."""
    directory = output_dir(out or cfg.output, "bundle")
    A, visc = build_operator(cfg)
    save_bundle(A, directory)
    if visc is not None:
        visc.to_csv(os.path.join(directory, "field.csv"))
        for w in visc.warnings:
            print(f"warning: {w}", file=sys.stderr)
    _write_config(cfg, directory)
    print(f"wrote bundle with n_x={A.n_x}, n_nu={A.n_nu} to {directory}")
    return directory


def cmd_run(cfg, out=None, threads=1):
    """Run the configured method; writes result files and returns ``(exit_code, summary)``."""
    t0 = time.perf_counter()
    if cfg.method == "mc" and not cfg.seed:
        cfg = dataclasses.replace(cfg, seed=str(new_seed()))
    directory = output_dir(out or cfg.output, f"run-{cfg.method}")
    _write_config(cfg, directory)
    A, _ = build_operator(cfg)
    basis = GpcBasis(A.family, A.m_xi, cfg.p)
    summary = {"method": cfg.method, "family": A.family, "m_xi": A.m_xi, "p": cfg.p, "n_x": A.n_x,
               "n_nu": A.n_nu, "n_xi": basis.n_xi, "seed": int(cfg.seed) if cfg.seed else None}
    t_setup = time.perf_counter() - t0
    code = EXIT_OK
    if cfg.method == "sg":
        prob = SGProblem(A, basis)
        mode = None if cfg.mode == "auto" else cfg.mode
        state, log = newton_solve(prob, cfg.precond_config(), cfg.newton_options(), mode=mode)
        log.to_csv(os.path.join(directory, "iterations.csv"))
        GpcCoefficients.from_state(state, basis).to_csv(os.path.join(directory, "coefficients.csv"))
        save_state(state, os.path.join(directory, "state.txt"))
        summary.update({"converged": log.converged, "mode": state.mode,
                        "initial_residual": log.initial_residual, "final_residual": log.residuals[-1],
                        "newton_steps": log.n_steps, "gmres_iterations": log.gmres_counts,
                        "total_gmres": log.total_gmres, "k_mults": int(log.k_mults),
                        "lambda_1": _complex_json(state.lam[0])})
        sampled = sample_residuals(state, prob, draw_points(A.family, A.m_xi, 100, 0))
        summary["sampled_residual"] = {"mean": float(sampled.mean()), "max": float(sampled.max())}
        print(log.table())
        code = EXIT_OK if log.converged else EXIT_NOT_CONVERGED
    else:
        if cfg.method == "sc":
            sset = run_sc(A, smolyak_grid(A.family, A.m_xi, cfg.level), threads)
        else:
            sset = run_mc(A, cfg.n_samples, int(cfg.seed), threads)
        sset.to_csv(os.path.join(directory, "samples.csv"))
        mom = moments(sset)
        summary.update({"n_solves": sset.size, "n_failed": sset.n_failed, "level": cfg.level,
                        "mean": _complex_json(mom["mean"]), "std": _complex_json(mom["std"]),
                        "stderr": _complex_json(mom["stderr"]), "converged": sset.n_failed == 0})
        if cfg.method == "sc" or cfg.mc_project:
            coeffs = project_coefficients(sset, basis)
            coeffs.to_csv(os.path.join(directory, "coefficients.csv"))
            summary["lambda_1"] = _complex_json(coeffs.lam[0])
        code = EXIT_OK if sset.n_failed == 0 else EXIT_NOT_CONVERGED
    summary["timings"] = {"setup": t_setup, "total": time.perf_counter() - t0}
    summary["exit_code"] = code
    with open(os.path.join(directory, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"{cfg.method}: exit {code}; results in {directory}")
    return code, summary


def _load_run(directory):
    path = os.path.join(directory, "summary.json")
    if not os.path.isfile(path):
        raise InputError(f"{directory} is not a run directory (no summary.json)")
    with open(path) as fh:
        summary = json.load(fh)
    run = {"dir": directory, "name": os.path.basename(os.path.normpath(directory)), "summary": summary}
    cpath = os.path.join(directory, "coefficients.csv")
    if os.path.isfile(cpath):
        run["lam"], run["degree"] = read_coefficients_csv(cpath)
    spath = os.path.join(directory, "samples.csv")
    if os.path.isfile(spath):
        data = np.loadtxt(spath, delimiter=",", skiprows=1, ndmin=2)
        run["samples"] = data[:, -2] + 1j * data[:, -1]
    return run


def _distribution(run, points):
    """Eigenvalue samples: raw MC samples or the expansion evaluated at common points."""
    if run["summary"]["method"] == "mc":
        s = run["samples"]
        return s[np.isfinite(s)]
    s = run["summary"]
    basis = GpcBasis(s["family"], s["m_xi"], s["p"])
    return sample_gpc(GpcCoefficients(run["lam"], basis, s["method"]), points)


def _kde_table(dists, part, n_grid=201):
    vals = {k: getattr(v, part) for k, v in dists.items()}
    allv = np.concatenate(list(vals.values()))
    lo, hi = allv.min(), allv.max()
    pad = 0.25 * (hi - lo) if hi > lo else 1.0
    grid = np.linspace(lo - pad, hi + pad, n_grid)
    cols = {}
    for k, v in vals.items():
        try:
            cols[k] = kde(v, grid)
        except SgeigError:
            cols[k] = None
    return grid, cols


def _fmt(x):
    return "n/a" if x is None else f"{x:.3e}"


def cmd_compare(dirs, out=None, n_points=10000, seed=0):
    """Side-by-side coefficients, discrepancies, KDE overlays and MC z-scores; returns the report dict."""
    runs = [_load_run(d) for d in dirs]
    names = [r["name"] for r in runs]
    if len(set(names)) != len(names):
        names = [f"{r['name']}_{i + 1}" for i, r in enumerate(runs)]
    ref = runs[0]["summary"]
    for r in runs[1:]:
        s = r["summary"]
        if (s["family"], s["m_xi"], s["p"]) != (ref["family"], ref["m_xi"], ref["p"]):
            raise ConfigurationError(f"basis mismatch: {r['dir']} uses {s['family']} m_xi={s['m_xi']} p={s['p']}")
    directory = output_dir(out, "compare")
    with_coef = [(n, r) for n, r in zip(names, runs) if "lam" in r]
    report = {"runs": dict(zip(names, dirs)), "pairs": [], "z_scores": []}
    if with_coef:
        n_xi = len(with_coef[0][1]["lam"])
        with open(os.path.join(directory, "coefficients.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "degree"] + [f"{n}_{part}" for n, _ in with_coef for part in ("re", "im")])
            for k in range(n_xi):
                row = [k + 1, int(with_coef[0][1]["degree"][k])]
                for _, r in with_coef:
                    row += [f"{r['lam'][k].real:.17g}", f"{r['lam'][k].imag:.17g}"]
                wr.writerow(row)
        for i in range(len(with_coef)):
            for j in range(i + 1, len(with_coef)):
                (na, a), (nb, b) = with_coef[i], with_coef[j]
                d = np.abs(a["lam"] - b["lam"])
                scale = abs(a["lam"][0])
                report["pairs"].append({"a": na, "b": nb, "max_abs": float(d.max()),
                                        "max_rel": float(d.max() / scale) if scale > 0 else None})
    for n, r in zip(names, runs):
        if r["summary"]["method"] != "mc":
            continue
        s = r["summary"]
        mean = complex(*s["mean"])
        se = complex(*s["stderr"])
        for n2, r2 in with_coef:
            if r2 is r:
                continue
            lam1 = r2["lam"][0]
            # null when the part has zero sample spread (strict JSON has no NaN)
            z_re = abs(mean.real - lam1.real) / se.real if se.real > 0 else None
            z_im = abs(mean.imag - lam1.imag) / se.imag if se.imag > 0 else None
            report["z_scores"].append({"mc": n, "other": n2, "z_re": z_re, "z_im": z_im})
    pts = draw_points(ref["family"], ref["m_xi"], n_points, seed)
    dists = {n: _distribution(r, pts) for n, r in zip(names, runs)}
    for part in ("real", "imag"):
        grid, cols = _kde_table(dists, part)
        keep = [k for k, v in cols.items() if v is not None]
        if not keep:
            continue
        with open(os.path.join(directory, f"kde_{part[:2]}.csv"), "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x"] + keep)
            for g, row in zip(grid, np.column_stack([cols[k] for k in keep])):
                wr.writerow([f"{g:.17g}"] + [f"{v:.17g}" for v in row])
    with open(os.path.join(directory, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)
    for p in report["pairs"]:
        print(f"{p['a']} vs {p['b']}: max abs {p['max_abs']:.3e}, max rel {_fmt(p['max_rel'])}")
    for z in report["z_scores"]:
        print(f"{z['mc']} mean vs {z['other']} lambda_1: z_re {_fmt(z['z_re'])}, z_im {_fmt(z['z_im'])}")
    return report


def cmd_tensor_dump(family, m_xi, p, n_nu=None, out=None):
    basis = GpcBasis(family, m_xi, p)
    H = triple_product_tensor(basis, n_nu or basis.n_xi)
    if out:
        H.dump(out)
        print(f"wrote {H.nnz} entries to {out}")
    else:
        H.dump(sys.stdout)
    return H


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(ConfigurationError.exit_code)


def make_parser():
    ap = _Parser(prog="sgeig", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def config_args(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a key")
        p.add_argument("--out", help="output directory")

    g = sub.add_parser("gen", help="write a synthetic operator bundle")
    config_args(g)
    r = sub.add_parser("run", help="run sg, sc or mc")
    config_args(r)
    r.add_argument("--threads", type=int, default=1, help="parallel sample solves (mc/sc)")
    c = sub.add_parser("compare", help="compare run directories")
    c.add_argument("--runs", nargs="+", required=True, help="run directories")
    c.add_argument("--out", help="output directory")
    c.add_argument("--points", type=int, default=10000, help="points for sampling expansions")
    c.add_argument("--seed", type=int, default=0, help="seed for those points")
    t = sub.add_parser("tensor-dump", help="write triple-product tensor entries")
    t.add_argument("--family", choices=("hermite", "legendre"), required=True)
    t.add_argument("--m-xi", type=int, default=2)
    t.add_argument("--p", type=int, default=3)
    t.add_argument("--n-nu", type=int, help="number of slices (default n_xi)")
    t.add_argument("--out", help="file (default stdout)")
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        if args.command == "gen":
            cmd_gen(RunConfig.load(args.config, args.set), args.out)
            return EXIT_OK
        if args.command == "run":
            if args.threads < 1:
                raise ConfigurationError("--threads must be positive")
            code, _ = cmd_run(RunConfig.load(args.config, args.set), args.out, args.threads)
            return code
        if args.command == "compare":
            cmd_compare(args.runs, args.out, args.points, args.seed)
            return EXIT_OK
        cmd_tensor_dump(args.family, args.m_xi, args.p, args.n_nu, args.out)
        return EXIT_OK
    except SgeigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
