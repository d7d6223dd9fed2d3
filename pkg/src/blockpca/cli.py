"""Command-line front end.

Exit codes: 0 success, 1 selftest failure, 2 configuration error, 3 numerical
failure.  Errors are reported on stderr as ``error [module.operation]: ...``.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, export, presets, qve, sim, theory
from .errors import BlockPCAError, ModelError, NTooSmall
from .model import ModelParams, load_model, snr, t_for_snr, validate

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(Exception):
    pass


class NonMonotoneWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    count: int

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: Path | None
    N: int
    samples: int
    seed: int
    grid: GridSpec | None
    eta: float
    out: Path
    formats: tuple[str, ...]
    workers: int = 1


def parse_grid(text: str) -> GridSpec:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be MIN:MAX:COUNT, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be MIN:MAX:COUNT, got {text!r}") from None
    if count < 2 or not hi > lo:
        raise argparse.ArgumentTypeError("grid needs MAX > MIN and COUNT >= 2")
    return GridSpec(lo, hi, count)


def _formats(value: str) -> tuple[str, ...]:
    return ("csv", "json") if value == "both" else (value,)


def _config(args: argparse.Namespace) -> RunConfig:
    model = getattr(args, "model", None)
    if model is not None and not Path(model).is_file():
        raise ConfigError(f"model file {model} does not exist")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if getattr(args, "N", 1) < 1 or getattr(args, "samples", 1) < 1:
        raise ConfigError("N and samples must be positive")
    if getattr(args, "eta", 1e-7) <= 0:
        raise ConfigError("eta must be positive")
    return RunConfig(
        command=args.command,
        model=Path(model) if model else None,
        N=getattr(args, "N", 3000),
        samples=getattr(args, "samples", 1),
        seed=getattr(args, "seed", 0),
        grid=getattr(args, "grid", None),
        eta=getattr(args, "eta", 1e-7),
        out=out,
        formats=_formats(getattr(args, "format", "both")),
        workers=getattr(args, "workers", 1),
    )


def _load(cfg: RunConfig) -> ModelParams:
    try:
        return load_model(cfg.model)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file {cfg.model} is not valid JSON: {exc}") from exc


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- predict -------------------------------------------------------------------


def _density_for(m: ModelParams, grid: GridSpec | None, eta: float, info: qve.SupportInfo) -> qve.DensityCurve:
    x = grid.points() if grid is not None else qve.default_grid(m, qve.GRID_POINTS, info)
    return qve.density(m, x, qve.schedule_to(eta))


def run_predict(cfg: RunConfig, m: ModelParams | None = None, prefix: str = "") -> dict[str, Any]:
    m = m if m is not None else _load(cfg)
    pred = theory.predict(m)
    info = qve.support(m, with_intervals=False)
    curve = _density_for(m, cfg.grid, cfg.eta, info)
    info = qve.SupportInfo(
        right_edge=info.right_edge,
        left_edge=info.left_edge,
        intervals=qve.support_intervals(curve),
        edge_residual=info.edge_residual,
        right_bracket=info.right_bracket,
    )
    meta = export.metadata(m.digest(), None, eta=curve.eta, model=m.to_dict())
    export.write_json(cfg.out / f"{prefix}prediction.json", pred.to_dict(), meta)
    export.write_json(
        cfg.out / f"{prefix}edges.json",
        {**info.to_dict(), "eta": curve.eta, "mass": curve.mass(), "maxResidual": float(curve.residual.max())},
        meta,
    )
    header, rows = export.density_rows(curve)
    if "csv" in cfg.formats:
        export.write_csv(cfg.out / f"{prefix}density.csv", header, rows, meta)
    if "json" in cfg.formats:
        export.write_json(cfg.out / f"{prefix}density.json", {"columns": header, "rows": rows}, meta)
    flagged = int(curve.flagged.sum())
    if flagged:
        _log(f"warning [qve.density]: {flagged} grid points did not converge")
    return {"prediction": pred, "support": info, "curve": curve}


# -- simulate --------------------------------------------------------------------


def run_simulate(
    cfg: RunConfig, m: ModelParams | None = None, prefix: str = "", dump: bool = False
) -> sim.MonteCarloResult:
    m = m if m is not None else _load(cfg)
    if cfg.N < m.K:
        raise NTooSmall(f"N={cfg.N} is smaller than K={m.K}", operation="simulate")
    mc = sim.monte_carlo(m, cfg.N, cfg.samples, cfg.seed, full_spectrum=True, workers=cfg.workers)
    meta = export.metadata(m.digest(), cfg.seed, N=cfg.N, samples=cfg.samples, model=m.to_dict())
    export.write_json(cfg.out / f"{prefix}simulation.json", mc.to_dict(), meta)
    export.write_histogram(cfg.out / f"{prefix}histogram.csv", mc.hist_edges, mc.hist_counts, meta)
    header = ["sample", "top_value"] + [f"mu_{k + 1}" for k in range(m.K)] + ["q"]
    rows = [[i, r.top_value, *r.overlap_emp, r.overlap_global] for i, r in enumerate(mc.results)]
    if "csv" in cfg.formats:
        export.write_csv(cfg.out / f"{prefix}overlaps.csv", header, rows, meta)
    if "json" in cfg.formats:
        export.write_json(cfg.out / f"{prefix}overlaps.json", {"columns": header, "rows": rows}, meta)
    if dump:
        for i, r in enumerate(mc.results):
            export.write_eigenvalues(cfg.out / f"{prefix}eigenvalues_{i}.bin", r.eigenvalues)
    return mc


# -- sweep -----------------------------------------------------------------------

_PARAM = re.compile(r"^S\[(\d+),(\d+)\]$|^rho\[(\d+)\]$")


def parameter_builder(m: ModelParams, path: str) -> Callable[[float], ModelParams]:
    """Map a parameter path to ``t -> model``.

    ``S[k,l]`` (1-based) sets the symmetric pair ``s_kl = s_lk = t``.
    ``rho[k]`` sets ``rho_k = t`` and rescales the other proportions to keep
    their ratios.
    """
    hit = _PARAM.match(path.replace(" ", ""))
    if not hit:
        raise ConfigError(f"parameter path {path!r} must look like S[k,l] or rho[k]")
    if hit.group(1):
        k, l = int(hit.group(1)) - 1, int(hit.group(2)) - 1
        if not (0 <= k < m.K and 0 <= l < m.K):
            raise ConfigError(f"{path} is outside K={m.K}")
        return lambda t: m.with_entry(k, l, t)
    k = int(hit.group(3)) - 1
    if not 0 <= k < m.K or m.K < 2:
        raise ConfigError(f"{path} is outside K={m.K} or K < 2")
    rest = np.delete(m.rho, k)

    def build(t: float) -> ModelParams:
        rho = np.insert(rest * (1.0 - t) / rest.sum(), k, t)
        return validate({"K": m.K, "rho": rho, "S": m.S, "prior": m.prior})

    return build


def sweep_points(
    cfg: RunConfig,
    build: Callable[[float], ModelParams],
    values: Sequence[float],
    *,
    mc: bool = True,
) -> list[dict[str, Any]]:
    points = []
    for t in values:
        m = build(t)
        pred = theory.predict(m, with_phi1=False)
        row: dict[str, Any] = {"t": float(t), "snr": pred.snr, "phase": pred.phase.value, "prediction": pred}
        if mc:
            res = sim.monte_carlo(m, cfg.N, cfg.samples, cfg.seed, full_spectrum=False, workers=cfg.workers)
            row["mc"] = res
        points.append(row)
    snrs = [p["snr"] for p in points]
    d = np.diff(snrs)
    if len(d) and not (np.all(d > 0) or np.all(d < 0)):
        warnings.warn("snr is not monotone along the sweep", NonMonotoneWarning, stacklevel=2)
    return points


def _sweep_table(points: list[dict[str, Any]], K: int) -> tuple[list[str], list[list[Any]]]:
    header = ["t", "snr", "phase"]
    header += [f"theory_sq_{k + 1}" for k in range(K)] + ["theory_q_sq"]
    header += [f"mc_sq_mean_{k + 1}" for k in range(K)] + [f"mc_sq_std_{k + 1}" for k in range(K)]
    header += ["mc_q_sq_mean", "mc_q_sq_std", "mc_top_mean"]
    rows = []
    nan = float("nan")
    for p in points:
        pred = p["prediction"]
        row: list[Any] = [p["t"], p["snr"], p["phase"], *pred.overlap_sq, pred.overlap_global**2]
        r = p.get("mc")
        if r is None:
            row += [nan] * (2 * K + 3)
        else:
            row += [*r.overlap_sq_mean, *r.overlap_sq_std, r.global_sq_mean, r.global_sq_std, r.top_mean]
        rows.append(row)
    return header, rows


def _parse_values(text: str) -> list[float]:
    if text.count(":") == 2:
        g = parse_grid(text)
        return [float(v) for v in g.points()]
    try:
        return [float(Fraction(v)) for v in text.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse sweep values {text!r}") from None


def run_sweep(cfg: RunConfig, param: str, values: str | None, snr_targets: str | None) -> Path:
    m = _load(cfg)
    build = parameter_builder(m, param)
    if (values is None) == (snr_targets is None):
        raise ConfigError("give exactly one of --values or --snr")
    if values is not None:
        ts = _parse_values(values)
    else:
        lo, hi = (1e-9, 100.0) if param.startswith("S") else (1e-6, 1 - 1e-6)
        try:
            ts = [t_for_snr(build, s, lo, hi) for s in _parse_values(snr_targets)]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonMonotoneWarning)
        points = sweep_points(cfg, build, ts)
    header, rows = _sweep_table(points, m.K)
    meta = export.metadata(m.digest(), cfg.seed, N=cfg.N, samples=cfg.samples, parameter=param)
    if caught:
        meta["warning"] = str(caught[0].message)
        _log(f"warning [cli.sweep]: {caught[0].message}")
    path = cfg.out / "sweep.csv"
    export.write_csv(path, header, rows, meta)
    if "json" in cfg.formats:
        export.write_json(cfg.out / "sweep.json", {"columns": header, "rows": rows}, meta)
    return path


# -- reproduce -------------------------------------------------------------------

FIG1_SCRIPT = """\
# gnuplot script: limiting density, normalised histogram and top eigenvalue
set datafile separator ","
set datafile commentschars "#"
set key top left
set multiplot layout 1,3
{panels}
unset multiplot
"""

FIG1_PANEL = """\
set title "snr = {snr}"
set arrow from {top},graph 0 to {top},graph 0.1 nohead lc rgb "red" lw 2
plot "{hist}" every ::1 using (($1+$2)/2):($3/({n}*($2-$1))) with boxes title "empirical", \\
     "{dens}" every ::1 using 1:2 with lines lw 2 title "theory"
unset arrow
"""

FIG2_SCRIPT = """\
# gnuplot script: overlap^2 per block against snr; lines are theory, points Monte Carlo
set datafile separator ","
set datafile commentschars "#"
set datafile missing "nan"
set xlabel "lambda_1(Omega)"
set ylabel "overlap^2"
set multiplot layout 1,2
set title "S = [[t,1/2],[1/2,1/2]]"
plot "{left}" every ::1 using 2:4 with lines title "block 1", "" every ::1 using 2:5 with lines title "block 2", \\
     "" every ::1 using 2:7:9 with yerrorbars title "MC block 1", "" every ::1 using 2:8:10 with yerrorbars title "MC block 2"
set title "S = [[1,t],[t,1/2]]"
plot "{right}" every ::1 using 2:4 with lines title "block 1", "" every ::1 using 2:5 with lines title "block 2", \\
     "" every ::1 using 2:7:9 with yerrorbars title "MC block 1", "" every ::1 using 2:8:10 with yerrorbars title "MC block 2"
unset multiplot
"""


def run_fig1(cfg: RunConfig) -> dict[str, Any]:
    fam = presets.family("fig1")
    panels = []
    summary = {}
    for i, target in enumerate(presets.FIG1_SNRS, start=1):
        m, t = fam.model_for_snr(target)
        prefix = f"fig1_panel{i}_"
        out = run_predict(cfg, m, prefix)
        one = replace(cfg, samples=1)
        mc = run_simulate(one, m, prefix)
        r = mc.results[0]
        pred = out["prediction"]
        drop = pred.phase is theory.Phase.SUPERCRITICAL
        dist = sim.empirical_cdf_distance(r.eigenvalues, out["curve"], drop_top=drop)
        summary[f"panel{i}"] = {
            "targetSnr": target,
            "t": t,
            "snr": snr(m),
            "phase": pred.phase.value,
            "rightEdge": pred.right_edge,
            "topEigenvalue": r.top_value,
            "secondEigenvalue": r.second_value,
            "kolmogorov": dist,
        }
        panels.append(
            FIG1_PANEL.format(
                snr=target,
                top=r.top_value,
                hist=f"{prefix}histogram.csv",
                dens=f"{prefix}density.csv",
                n=cfg.N,
            )
        )
    export.write_json(cfg.out / "fig1_summary.json", summary, export.metadata(None, cfg.seed, N=cfg.N))
    (cfg.out / "fig1.gp").write_text(FIG1_SCRIPT.format(panels="".join(panels)), encoding="utf-8")
    return summary


def run_fig2(cfg: RunConfig, theory_points: int = 61) -> dict[str, Path]:
    paths = {}
    for side in ("left", "right"):
        fam = presets.family(f"fig2-{side}")
        dense = np.linspace(presets.FIG2_SNRS[0], presets.FIG2_SNRS[-1], theory_points)
        curve_t = [fam.model_for_snr(s)[1] for s in dense]
        dots_t = [fam.model_for_snr(s)[1] for s in presets.FIG2_SNRS]
        pts = sweep_points(cfg, fam.build, curve_t, mc=False)
        pts += sweep_points(cfg, fam.build, dots_t, mc=True)
        pts.sort(key=lambda p: (p["snr"], "mc" in p))
        header, rows = _sweep_table(pts, 2)
        meta = export.metadata(None, cfg.seed, N=cfg.N, samples=cfg.samples, family=fam.name)
        paths[side] = export.write_csv(cfg.out / f"fig2_{side}.csv", header, rows, meta)
    (cfg.out / "fig2.gp").write_text(
        FIG2_SCRIPT.format(left=paths["left"].name, right=paths["right"].name), encoding="utf-8"
    )
    return paths


# -- selftest --------------------------------------------------------------------


def run_selftest() -> int:
    from . import selftest

    checks = selftest.run_all()
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.measured}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_SELFTEST


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockpca", description="Spectral PCA for block spiked Wigner models.")
    p.add_argument("--version", action="version", version=f"blockpca {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser, model: bool = True) -> None:
        if model:
            sp.add_argument("--model", required=True, help="JSON model file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--format", choices=("csv", "json", "both"), default="both")

    def sampling(sp: argparse.ArgumentParser, samples: int) -> None:
        sp.add_argument("--N", type=int, default=3000)
        sp.add_argument("--samples", type=int, default=samples)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1, help="threads for independent samples")

    sp = sub.add_parser("predict", help="limiting density, edges and overlap prediction")
    common(sp)
    sp.add_argument("--grid", type=parse_grid, help="density abscissas MIN:MAX:COUNT")
    sp.add_argument("--eta", type=float, default=1e-7, help="final imaginary offset")

    sp = sub.add_parser("simulate", help="Monte Carlo spectra and overlaps")
    common(sp)
    sampling(sp, 1)
    sp.add_argument("--dump-eigenvalues", action="store_true", help="write raw spectra as binary files")

    sp = sub.add_parser("sweep", help="theory and Monte Carlo along one parameter")
    common(sp)
    sampling(sp, 10)
    sp.add_argument("--param", required=True, help="S[k,l] or rho[k], 1-based")
    sp.add_argument("--values", help="comma list or MIN:MAX:COUNT of parameter values")
    sp.add_argument("--snr", dest="snr_targets", help="comma list or MIN:MAX:COUNT of target snr values")

    sp = sub.add_parser("reproduce", help="regenerate the reference figures")
    sp.add_argument("figure", choices=("fig1", "fig2"))
    common(sp, model=False)
    sampling(sp, 10)
    sp.add_argument("--eta", type=float, default=1e-7)

    sub.add_parser("selftest", help="run the built-in property checks")
    return p


def _where(exc: BlockPCAError) -> str:
    return f"{exc.module}.{exc.operation}" if exc.operation else exc.module


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "selftest":
        return run_selftest()
    try:
        cfg = _config(args)
        if args.command == "predict":
            run_predict(cfg)
        elif args.command == "simulate":
            run_simulate(cfg, dump=args.dump_eigenvalues)
        elif args.command == "sweep":
            run_sweep(cfg, args.param, args.values, args.snr_targets)
        elif args.command == "reproduce":
            run_fig1(cfg) if args.figure == "fig1" else run_fig2(cfg)
    except (ConfigError, OSError) as exc:
        _log(f"error [cli.{args.command}]: {exc}")
        return EXIT_CONFIG
    except (ModelError, NTooSmall) as exc:
        _log(f"error [{_where(exc)}]: {exc}")
        return EXIT_CONFIG
    except BlockPCAError as exc:
        _log(f"error [{_where(exc)}]: {exc}")
        return EXIT_NUMERIC
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        _log(f"error [{args.command}]: {exc}")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
