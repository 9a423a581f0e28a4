"""Command-line pipeline.

Each stage reads and writes files only, so stages can run on their own or
chained by ``run-all``. Outputs are written atomically, each raster with a
JSON metadata sidecar, and do not depend on the ``--jobs`` setting.

Exit codes: 0 success, 1 internal error, 2 usage error, 3 invalid input or
configuration, 4 file error, 5 computation error.
"""

from __future__ import annotations

import argparse
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .climatology import IndicatorRegistry, indicators_from_array
from .config import CONFIG_ENV_VAR, config_hash, load_config
from .erosion_model import DEFAULT_BREAKS, compose
from .erosivity_empirical import EquationSet
from .erosivity_exact import annual_erosivity, r_factor
from .exceptions import ComputationError, InputIOError, RusleError, ValidationError
from .io_formats import read_ascii_grid, read_daily_stack, read_gauge_csv, render_png, write_ascii_grid, write_json
from .raster import Raster, align
from .rds_ensemble import AGGREGATIONS, RDSEnsemble, aggregate_values
from .rusle_factors import FactorSet, SoilTexture, compute_factors, slope

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_COMPUTATION = 5

FACTOR_NAMES = ("K", "L", "S", "C", "St", "P")


class Context:
    """Per-invocation state: configuration, output directory, worker pool size."""

    def __init__(self, args, cfg: dict):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out)
        self.jobs = max(1, int(getattr(args, "jobs", 1) or 1))
        self.command = args.command
        self.hash = config_hash(cfg)

    def map(self, fn, items):
        items = list(items)
        if self.jobs == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.jobs) as ex:
            return list(ex.map(fn, items))

    def decisions(self) -> dict:
        rds = self.cfg["rds"]
        fac = self.cfg.get("factors", {})
        a = self.args

        def pick(flag, value):
            v = getattr(a, flag, None)
            return value if v is None else v

        lam = pick("slope_length", fac.get("slope_length_m"))
        return {
            "rds_variant": pick("variant", rds["variant"]),
            "rds_aggregation": pick("aggregation", rds["aggregation"]),
            "guard_margin": pick("margin", rds["guard_margin"]),
            "fingerprint_statistic": rds.get("fingerprint_statistic", "mean"),
            "energy_equation": pick("energy", fac.get("energy_equation", "rusle")),
            "slope_length": "cell size" if lam is None else (Path(lam).name if isinstance(lam, str) else lam),
            "storm_rules": "6 h < 1.27 mm separation; keep >= 12.7 mm or a record >= 6.35 mm",
            "weighted_median_tie": "midpoint",
            "class_breaks": pick("breaks", self.cfg["classification"]["breaks"]),
        }

    def sidecar(self, inputs=()) -> dict:
        return {
            "command": self.command,
            "package_version": __version__,
            "numpy_version": np.__version__,
            "config_sha256": self.hash,
            "decisions": self.decisions(),
            "inputs": [str(i) for i in inputs],
        }

    def write_raster(self, r: Raster, rel: str, inputs=(), extra=None) -> Path:
        path = self.out / rel
        write_ascii_grid(r, path)
        meta = self.sidecar(inputs)
        meta["raster"] = rel
        if extra:
            meta.update(extra)
        write_json(str(path) + ".json", meta)
        return path


# ---------------------------------------------------------------------------
# paths


def _base_dir(args) -> Path:
    if getattr(args, "data_dir", None):
        return Path(args.data_dir)
    if getattr(args, "config", None):
        return Path(args.config).resolve().parent
    return Path.cwd()


def _io_path(args, cfg, key, flag_value):
    """Resolve an input from a CLI flag, else from the config ``io`` section."""
    if flag_value:
        return Path(flag_value)
    rel = cfg.get("io", {}).get(key)
    if rel is None:
        raise ValidationError(f"no path for {key!r}: pass a flag or set io.{key} in the config")
    p = Path(rel)
    return p if p.is_absolute() else _base_dir(args) / p


# ---------------------------------------------------------------------------
# stages


def stage_indicators(ctx: Context, precip_dir) -> dict[str, Raster]:
    registry = IndicatorRegistry.from_config(ctx.cfg["indicators"])
    stack = read_daily_stack(precip_dir)
    x = stack.as_matrix()
    arr = indicators_from_array(x, stack.dates, registry)
    rasters = {i: Raster.from_nan(stack.spec, a.reshape(stack.spec.shape)) for i, a in zip(registry.ids, arr)}
    ctx.map(
        lambda kv: ctx.write_raster(kv[1], f"indicators/{kv[0]}.asc", [Path(precip_dir).name]),
        rasters.items(),
    )
    return rasters


def _read_indicator_dir(ctx: Context, directory) -> dict[str, Raster]:
    ids = [i["id"] for i in ctx.cfg["indicators"]]
    rs = ctx.map(lambda i: read_ascii_grid(Path(directory) / f"{i}.asc"), ids)
    return dict(zip(ids, rs))


def stage_ensemble(ctx: Context, indicators: dict[str, Raster], aggregation=None, variant=None, margin=None, per_indicator=False):
    cfg = ctx.cfg
    rds_cfg = cfg["rds"]
    aggregation = aggregation or rds_cfg["aggregation"]
    variant = variant or rds_cfg["variant"]
    margin = rds_cfg["guard_margin"] if margin is None else margin
    ids = [i["id"] for i in cfg["indicators"]]
    eqs = EquationSet.from_config(cfg["equations"], ids)
    spec = indicators[ids[0]].spec
    X = np.stack([indicators[i].data.ravel() for i in ids], axis=1)

    model = RDSEnsemble(
        equations=eqs,
        indicator_ids=ids,
        aggregation=aggregation,
        variant=variant,
        guard_margin=margin,
        fingerprint_statistic=rds_cfg.get("fingerprint_statistic", "mean"),
    ).fit(X)
    res = model.compute(X)

    def grid(a):
        return Raster.from_nan(spec, np.asarray(a).reshape(spec.shape))

    inputs = ["indicators"]
    extra = {"aggregation": aggregation, "variant": variant, "guard_margin": margin}
    jobs = [("ensemble/r_ensemble.asc", grid(res.ensemble)), ("ensemble/trustability.asc", grid(res.trustability))]
    for k, eq in enumerate(eqs):
        jobs.append((f"ensemble/members/{eq.id}.asc", grid(res.member_r[k])))
        jobs.append((f"ensemble/valid/{eq.id}.asc", grid(res.valid[k].astype(float))))
        jobs.append((f"ensemble/weights/{eq.id}.asc", grid(res.weights[k])))
    for mode in AGGREGATIONS:
        agg = aggregate_values(res.similarity, mode, axis=1)
        for k, eq in enumerate(eqs):
            jobs.append((f"ensemble/similarity/{eq.id}_{mode}.asc", grid(agg[k])))
    if per_indicator:
        for k, eq in enumerate(eqs):
            for j, ind in enumerate(ids):
                jobs.append((f"ensemble/similarity/{eq.id}/{ind}.asc", grid(res.similarity[k, j])))
    ctx.map(lambda job: ctx.write_raster(job[1], job[0], inputs, extra), jobs)
    return grid(res.ensemble), grid(res.trustability), eqs


def stage_exact(ctx: Context, gauges: list[dict], energy=None, ensemble: Raster | None = None) -> dict:
    energy = energy or ctx.cfg.get("factors", {}).get("energy_equation", "rusle")

    def one(g):
        series = read_gauge_csv(g["path"])
        yearly = annual_erosivity(series, equation=energy)
        entry = {
            "id": g.get("id", Path(g["path"]).stem),
            "file": Path(g["path"]).name,
            "step_minutes": series.step,
            "years": sorted(yearly),
            "events_per_year": {str(y): len(v) for y, v in sorted(yearly.items())},
            "annual_ei30": {str(y): sum(e.ei30 for e in v) for y, v in sorted(yearly.items())},
            "r_factor": r_factor(yearly) if yearly else None,
        }
        if ensemble is not None and "x" in g and "y" in g:
            s = ensemble.spec
            col = int(np.floor((g["x"] - s.x_ll) / s.cellsize))
            row = int(np.floor((s.y_ur - g["y"]) / s.cellsize))
            if 0 <= row < s.nrows and 0 <= col < s.ncols and ensemble.valid[row, col]:
                entry["ensemble_r_at_gauge"] = float(ensemble.data[row, col])
        return entry

    report = {
        **ctx.sidecar([Path(g["path"]).name for g in gauges]),
        "units": "MJ mm ha-1 h-1 yr-1",
        "gauges": ctx.map(one, gauges),
    }
    write_json(ctx.out / "erosivity_exact.json", report)
    return report


def stage_factors(ctx: Context, paths: dict, slope_length=None) -> FactorSet:
    cfg = ctx.cfg
    fac = cfg.get("factors", {})
    resampling = fac.get("resampling", {})
    names = ["dem", "sand", "silt", "clay", "landcover", "stoniness"]
    layers = dict(zip(names, ctx.map(lambda n: read_ascii_grid(paths[n]), names)))
    target = layers["dem"].spec
    for n in names[1:]:
        layers[n] = align(layers[n], target, resampling.get(n, "nearest" if n == "landcover" else "bilinear"))

    if slope_length is None:
        slope_length = fac.get("slope_length_m")
    lam = slope_length
    if isinstance(slope_length, str):
        try:
            lam = float(slope_length)
        except ValueError:
            lam = align(read_ascii_grid(slope_length), target, resampling.get("slope_length", "bilinear"))
    tex = SoilTexture(layers["sand"], layers["silt"], layers["clay"])
    fs = compute_factors(tex, layers["dem"], layers["landcover"], layers["stoniness"], cfg["cover_table"], lam)
    inputs = [Path(paths[n]).name for n in names]
    lam_note = {"slope_length": "cell size" if lam is None else (lam if not isinstance(lam, Raster) else "raster")}
    jobs = [(f"factors/{k}.asc", r) for k, r in fs.as_dict().items()]
    jobs.append(("factors/slope_rad.asc", slope(layers["dem"])))
    ctx.map(lambda job: ctx.write_raster(job[1], job[0], inputs, lam_note), jobs)
    return fs


def stage_compose(ctx: Context, fs: FactorSet, r: Raster, breaks=None):
    breaks = breaks or ctx.cfg["classification"].get("breaks", list(DEFAULT_BREAKS))
    target = fs.K.spec
    if not r.spec.same_grid(target):
        method = ctx.cfg.get("factors", {}).get("resampling", {}).get("r", "bilinear")
        r = align(r, target, method)
    prov = {"R": "ensemble erosivity", **{k: f"factors/{k}.asc" for k in FACTOR_NAMES}}
    em = compose(fs, r, breaks, provenance=prov)
    ctx.write_raster(em.er, "erosion/er.asc", ["R", *FACTOR_NAMES], em.metadata)
    ctx.write_raster(em.classes, "erosion/classes.asc", ["erosion/er.asc"], {"class_breaks": list(breaks)})
    return em


def stage_render(ctx: Context, eq_ids) -> None:
    rc = ctx.cfg.get("render", {})
    sim_ramp = rc.get("similarity_ramp", "blue-red")
    jobs = [
        ("erosion/er.asc", rc.get("erosion_ramp", "erosion"), dict(log=rc.get("erosion_log", True))),
        ("ensemble/r_ensemble.asc", rc.get("erosivity_ramp", "rain"), {}),
        ("ensemble/trustability.asc", sim_ramp, dict(vmin=0.0, vmax=1.0)),
    ]
    for eid in eq_ids:
        for mode in AGGREGATIONS:
            jobs.append((f"ensemble/similarity/{eid}_{mode}.asc", sim_ramp, dict(vmin=0.0, vmax=1.0)))

    def one(job):
        rel, ramp, kw = job
        r = read_ascii_grid(ctx.out / rel)
        png = ctx.out / "png" / (rel.replace("/", "__").replace(".asc", ".png"))
        render_png(r, ramp, png, title=rel, **kw)

    ctx.map(one, jobs)


# ---------------------------------------------------------------------------
# commands


def cmd_indicators(ctx, args):
    stage_indicators(ctx, _io_path(args, ctx.cfg, "precip_dir", args.precip_dir))


def _gauge_list(args, cfg):
    if args.gauge:
        return [{"path": str(Path(p)), "id": Path(p).stem} for p in args.gauge]
    out = []
    for g in cfg.get("io", {}).get("gauges", []):
        g = dict(g)
        p = Path(g["path"])
        g["path"] = str(p if p.is_absolute() else _base_dir(args) / p)
        out.append(g)
    if not out:
        raise ValidationError("no gauge files: pass --gauge or set io.gauges in the config")
    return out


def cmd_exact(ctx, args):
    stage_exact(ctx, _gauge_list(args, ctx.cfg), args.energy)


def cmd_ensemble(ctx, args):
    inds = _read_indicator_dir(ctx, args.indicators_dir)
    stage_ensemble(ctx, inds, args.aggregation, args.variant, args.margin, args.per_indicator)


def _factor_paths(args, cfg):
    return {n: _io_path(args, cfg, n, getattr(args, n, None)) for n in ("dem", "sand", "silt", "clay", "landcover", "stoniness")}


def cmd_factors(ctx, args):
    stage_factors(ctx, _factor_paths(args, ctx.cfg), args.slope_length)


def cmd_compose(ctx, args):
    d = Path(args.factors_dir)
    rs = dict(zip(FACTOR_NAMES, ctx.map(lambda k: read_ascii_grid(d / f"{k}.asc"), FACTOR_NAMES)))
    stage_compose(ctx, FactorSet(**rs), read_ascii_grid(args.r), args.breaks)


def cmd_render(ctx, args):
    r = read_ascii_grid(args.raster)
    render_png(r, args.ramp, args.png, vmin=args.vmin, vmax=args.vmax, log=args.log, title=Path(args.raster).name)


def cmd_run_all(ctx, args):
    cfg = ctx.cfg
    inds = stage_indicators(ctx, _io_path(args, cfg, "precip_dir", None))
    r_ens, _, eqs = stage_ensemble(ctx, inds, args.aggregation, args.variant, args.margin)
    if cfg.get("io", {}).get("gauges") or args.gauge:
        stage_exact(ctx, _gauge_list(args, cfg), None, r_ens)
    fs = stage_factors(ctx, _factor_paths(args, cfg), args.slope_length)
    stage_compose(ctx, fs, r_ens, args.breaks)
    stage_render(ctx, eqs.ids)


def cmd_make_demo(ctx, args):
    from .synthetic import write_demo_dataset

    write_demo_dataset(args.out, size=args.size)


COMMANDS = {
    "indicators": cmd_indicators,
    "erosivity-exact": cmd_exact,
    "erosivity-ensemble": cmd_ensemble,
    "rusle-factors": cmd_factors,
    "compose": cmd_compose,
    "render": cmd_render,
    "run-all": cmd_run_all,
    "make-demo": cmd_make_demo,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rusle-rds", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help=f"run configuration JSON (default: ${CONFIG_ENV_VAR} or shipped default)")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("-j", "--jobs", type=int, default=1, help="worker threads (outputs do not depend on it)")
        sp.add_argument("--data-dir", help="base directory for relative paths in the config io section")

    def ensemble_opts(sp):
        sp.add_argument("--aggregation", choices=AGGREGATIONS)
        sp.add_argument("--variant", choices=("sum", "max"), help="relative distance denominator")
        sp.add_argument("--margin", type=float, help="guard margin (relative)")

    sp = sub.add_parser("indicators", help="climatic indicators from a daily precipitation directory")
    common(sp)
    sp.add_argument("--precip-dir")

    sp = sub.add_parser("erosivity-exact", help="exact R factor from gauge CSV files")
    common(sp)
    sp.add_argument("--gauge", action="append", help="gauge CSV (repeatable)")
    sp.add_argument("--energy", choices=("rusle", "wischmeier"))

    sp = sub.add_parser("erosivity-ensemble", help="similarity-weighted ensemble of empirical equations")
    common(sp)
    sp.add_argument("--indicators-dir", required=True)
    sp.add_argument("--per-indicator", action="store_true", help="also write per-indicator similarity maps")
    ensemble_opts(sp)

    sp = sub.add_parser("rusle-factors", help="K, L, S, C, St and P rasters")
    common(sp)
    for n in ("dem", "sand", "silt", "clay", "landcover", "stoniness"):
        sp.add_argument(f"--{n}")
    sp.add_argument("--slope-length", help="slope length in metres or a raster path (default: cell size)")

    sp = sub.add_parser("compose", help="soil loss and sensitivity classes")
    common(sp)
    sp.add_argument("--factors-dir", required=True)
    sp.add_argument("--r", required=True, help="erosivity raster")
    sp.add_argument("--breaks", type=float, nargs="+")

    sp = sub.add_parser("render", help="render a raster as PNG")
    sp.add_argument("--config")
    sp.add_argument("raster")
    sp.add_argument("png")
    sp.add_argument("--ramp", default="blue-red")
    sp.add_argument("--vmin", type=float)
    sp.add_argument("--vmax", type=float)
    sp.add_argument("--log", action="store_true")

    sp = sub.add_parser("run-all", help="full pipeline")
    common(sp)
    ensemble_opts(sp)
    sp.add_argument("--gauge", action="append")
    sp.add_argument("--slope-length")
    sp.add_argument("--breaks", type=float, nargs="+")

    sp = sub.add_parser("make-demo", help="write the synthetic demo dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--size", type=int, default=50)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.command == "make-demo":
            cmd_make_demo(None, args)
            return EXIT_OK
        cfg = load_config(getattr(args, "config", None))
        if args.command == "render":
            cmd_render(None, args)
            return EXIT_OK
        ctx = Context(args, cfg)
        COMMANDS[args.command](ctx, args)
        meta = ctx.sidecar()
        meta["python"] = platform.python_version()
        write_json(ctx.out / f"run_metadata.{args.command}.json", meta)
    except ValidationError as exc:
        print(f"rusle-rds: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InputIOError as exc:
        print(f"rusle-rds: file error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ComputationError as exc:
        print(f"rusle-rds: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    except RusleError as exc:  # pragma: no cover - every concrete error has a category
        print(f"rusle-rds: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"rusle-rds: file error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"rusle-rds {args.command}: done in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
