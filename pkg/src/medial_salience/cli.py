"""Batch command-line interface.

    medial-salience <command> INPUT... [options]

Commands: skeletonize, salience, split, compose, reconstruct, stats. Inputs
are paths or glob patterns. Every image is processed independently; the exit
status is 0 when all succeed, 1 when some fail, 2 when all fail and 3 for a
configuration error.
"""

import argparse
import configparser
import glob
import hashlib
import json
import logging
import multiprocessing
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import pipeline
from .aof import save_aof_png, save_overlay_png
from .distance import save_distance_png
from .exceptions import ConfigError, MedialSalienceError
from .ingest import ADAPTIVE, load_line_drawing
from .outputs import (ChannelSpec, aggregate_stats, compose_channels, export_stats,
                      render_colormap, salience_png_array, save_png, split_by_salience,
                      write_json)
from .salience import MEASURES, SalienceConfig, write_branch_csv

log = logging.getLogger("medial_salience")

OUTPUT_ENV = "MEDIAL_SALIENCE_OUTPUT"
COMMANDS = ("skeletonize", "salience", "split", "compose", "reconstruct", "stats")
EXIT_OK, EXIT_PARTIAL, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2, 3

DEFAULTS = {
    "tau": 0.25, "window": 5, "disk_radius": 1.0, "samples": 60, "sigma": 1.0,
    "radius_sigma": 3.0, "radius_scale": 0.4, "measures": list(MEASURES),
    "channels": [["contours", "ribbon", "separation"]],
    "fraction": [0.5], "connectivity": 4, "jobs": 1, "debug": False, "invert_polarity": False,
    "frame": False, "projection": "spoke", "touch_distance": 2.0, "bit_depth": 8,
    "binarize": ADAPTIVE, "bright_contours": False, "colormap": "hot", "legend": False,
    "csv": False, "distance_scale": 256.0, "output": None,
}


# ---------------------------------------------------------------- config values

def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _words(v):
    if isinstance(v, str):
        return [w.strip() for w in v.split(",") if w.strip()]
    return [str(w) for w in v]


def _floats(v):
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(w) for w in _words(v)]


def _channels(v):
    # "a,b,c;d,e,f" or a list of such strings / lists
    if isinstance(v, str):
        v = [p for p in v.split(";") if p.strip()]
    return [_words(p) for p in v]


def _binarize(v):
    return ADAPTIVE if str(v) == ADAPTIVE else int(v)


CONVERT = {
    "tau": float, "window": int, "disk_radius": float, "samples": int, "sigma": float,
    "radius_sigma": float, "radius_scale": float, "measures": _words, "channels": _channels,
    "fraction": _floats,
    "connectivity": int, "jobs": int, "debug": _bool, "invert_polarity": _bool, "frame": _bool,
    "projection": str, "touch_distance": float, "bit_depth": int, "binarize": _binarize,
    "bright_contours": _bool, "colormap": str, "legend": _bool, "csv": _bool,
    "distance_scale": float, "output": str,
}


def read_config_file(path):
    """Key-value settings from a JSON object or an INI-style file.

    INI files may hold bare ``key = value`` lines or one section.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if str(path).endswith(".json"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path} must hold a JSON object")
    else:
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text if text.lstrip().startswith("[") else "[run]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"bad config file {path}: {exc}") from exc
        raw = {}
        for sec in cp.sections():
            raw.update(cp[sec])
    return {str(k).replace("-", "_"): v for k, v in raw.items()}


def _convert(settings, source):
    out = {}
    for k, v in settings.items():
        if k not in CONVERT:
            raise ConfigError(f"unknown setting {k!r} in {source}")
        try:
            out[k] = CONVERT[k](v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k} in {source}: {v!r}") from exc
    return out


def resolve_settings(flags, config_path=None, environ=None):
    """Defaults, then the config file, then flags; the env var supplies the
    output directory when neither names one."""
    environ = os.environ if environ is None else environ
    s = dict(DEFAULTS)
    if config_path:
        s.update(_convert(read_config_file(config_path), config_path))
    s.update(_convert({k: v for k, v in flags.items() if v is not None}, "command line"))
    if not s["output"]:
        s["output"] = environ.get(OUTPUT_ENV) or "medial_salience_out"
    return s


def salience_config(s, measures=None):
    try:
        return SalienceConfig(window=s["window"], measures=tuple(measures or s["measures"]),
                              tau=s["tau"], sigma=s["sigma"], radius_sigma=s["radius_sigma"],
                              radius_scale=s["radius_scale"],
                              disk_radius=s["disk_radius"], sample_count=s["samples"],
                              projection=s["projection"], touch_distance=s["touch_distance"],
                              connectivity=s["connectivity"], frame=s["frame"])
    except MedialSalienceError as exc:
        raise ConfigError(str(exc)) from exc


def validate_settings(s):
    """Check every setting up front so a bad value fails before any work."""
    cfg = salience_config(s)
    try:
        specs = [ChannelSpec(tuple(c)) for c in s["channels"]]
    except MedialSalienceError as exc:
        raise ConfigError(str(exc)) from exc
    for f in s["fraction"]:
        if not 0.0 <= f <= 1.0:
            raise ConfigError(f"fraction {f} is outside [0, 1]")
    if s["jobs"] < 1:
        raise ConfigError("jobs must be at least 1")
    if s["bit_depth"] not in (8, 16):
        raise ConfigError("bit depth must be 8 or 16")
    if s["colormap"] not in ("hot", "gray"):
        raise ConfigError(f"unknown colormap {s['colormap']!r}")
    if s["distance_scale"] <= 0:
        raise ConfigError("distance scale must be positive")
    b = s["binarize"]
    if b != ADAPTIVE and not 0 <= b <= 256:
        raise ConfigError(f"binarize level {b} is outside [0, 256]")
    return cfg, specs


def echo_config(s, command, inputs):
    """The resolved settings as written beside the outputs.

    ``jobs`` and the output directory are left out: they say where and how
    fast results are produced, not what they are.
    """
    d = {k: v for k, v in s.items() if k not in ("jobs", "output")}
    d["command"] = command
    d["inputs"] = list(inputs)
    d["resolved"] = salience_config(s).to_dict()
    return d


# ---------------------------------------------------------------- inputs

def expand_inputs(patterns):
    """Expand globs; a pattern that matches nothing is kept so it fails
    visibly as a missing file."""
    out = []
    for p in patterns:
        if glob.has_magic(p):
            hits = sorted(glob.glob(p))
            out.extend(hits if hits else [p])
        else:
            out.append(p)
    seen, uniq = set(), []
    for p in out:
        if p not in seen:
            seen.add(p)
            uniq.append(p)
    return uniq


def image_stems(paths):
    stems = [Path(p).stem for p in paths]
    dup = sorted({s for s in stems if stems.count(s) > 1})
    if dup:
        raise ConfigError(f"inputs share output names: {', '.join(dup)}")
    return stems


def fraction_tag(f):
    return f"{f * 100:g}".replace(".", "p")


# ---------------------------------------------------------------- per image

def _load(path, s):
    return load_line_drawing(path, s["binarize"], not s["bright_contours"])


def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _cache_key(path, s, cfg):
    return {"input": _file_digest(path), "config": cfg.to_dict(),
            "binarize": s["binarize"], "bright_contours": s["bright_contours"]}


def _write_cache(out, stem, key, contours, maps):
    np.save(out / f"{stem}.cache.contours.npy", contours.mask)
    for m, v in maps.items():
        np.save(out / f"{stem}.cache.{m}.npy", v)
    write_json(key, out / f"{stem}.cache.json")


def _read_cache(out, stem, key, measures):
    from .ingest import BinaryContourImage
    meta = out / f"{stem}.cache.json"
    try:
        cached = json.loads(meta.read_text())
        if cached["input"] != key["input"] or cached["binarize"] != key["binarize"] \
                or cached["bright_contours"] != key["bright_contours"]:
            return None
        cfg = dict(cached["config"])
        want = dict(key["config"])
        if not set(measures) <= set(cfg.pop("measures")):
            return None
        want.pop("measures")
        if cfg != want:
            return None
        contours = BinaryContourImage(np.load(out / f"{stem}.cache.contours.npy"))
        maps = {m: np.load(out / f"{stem}.cache.{m}.npy") for m in measures}
    except (OSError, ValueError, KeyError):
        return None
    return contours, maps


def _salience_maps(path, stem, s, out, measures):
    """Contour maps for ``measures``, from the cache when it matches."""
    cfg = salience_config(s, measures)
    key = _cache_key(path, s, cfg)
    hit = _read_cache(out, stem, key, cfg.measures)
    if hit is not None:
        log.debug("%s: using cached salience", stem)
        return hit[0], hit[1], None
    res = pipeline.run(_load(path, s), cfg)
    _write_cache(out, stem, key, res.contours, res.salience.contour_values)
    return res.contours, res.salience.contour_values, res


def _debug(res, stem, s, out):
    save_aof_png(res.aof, out / f"{stem}.debug.aof.png")
    save_distance_png(res.field, out / f"{stem}.debug.distance.png", s["distance_scale"])
    save_png(np.where(res.contours.mask, 255, 0).astype(np.uint8),
             out / f"{stem}.debug.contours.png")
    write_json({k: round(v, 6) for k, v in res.timings.items()},
               out / f"{stem}.debug.timings.json")


def _mask_png(mask, invert):
    arr = np.where(mask, 255, 0).astype(np.uint8)
    return 255 - arr if invert else arr


def _do_skeletonize(path, stem, s, out):
    res = pipeline.skeletonize(_load(path, s), salience_config(s))
    save_overlay_png(res.skeleton, res.contours.mask, out / f"{stem}.skeleton.overlay.png")
    res.graph.to_json(out / f"{stem}.skeleton.graph.json")
    if s["debug"]:
        _debug(res, stem, s, out)
    return {"branches": len(res.graph.branches), "skeleton_points": len(res.skeleton)}


def _do_salience(path, stem, s, out):
    cfg = salience_config(s)
    res = pipeline.run(_load(path, s), cfg)
    maps = res.salience.contour_values
    for m in cfg.measures:
        save_png(salience_png_array(maps[m], res.contours), out / f"{stem}.salience.{m}.png")
        save_png(render_colormap(maps[m], res.contours, s["colormap"], s["legend"]),
                 out / f"{stem}.colormap.{m}.png")
    stats = export_stats(res.graph, res.salience, res.contours, res.regions, None, res.skeleton)
    write_json(stats, out / f"{stem}.stats.json")
    if s["csv"]:
        write_branch_csv(res.branch_values, out / f"{stem}.branches.csv", cfg.measures)
    _write_cache(out, stem, _cache_key(path, s, cfg), res.contours, maps)
    if s["debug"]:
        _debug(res, stem, s, out)
    return {"stats": stats}


def _do_split(path, stem, s, out):
    contours, maps, res = _salience_maps(path, stem, s, out, s["measures"])
    counts = {}
    for m in salience_config(s).measures:
        for f in s["fraction"]:
            sp = split_by_salience(maps[m], contours, f, m)
            tag = fraction_tag(f)
            save_png(_mask_png(sp.top.mask, s["invert_polarity"]), out / f"{stem}.top{tag}.{m}.png")
            save_png(_mask_png(sp.bottom.mask, s["invert_polarity"]),
                     out / f"{stem}.bottom{tag}.{m}.png")
            counts[f"{m}@{f:g}"] = [sp.top.contour_count, sp.bottom.contour_count]
    if s["debug"] and res is not None:
        _debug(res, stem, s, out)
    return {"split_counts": counts}


def _do_compose(path, stem, s, out):
    specs = [ChannelSpec(tuple(c)) for c in s["channels"]]
    measures = sorted({m for sp in specs for m in sp.measures}) or ["separation"]
    contours, maps, res = _salience_maps(path, stem, s, out, measures)
    for sp in specs:
        arr = compose_channels(sp, contours, maps, s["invert_polarity"], s["bit_depth"])
        save_png(arr, out / f"{stem}.compose.{sp.name()}.png")
    if s["debug"] and res is not None:
        _debug(res, stem, s, out)
    return {"composed": [sp.name() for sp in specs]}


def _do_reconstruct(path, stem, s, out):
    cfg = salience_config(s)
    res = pipeline.skeletonize(_load(path, s), cfg)
    tips = pipeline.reconstruction_tips(res)
    fid = pipeline.reconstruction_fidelity(res.contours.mask, tips)
    h, w = res.contours.shape
    rgb = np.full((h, w, 3), 255, dtype=np.uint8)
    rgb[res.contours.mask] = 160
    if len(tips):
        p = np.floor(tips + 0.5).astype(np.int64)
        ok = (p[:, 0] >= 0) & (p[:, 0] < w) & (p[:, 1] >= 0) & (p[:, 1] < h)
        rgb[p[ok, 1], p[ok, 0]] = (0, 0, 255)
    save_png(rgb, out / f"{stem}.reconstruct.boundary.png")
    info = {"fidelity": fid, "tips": int(len(tips)), "contour_pixels": res.contours.contour_count}
    write_json(info, out / f"{stem}.reconstruct.json")
    if s["debug"]:
        _debug(res, stem, s, out)
    return info


def _do_stats(path, stem, s, out):
    cfg = salience_config(s)
    res = pipeline.run(_load(path, s), cfg)
    stats = export_stats(res.graph, res.salience, res.contours, res.regions, None, res.skeleton)
    write_json(stats, out / f"{stem}.stats.json")
    if s["csv"]:
        write_branch_csv(res.branch_values, out / f"{stem}.branches.csv", cfg.measures)
    if s["debug"]:
        _debug(res, stem, s, out)
    return {"stats": stats}


HANDLERS = {
    "skeletonize": _do_skeletonize, "salience": _do_salience, "split": _do_split,
    "compose": _do_compose, "reconstruct": _do_reconstruct, "stats": _do_stats,
}


def process_image(task):
    """Run one command on one image; never raises."""
    command, path, stem, s = task
    try:
        info = HANDLERS[command](path, stem, s, Path(s["output"]))
        return {"name": stem, "input": path, "ok": True, **info}
    except Exception as exc:  # per-image isolation
        log.debug("%s", traceback.format_exc())
        return {"name": stem, "input": path, "ok": False,
                "error": f"{type(exc).__name__}: {exc}"}


def _init_worker(threads, level):
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        import numba
        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    except ImportError:
        pass


def run_batch(command, inputs, s):
    """Process every input; returns the per-image records sorted by name."""
    stems = image_stems(inputs)
    tasks = [(command, p, st, s) for p, st in zip(inputs, stems)]
    jobs = min(s["jobs"], len(tasks))
    if jobs <= 1:
        records = [process_image(t) for t in tasks]
    else:
        threads = max(1, (os.cpu_count() or 1) // jobs)
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(jobs, mp_context=ctx, initializer=_init_worker,
                                 initargs=(threads, log.getEffectiveLevel())) as pool:
            records = list(pool.map(process_image, tasks))
    return sorted(records, key=lambda r: r["name"])


def write_reports(command, records, s):
    out = Path(s["output"])
    report = [{k: v for k, v in r.items() if k != "stats"} for r in records]
    write_json({"command": command, "images": report}, out / f"{command}.report.json")
    stats = {r["name"]: r["stats"] for r in records if r["ok"] and "stats" in r}
    if stats:
        write_json(aggregate_stats(stats), out / f"{command}.aggregate.json")


# ---------------------------------------------------------------- argparse

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="medial-salience", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("inputs", nargs="+", help="image paths or glob patterns")
        c.add_argument("--tau", type=float, help="AOF threshold (default 0.25)")
        c.add_argument("--window", type=int, help="half-window K in branch points (default 5)")
        c.add_argument("--disk-radius", type=float, help="flux disk radius (default 1)")
        c.add_argument("--samples", type=int, help="flux samples per disk (default 60)")
        c.add_argument("--sigma", type=float, help="contour and branch smoothing (default 1)")
        c.add_argument("--radius-sigma", type=float, help="radius smoothing floor (default 3)")
        c.add_argument("--radius-scale", type=float,
                       help="radius smoothing per unit median radius (default 0.4)")
        c.add_argument("--measures", help="comma list of separation, ribbon, taper")
        c.add_argument("--channels", action="append",
                       help="three comma-separated channel tokens; repeatable")
        c.add_argument("--fraction", action="append", help="split fraction; repeatable")
        c.add_argument("--connectivity", type=int, choices=(4, 8))
        c.add_argument("--projection", choices=("spoke", "nearest"))
        c.add_argument("--frame", action="store_const", const=True,
                       help="treat the image border as a contour")
        c.add_argument("--jobs", type=int, help="worker processes (default 1)")
        c.add_argument("--debug", action="store_const", const=True,
                       help="also write AOF, distance, contours and timings")
        c.add_argument("--invert-polarity", action="store_const", const=True,
                       help="dark contours on white in composed and split images")
        c.add_argument("--bit-depth", type=int, choices=(8, 16))
        c.add_argument("--binarize", help="'adaptive' or a gray level")
        c.add_argument("--bright-contours", action="store_const", const=True,
                       help="input has light lines on a dark background")
        c.add_argument("--colormap", choices=("hot", "gray"))
        c.add_argument("--legend", action="store_const", const=True)
        c.add_argument("--csv", action="store_const", const=True,
                       help="write per-branch CSV tables")
        c.add_argument("--distance-scale", type=float, help="debug distance PNG scale")
        c.add_argument("--config", help="JSON or key = value config file")
        c.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV})")
        c.add_argument("--log-level", default="INFO")
    return p


def _flags(ns):
    skip = {"command", "inputs", "config", "log_level"}
    flags = {k: v for k, v in vars(ns).items() if k not in skip}
    if flags["channels"] is not None:
        flags["channels"] = [c for c in flags["channels"]]
    if flags["fraction"] is not None:
        flags["fraction"] = ",".join(flags["fraction"])
    return flags


def main(argv=None, environ=None):
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(level=ns.log_level.upper(), format="%(levelname)s %(message)s")
        s = resolve_settings(_flags(ns), ns.config, environ)
        validate_settings(s)
        inputs = expand_inputs(ns.inputs)
        image_stems(inputs)
        out = Path(s["output"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")
        write_json(echo_config(s, ns.command, inputs), out / f"{ns.command}.config.json")
    except ConfigError as exc:
        print(f"medial-salience: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"medial-salience: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    records = run_batch(ns.command, inputs, s)
    write_reports(ns.command, records, s)
    failed = [r for r in records if not r["ok"]]
    for r in failed:
        log.error("%s: %s", r["input"], r["error"])
    log.info("%s: %d of %d images done", ns.command, len(records) - len(failed), len(records))
    if not failed:
        return EXIT_OK
    return EXIT_FAILED if len(failed) == len(records) else EXIT_PARTIAL


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
