"""Command line entry point: solve, partition, bench, oracle."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import oracle, wasserstein
from .auction import AuctionError
from .driver import AccountingError, ConfigError, run
from .grid import GridError
from .shifts import GraphError, reconstruct_partition, raster_centers

log = logging.getLogger("boundary_ot")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

PALETTE = np.array([
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40), (148, 103, 189),
    (140, 86, 75), (227, 119, 194), (127, 127, 127), (188, 189, 34), (23, 190, 207),
    (174, 199, 232), (255, 187, 120), (152, 223, 138), (255, 152, 150), (197, 176, 213),
    (196, 156, 148), (247, 182, 210), (199, 199, 199), (219, 219, 141), (158, 218, 229),
    (57, 59, 121), (82, 84, 163), (107, 110, 207), (99, 121, 57), (140, 162, 82),
    (181, 207, 107), (140, 109, 49), (189, 158, 57), (231, 186, 82), (132, 60, 57),
    (173, 73, 74), (214, 97, 107),
], dtype=np.uint8)


def _reference(name):
    if name is None:
        return None
    return wasserstein.exact_reference(name)


def _overrides(args) -> dict:
    over = {}
    if getattr(args, "target_exp", None) is not None:
        over["grid"] = {"target_exp": args.target_exp}
    return over


def cmd_solve(args) -> int:
    runs = cfgmod.load_runs(args.config, _overrides(args))
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOError(str(exc)) from exc
    for nr in runs:
        res = run(nr.config)
        summary = cfgmod.summarize(res, nr.document, _reference(nr.reference), timings=args.timings)
        summary.write(out / f"{nr.name}.summary.json")
        if res.shifts is not None:
            with open(out / f"{nr.name}.shifts.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                d = nr.config.dim
                w.writerow(["i"] + [f"y{k}" for k in range(d)] + ["nu", "shift", "error"])
                w.writerows(res.shifts.to_rows(nr.config.targets, nr.config.weights))
        wass = summary.wasserstein
        msg = f"{nr.name}: levels={len(summary.iterations)}"
        if wass is not None:
            msg += f" P~*={wass['approx']:.12g} bound={wass['bound']:.3g}"
            if "error" in wass:
                msg += f" error={wass['error']:.3g}"
        print(msg)
    return EXIT_OK


def render(labels: np.ndarray, zero: np.ndarray | None = None) -> np.ndarray:
    """RGB image of a 2-D label raster; row 0 is the top (largest second coordinate)."""
    rgb = PALETTE[labels % len(PALETTE)]
    if zero is not None:
        rgb = np.where(zero[..., None], (rgb.astype(np.uint16) * 2 // 5 + 60).astype(np.uint8), rgb)
    return np.ascontiguousarray(np.transpose(rgb, (1, 0, 2))[::-1])


def write_ppm(path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.astype(np.uint8).tobytes())


def partition_images(res, resolution: int, shade_zero: bool = False) -> dict[str, np.ndarray]:
    """Images keyed by suffix: ``""`` in 2-D, ``"_z###"`` per slice in 3-D."""
    cfg = res.config
    labels = reconstruct_partition(res.shifts, cfg.cost, cfg.targets, resolution, cfg.side, cfg.dim)
    zero = None
    if shade_zero:
        pts = raster_centers(cfg.side, cfg.dim, resolution)
        zero = (cfg.density.pointwise(pts) <= 0).reshape(labels.shape)
    if cfg.dim == 2:
        return {"": render(labels, zero)}
    if cfg.dim == 3:
        return {f"_z{k:03d}": render(labels[:, :, k], None if zero is None else zero[:, :, k])
                for k in range(resolution)}
    raise ValueError("images are only produced for d = 2 or 3")


def cmd_partition(args) -> int:
    runs = cfgmod.load_runs(args.config, _overrides(args))
    image = Path(args.image)
    for nr in runs:
        res = run(nr.config)
        stem = image.with_suffix("")
        if len(runs) > 1:
            stem = stem.with_name(f"{stem.name}_{nr.name}")
        for suffix, rgb in partition_images(res, args.resolution, args.shade_zero).items():
            write_ppm(stem.with_name(stem.name + suffix).with_suffix(".ppm"), rgb)
        print(f"{nr.name}: wrote {stem}*.ppm")
    return EXIT_OK


def loglog_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``log y = log C + k log x``; returns ``(k, C, R^2)``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    k, c = np.polyfit(lx, ly, 1)
    resid = ly - (k * lx + c)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2) / ss) if ss > 0 else 1.0
    return float(k), float(np.exp(c)), r2


def parse_widths(text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",")]


def cmd_bench(args) -> int:
    nr = cfgmod.load_runs(args.config)[0]
    rows = []
    for m in parse_widths(args.widths):
        nr_m = cfgmod.load_runs(nr.document, {"grid": {"target_exp": m}})[0]
        times, peak = [], 0
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            res = run(nr_m.config)
            times.append(time.perf_counter() - t0)
            peak = max(s.active for s in res.stats)
        rows.append((2 ** m, nr_m.config.n, float(np.median(times)), peak))
        print(f"W=2^{m} N={nr_m.config.n} time={rows[-1][2]:.3f}s peak_boxes={peak}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{nr.name}.bench.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["W", "N", "time", "peak_boxes"])
        w.writerows(rows)
    fits = {}
    if len(rows) >= 2:
        W = [r[0] for r in rows]
        for key, col in (("time", 2), ("storage", 3)):
            k, c, r2 = loglog_fit(W, [r[col] for r in rows])
            fits[key] = {"exponent": k, "constant": c, "r2": r2}
            print(f"{key}: exponent={k:.3f} R^2={r2:.4f}")
    (out / f"{nr.name}.bench.json").write_text(json.dumps(fits, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    for nr in cfgmod.load_runs(args.config):
        c = nr.config
        val, psi = oracle.semi_discrete_cost(c.cost, c.density, c.targets, c.weights, args.depth)
        line = f"{nr.name}: P*~{val:.12g} (midpoint dual, depth {args.depth})"
        if nr.reference:
            line += f" exact={_reference(nr.reference):.16g}"
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boundary-ot", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="run the boundary method and write a summary")
    s.add_argument("--config", required=True, help="config path or bundled name")
    s.add_argument("--out", default="out")
    s.add_argument("--target-exp", type=int)
    s.add_argument("--timings", action="store_true", help="include wall times in the summary")
    s.set_defaults(func=cmd_solve)

    p = sub.add_parser("partition", parents=[common], help="write the shift-characterized partition as P6 images")
    p.add_argument("--config", required=True)
    p.add_argument("--image", default="partition.ppm")
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--target-exp", type=int)
    p.add_argument("--shade-zero", action="store_true")
    p.set_defaults(func=cmd_partition)

    b = sub.add_parser("bench", parents=[common], help="time the method across target widths")
    b.add_argument("--config", default="five_point")
    b.add_argument("--widths", default="9..12", help="exponents, e.g. 9..12 or 9,10")
    b.add_argument("--repeats", type=int, default=1)
    b.add_argument("--out", default="bench")
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("oracle", parents=[common], help="independent estimate of the optimal cost")
    o.add_argument("--config", required=True)
    o.add_argument("--depth", type=int, default=10)
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: config: threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    # kernels are serial, so results cannot depend on the thread count
    try:
        return args.func(args)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"error: config: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except (GraphError, AccountingError, AuctionError, GridError, FloatingPointError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
