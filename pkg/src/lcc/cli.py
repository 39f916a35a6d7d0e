"""Command line entry point ``lcc``.

Subcommands::

    lcc lift IMAGE                 orientation score and vesselness volumes
    lcc components IMAGE           full pipeline, labels projected to the image
    lcc pc-components CLOUD.csv    delta-connected components of a point cloud
    lcc persistence INPUT          component counts over a range of delta
    lcc affinity LABELS DATA       affinity matrix and merged labels
    lcc distance G H               distance and log coordinates of h^-1 g

Settings come from the built-in defaults, then ``--config``, then the flags.
Exit codes: 0 ok, 2 bad input, 3 inconsistent inputs, 4 degenerate data.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as lio
from .affinity import affinity_matrix, group_by_threshold, min_affinity_time
from .components import CCParams, ComponentLabeling, find_all_components
from .config import RunConfig, parse_periodicity, periodicity_name
from .errors import ConsistencyError, InvalidArgumentError, LCCError
from .geometry import (
    SE2,
    SO3,
    TWO_PI,
    LogCoords,
    MetricWeights,
    exp_so3,
    log_norm_distance,
    relative_log,
)
from .lifting import filter_small, lift, preprocess, project_max, run_pipeline, vesselness
from .morphology import PointCloud
from .persistence import sweep, suggest_delta, write_outputs

THREADS_ENV = "LCC_THREADS"


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML or JSON run configuration")
    parser.add_argument("--delta", type=float, help="connectivity scale delta")
    parser.add_argument("--weights", help="metric weights w1,w2,w3 for this command's main stage")
    parser.add_argument("--alpha", type=float, help="kernel exponent for this command's main stage")
    parser.add_argument("--orientations", type=int, help="number of orientation layers")
    parser.add_argument("--periodicity", choices=["pi", "2pi"], help="period of the orientation axis")
    parser.add_argument("--mode", choices=["image", "cloud"], default="image")
    parser.add_argument("--output-dir", default=".", help="directory for all outputs")
    parser.add_argument("--threads", type=int, default=1, help=f"worker threads ({THREADS_ENV} overrides)")
    parser.add_argument("--min-component-size", type=int, help="drop smaller components")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lcc", description="delta-connected components on SE(2) and SO(3)")
    p.add_argument("--version", action="version", version=f"lcc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("lift", help="write orientation score and vesselness volumes")
    s.add_argument("input")
    _common(s)

    s = sub.add_parser("components", help="label delta-connected components of an image or cloud")
    s.add_argument("input")
    _common(s)

    s = sub.add_parser("pc-components", help="label delta-connected components of a point cloud CSV")
    s.add_argument("input")
    _common(s)

    s = sub.add_parser("persistence", help="sweep delta and record component counts")
    s.add_argument("input")
    s.add_argument("--delta-min", type=float, required=True)
    s.add_argument("--delta-max", type=float, required=True)
    s.add_argument("--steps", type=int, default=20)
    s.add_argument("--spacing", choices=["linear", "geometric", "exact"], default="linear")
    _common(s)

    s = sub.add_parser("affinity", help="affinity matrix between labeled components")
    s.add_argument("labels", help="labels.lccv (image mode) or labels.csv (cloud mode)")
    s.add_argument("data", help="vessel.lccv (image mode) or the cloud CSV (cloud mode)")
    s.add_argument("--t", type=float, help="dilation time (default: the minimum time)")
    s.add_argument("--p", type=float, help="power-mean exponent")
    s.add_argument("--T", type=float, help="merge threshold in (0, 1)")
    _common(s)

    s = sub.add_parser("distance", help="print d(g, h) and log(h^-1 g)")
    s.add_argument("g", help="x,y,theta for SE2; rotation vector or 9 matrix entries for SO3")
    s.add_argument("h")
    s.add_argument("--group", choices=["se2", "so3"], default="se2")
    _common(s)
    return p


def resolve_threads(args) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is not None and raw.strip():
        try:
            n = int(raw)
        except ValueError as exc:
            raise InvalidArgumentError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    else:
        n = args.threads
    if n < 1:
        raise InvalidArgumentError("thread count must be >= 1")
    return n


def resolve_config(args) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    cmd = args.command
    if args.orientations is not None:
        cfg = cfg.with_stage("lift", n_orientations=args.orientations)
    if args.periodicity is not None:
        cfg = cfg.with_stage("lift", periodicity=args.periodicity)
    if args.delta is not None:
        cfg = cfg.with_stage("components", delta=args.delta)
    if args.min_component_size is not None:
        cfg = cfg.with_stage("components", min_component_size=args.min_component_size)
    if args.weights is not None:
        stage = "affinity" if cmd == "affinity" else "components"
        cfg = cfg.with_stage(stage, weights=MetricWeights.parse(args.weights))
    if args.alpha is not None:
        if cmd == "affinity":
            cfg = cfg.with_stage("affinity", alpha=args.alpha)
        elif cmd == "pc-components" or (cmd in ("components", "persistence") and args.mode == "cloud"):
            cfg = cfg.with_stage("components", alpha=args.alpha)
        else:
            # image runs: the only free exponent is the directional dilation's
            cfg = cfg.with_stage("dilation", alpha=args.alpha)
    if cmd == "affinity":
        changes = {k: v for k, v in (("t", args.t), ("p", args.p), ("T", args.T)) if v is not None}
        if changes:
            cfg = cfg.with_stage("affinity", **changes)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidArgumentError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _cloud_period(args) -> float:
    return parse_periodicity(args.periodicity) if args.periodicity else TWO_PI


def _load_cloud(args, weights: MetricWeights):
    pts, values = lio.read_cloud_csv(args.input)
    cloud = PointCloud(pts, weights, _cloud_period(args))
    return cloud, values


def _manifest(args, cfg: RunConfig, **extra) -> dict:
    m = {
        "command": args.command,
        "mode": args.mode,
        "version": __version__,
        "config": cfg.to_dict(),
    }
    m.update(extra)
    return m


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_lift(args, cfg: RunConfig, threads: int) -> int:
    if args.mode != "image":
        raise InvalidArgumentError("lift works on images only")
    img = lio.read_image(args.input)
    out = _out_dir(args)
    score = lift(img, cfg, threads)
    V = vesselness(score, cfg.lift.smoothing_sigma, cfg.lift.polarity)
    lio.write_volume(out / "score.lccv", score)
    lio.write_volume(out / "vessel.lccv", V)
    nx, ny, nt = score.dims
    lio.write_manifest(
        out / "manifest.json",
        _manifest(
            args, cfg, input=args.input, dims=[nx, ny, nt],
            outputs={"score": "score.lccv", "vessel": "vessel.lccv"},
        ),
    )
    print(f"lifted {nx}x{ny} image to {nt} orientations")
    return 0


def cmd_components(args, cfg: RunConfig, threads: int) -> int:
    if args.mode == "cloud":
        return cmd_pc_components(args, cfg, threads)
    img = lio.read_image(args.input)
    if cfg.components.delta is None:
        raise InvalidArgumentError("components needs --delta or [components] delta in the config")
    out = _out_dir(args)
    res = run_pipeline(img, cfg, threads)
    lab = res.labeling
    lio.write_label_png(out / "labels.png", res.projection)
    lio.write_label_csv(out / "labels.csv", lab, res.indicator)
    lio.write_volume(out / "labels.lccv", res.indicator.like(lab.labels.astype(np.float32)))
    lio.write_volume(out / "vessel.lccv", res.vessel)
    lio.write_manifest(
        out / "manifest.json",
        _manifest(
            args, cfg, input=args.input,
            results={"components": lab.K, "sizes": lab.sizes(), "iterations": lab.iterations},
            outputs={
                "labels_png": "labels.png", "labels_csv": "labels.csv",
                "labels_volume": "labels.lccv", "vessel": "vessel.lccv",
            },
        ),
    )
    print(f"{lab.K} components")
    return 0


def cmd_pc_components(args, cfg: RunConfig, threads: int) -> int:
    cc = cfg.components
    if cc.delta is None:
        raise InvalidArgumentError("pc-components needs --delta or [components] delta in the config")
    cloud, values = _load_cloud(args, cc.weights)
    out = _out_dir(args)
    indicator = np.ones(len(cloud), bool) if values is None else values > 0
    lab = find_all_components((indicator, cloud), CCParams(cc.delta, cc.weights))
    lab = filter_small(lab, cc.min_component_size)
    lio.write_cloud_labels_csv(out / "labels.csv", lab.labels)
    lio.write_manifest(
        out / "manifest.json",
        _manifest(
            args, cfg, input=args.input, group=cloud.group, n_points=len(cloud),
            cloud_periodicity=periodicity_name(cloud.period),
            results={"components": lab.K, "sizes": lab.sizes(), "seeds": lab.seeds, "iterations": lab.iterations},
            outputs={"labels_csv": "labels.csv"},
        ),
    )
    print(f"{lab.K} components")
    return 0


def cmd_persistence(args, cfg: RunConfig, threads: int) -> int:
    cc = cfg.components
    if args.mode == "cloud":
        cloud, values = _load_cloud(args, cc.weights)
        indicator = np.ones(len(cloud), bool) if values is None else values > 0
        target = (indicator, cloud)
        extra = {"group": cloud.group, "cloud_periodicity": periodicity_name(cloud.period)}
    else:
        img = lio.read_image(args.input)
        target = preprocess(img, cfg, threads)["indicator"]
        extra = {}
    out = _out_dir(args)
    d = sweep(target, cc.weights, args.delta_min, args.delta_max, args.steps, args.spacing)
    paths = write_outputs(d, out)
    suggestion = suggest_delta(d)
    lio.write_manifest(
        out / "manifest.json",
        _manifest(
            args, cfg, input=args.input,
            sweep={"delta_min": args.delta_min, "delta_max": args.delta_max, "steps": args.steps,
                   "spacing": args.spacing},
            results={"plateaus": [list(p) for p in d.plateaus], "suggested_delta": suggestion},
            outputs={k: Path(v).name for k, v in paths.items()},
            **extra,
        ),
    )
    print("suggested delta: " + ("none" if suggestion is None else repr(suggestion)))
    return 0


def _labeling_from(labels: np.ndarray) -> ComponentLabeling:
    flat = labels.ravel()
    K = int(flat.max(initial=0))
    seeds = []
    for k in range(1, K + 1):
        idx = np.flatnonzero(flat == k)
        seeds.append(int(idx[0]) if idx.size else -1)
    return ComponentLabeling(labels, seeds, [])


def cmd_affinity(args, cfg: RunConfig, threads: int) -> int:
    ac = cfg.affinity
    if args.mode == "cloud":
        labels = lio.read_cloud_labels_csv(args.labels)
        pts, values = lio.read_cloud_csv(args.data)
        if len(pts) != labels.size:
            raise ConsistencyError(f"{labels.size} labels for {len(pts)} points")
        domain = PointCloud(pts, ac.weights, _cloud_period(args))
        D = np.ones(len(pts)) if values is None else values
    else:
        lv = lio.read_volume(args.labels)
        domain = lio.read_volume(args.data)
        if lv.data.shape != domain.data.shape or lv.spacing != domain.spacing or lv.period != domain.period:
            raise ConsistencyError(
                f"label volume {lv.data.shape} does not match data volume {domain.data.shape}"
            )
        labels = np.asarray(lv.data, dtype=float)
        if np.any(labels < 0) or np.any(labels != np.round(labels)):
            raise InvalidArgumentError("label volume must hold non-negative integers")
        labels = labels.astype(np.int32)
        D = np.asarray(domain.data, dtype=float)
    labeling = _labeling_from(labels)
    if labeling.K == 0:
        raise InvalidArgumentError("no labeled components")
    t_min = min_affinity_time(domain, ac.alpha, ac.weights)
    t = t_min if ac.t is None else ac.t
    below = t < t_min
    if below:
        msg = f"t = {t!r} is below the minimum time {t_min!r}; some affinities may be zero"
        warnings.warn(msg)
    out = _out_dir(args)
    A = affinity_matrix(labeling, domain, D, t, ac.alpha, ac.p, ac.weights)
    merged = group_by_threshold(A, labeling, ac.T)
    lio.write_matrix_csv(out / "affinity.csv", A.a, A.component_ids)
    outputs = {"affinity": "affinity.csv"}
    if args.mode == "cloud":
        lio.write_cloud_labels_csv(out / "merged_labels.csv", merged.labels)
        outputs["merged_labels"] = "merged_labels.csv"
    else:
        lio.write_label_png(out / "merged.png", project_max(merged.labels))
        lio.write_volume(out / "merged_labels.lccv", domain.like(merged.labels.astype(np.float32)))
        outputs.update(merged_png="merged.png", merged_volume="merged_labels.lccv")
    lio.write_manifest(
        out / "manifest.json",
        _manifest(
            args, cfg, labels=args.labels, data=args.data,
            affinity={"t": t, "t_min": t_min, "t_below_min": below, "alpha": ac.alpha, "p": ac.p, "T": ac.T},
            results={"components": labeling.K, "merged_components": merged.K},
            outputs=outputs,
        ),
    )
    print(f"{labeling.K} components merged into {merged.K}")
    return 0


def _parse_numbers(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InvalidArgumentError(f"expected comma separated numbers, got {text!r}") from exc


def _element(text: str, group: str, period: float):
    vals = _parse_numbers(text)
    if group == "se2":
        if len(vals) != 3:
            raise InvalidArgumentError("an SE(2) element is x,y,theta")
        return SE2(*vals, period=period)
    if len(vals) == 3:
        return exp_so3(LogCoords(*vals))
    if len(vals) == 9:
        return SO3(np.array(vals).reshape(3, 3))
    raise InvalidArgumentError("an SO(3) element is a rotation vector (3 values) or a matrix (9 values)")


def cmd_distance(args, cfg: RunConfig, threads: int) -> int:
    w = MetricWeights.parse(args.weights) if args.weights else MetricWeights()
    period = _cloud_period(args)
    g = _element(args.g, args.group, period)
    h = _element(args.h, args.group, period)
    c = relative_log(g, h)
    print(f"distance {log_norm_distance(g, h, w)!r}")
    print(f"log {c.c1!r} {c.c2!r} {c.c3!r}")
    return 0


COMMANDS = {
    "lift": cmd_lift,
    "components": cmd_components,
    "pc-components": cmd_pc_components,
    "persistence": cmd_persistence,
    "affinity": cmd_affinity,
    "distance": cmd_distance,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, matching the input-error code
        return int(exc.code or 0)
    try:
        threads = resolve_threads(args)
        cfg = resolve_config(args)
        if args.command == "pc-components":
            args.mode = "cloud"
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = COMMANDS[args.command](args, cfg, threads)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return code
    except LCCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
