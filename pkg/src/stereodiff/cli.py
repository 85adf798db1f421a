"""Command-line interface.

Subcommands: ``demo`` (synthetic suite comparison), ``run`` (full pipeline
on files or a suite), ``eval`` (metrics between two disparity files),
``probe-entropy`` (per-step filter entropy at chosen pixels) and ``gen``
(write a synthetic suite to disk). Every matcher and sampler knob is a
flag so ablations are scriptable.

Exit codes: 0 success, 1 usage error, 2 data error. Errors go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio, reporting
from .datagen import SceneSpec, default_suite, gen_stereogram
from .matcher import ImagePair, MatcherConfig
from .metrics import evaluate
from .pipeline import run_pair, run_scene, run_suite
from .sampler import RenewalPolicy, SamplerConfig

__all__ = ["main"]


class UsageError(Exception):
    """Bad command line; exits with status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _add_matcher_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("matcher")
    group.add_argument("--max-disp", type=int, default=None, help="disparity search range")
    group.add_argument("--downsample", type=int, choices=(1, 4), default=None)
    group.add_argument("--census", type=int, default=None, help="feature window radius")
    group.add_argument("--groups", type=int, default=None, help="correlation groups")
    group.add_argument("--agg-radius", type=int, default=None, help="aggregation window radius")
    group.add_argument("--temp", type=float, default=None, help="softmax temperature")


def _add_sampler_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("sampler")
    group.add_argument("--timesteps", type=int, default=None, help="diffusion timesteps T")
    group.add_argument("--steps", type=int, default=None, help="sampling steps")
    group.add_argument("--eta", type=float, default=None, help="DDIM noise coefficient")
    group.add_argument("--seed", type=int, default=None)
    group.add_argument("--weights", type=str, default=None, help="comma list, steps + 1 entries")
    group.add_argument("--renewal", choices=("on", "off"), default=None)
    group.add_argument("--disp-threshold", type=float, default=None, help="renewal outlier threshold [px]")
    group.add_argument("--entropy-threshold", type=float, default=None, help="renewal uncertainty threshold [nats]")
    group.add_argument("--embedding", choices=("zero", "sinusoidal"), default=None)


MATCHER_DEFAULTS = {
    "max_disp": 64,
    "downsample": 1,
    "census": 3,
    "groups": 7,
    "agg_radius": 2,
    "temp": MatcherConfig.temperature,
}

SAMPLER_DEFAULTS = {
    "timesteps": 1000,
    "steps": 5,
    "eta": 0.0,
    "seed": 0,
    "weights": None,
    "renewal": "on",
    "disp_threshold": 1.0,
    "entropy_threshold": None,
    "embedding": "zero",
}


def _resolve(args: argparse.Namespace, key: str, config: dict, defaults: dict):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return defaults[key]


def _matcher_config(args: argparse.Namespace, config: dict, max_disp_fallback: int | None = None) -> MatcherConfig:
    defaults = dict(MATCHER_DEFAULTS)
    if max_disp_fallback is not None:
        defaults["max_disp"] = max_disp_fallback
    try:
        return MatcherConfig(
            max_disparity=_resolve(args, "max_disp", config, defaults),
            downsample=_resolve(args, "downsample", config, defaults),
            census_radius=_resolve(args, "census", config, defaults),
            groups=_resolve(args, "groups", config, defaults),
            agg_radius=_resolve(args, "agg_radius", config, defaults),
            temperature=_resolve(args, "temp", config, defaults),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_weights(raw) -> tuple[float, ...] | None:
    if raw is None:
        return None
    if isinstance(raw, (list, tuple)):
        return tuple(float(x) for x in raw)
    try:
        return tuple(float(x) for x in str(raw).split(","))
    except ValueError as exc:
        raise UsageError(f"bad weight list {raw!r}") from exc


def _sampler_config(args: argparse.Namespace, config: dict) -> SamplerConfig:
    try:
        policy = RenewalPolicy(
            disparity_threshold=_resolve(args, "disp_threshold", config, SAMPLER_DEFAULTS),
            entropy_threshold=_resolve(args, "entropy_threshold", config, SAMPLER_DEFAULTS),
            enabled=_resolve(args, "renewal", config, SAMPLER_DEFAULTS) == "on",
        )
        return SamplerConfig(
            total_timesteps=_resolve(args, "timesteps", config, SAMPLER_DEFAULTS),
            steps=_resolve(args, "steps", config, SAMPLER_DEFAULTS),
            eta=_resolve(args, "eta", config, SAMPLER_DEFAULTS),
            weights=_parse_weights(_resolve(args, "weights", config, SAMPLER_DEFAULTS)),
            renewal=policy,
            seed=_resolve(args, "seed", config, SAMPLER_DEFAULTS),
            time_embedding_mode=_resolve(args, "embedding", config, SAMPLER_DEFAULTS),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_suite(path: str | Path) -> list[SceneSpec]:
    with open(path) as handle:
        data = json.load(handle)
    scenes = data["scenes"] if isinstance(data, dict) else data
    return [SceneSpec.from_dict(s) for s in scenes]


def _write_suite_outputs(runs, out: Path, figures: bool, save_maps: bool, save_trace: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    header, rows = reporting.suite_table(runs)
    reporting.write_csv(out / "report.csv", header, rows)
    (out / "report.txt").write_text(reporting.format_table(header, rows) + "\n")
    if save_trace:
        trace_rows = [
            [str(i), str(step + 1), f"{value:.6f}"]
            for i, run in enumerate(runs)
            for step, value in enumerate(run.output.entropy_trace)
        ]
        reporting.write_csv(out / "entropy_trace.csv", ["scene", "step", "mean_entropy"], trace_rows)
    if figures:
        reporting.save_epe_figure(out / "epe.png", runs)
        reporting.save_entropy_figure(
            out / "entropy.png",
            [run.output.entropy_trace for run in runs],
        )
    if save_maps:
        for i, run in enumerate(runs):
            max_disp = run.base_volume.shape[1]
            stem = out / f"scene_{i:02d}"
            stem.mkdir(exist_ok=True)
            fileio.write_pfm(stem / "baseline.pfm", run.baseline.values)
            fileio.write_pfm(stem / "final.pfm", run.output.integrated.values)
            fileio.write_disparity_png(stem / "baseline.png", run.baseline.values, max_disp)
            fileio.write_disparity_png(stem / "final.png", run.output.integrated.values, max_disp)
            if run.gt is not None:
                gt_values = np.where(run.gt.mask, run.gt.values, np.inf)
                fileio.write_pfm(stem / "gt.pfm", gt_values)
                fileio.write_disparity_png(stem / "gt.png", run.gt.values, max_disp, mask=run.gt.mask)


def _cmd_demo(args: argparse.Namespace) -> int:
    suite = default_suite()
    if args.scenes is not None:
        if args.scenes < 1:
            raise UsageError("--scenes must be >= 1")
        suite = suite[: args.scenes]
    matcher_config = _matcher_config(args, {}, max_disp_fallback=suite[0].max_disparity)
    sampler_config = _sampler_config(args, {})
    runs = run_suite(suite, matcher_config, sampler_config)
    header, rows = reporting.suite_table(runs)
    print(format_header(matcher_config, sampler_config))
    print(reporting.format_table(header, rows))
    if args.out:
        _write_suite_outputs(runs, Path(args.out), args.figures, True, True)
    return 0


def format_header(matcher_config: MatcherConfig, sampler_config: SamplerConfig) -> str:
    grid = ",".join(str(t) for t in sampler_config.timestep_grid())
    weights = ",".join(f"{w:g}" for w in sampler_config.integration_weights())
    return (
        f"matcher: D={matcher_config.max_disparity} f={matcher_config.downsample} "
        f"census={matcher_config.census_radius} groups={matcher_config.groups} "
        f"agg={matcher_config.agg_radius} temp={matcher_config.temperature:g}\n"
        f"sampler: T={sampler_config.total_timesteps} grid=[{grid}] eta={sampler_config.eta:g} "
        f"weights=[{weights}] renewal={'on' if sampler_config.renewal.enabled else 'off'} "
        f"seed={sampler_config.seed}"
    )


def _cmd_run(args: argparse.Namespace) -> int:
    config: dict = {}
    if args.config:
        with open(args.config) as handle:
            config = json.load(handle)
        if not isinstance(config, dict):
            raise UsageError("config file must hold a flat JSON object")
    left = args.left or config.get("left")
    right = args.right or config.get("right")
    gt_path = args.gt or config.get("gt")
    suite_path = args.suite or config.get("suite")
    out = args.out or config.get("out")
    if (left is None) != (right is None):
        raise UsageError("--left and --right must be given together")
    if (left is None) == (suite_path is None):
        raise UsageError("give exactly one input source: --left/--right or --suite")
    if out is None:
        raise UsageError("--out is required")
    out_dir = Path(out)
    sampler_config = _sampler_config(args, config)

    if suite_path is not None:
        suite = _load_suite(suite_path)
        matcher_config = _matcher_config(args, config, max_disp_fallback=suite[0].max_disparity)
        runs = run_suite(suite, matcher_config, sampler_config)
        _write_suite_outputs(runs, out_dir, args.figures, args.save_maps, True)
        header, rows = reporting.suite_table(runs)
        print(reporting.format_table(header, rows))
        return 0

    matcher_config = _matcher_config(args, config)
    pair = ImagePair(fileio.read_intensity(left), fileio.read_intensity(right))
    gt = None
    if gt_path is not None:
        from .volume import DisparityMap

        values, mask = fileio.read_disparity(gt_path)
        in_range = mask & (values >= 0) & (values <= matcher_config.max_disparity - 1)
        gt = DisparityMap(np.where(in_range, values, 0.0), in_range)
    run = run_pair(pair, matcher_config, sampler_config, gt=gt)
    out_dir.mkdir(parents=True, exist_ok=True)
    fileio.write_pfm(out_dir / "baseline.pfm", run.baseline.values)
    fileio.write_pfm(out_dir / "final.pfm", run.output.integrated.values)
    if args.save_maps:
        fileio.write_disparity_png(
            out_dir / "baseline.png", run.baseline.values, matcher_config.levels
        )
        fileio.write_disparity_png(
            out_dir / "final.png", run.output.integrated.values, matcher_config.levels
        )
    trace_rows = [[str(s + 1), f"{v:.6f}"] for s, v in enumerate(run.output.entropy_trace)]
    reporting.write_csv(out_dir / "entropy_trace.csv", ["step", "mean_entropy"], trace_rows)
    if args.figures:
        reporting.save_entropy_figure(out_dir / "entropy.png", [run.output.entropy_trace])
    if run.final_report is not None:
        report_text = "baseline:\n" + run.baseline_report.to_text() + "\nfinal:\n" + run.final_report.to_text()
        (out_dir / "metrics.txt").write_text(report_text + "\n")
        print(report_text)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    pred, pred_mask = fileio.read_disparity(args.pred)
    gt, gt_mask = fileio.read_disparity(args.gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: prediction {pred.shape} vs ground truth {gt.shape}")
    mask = pred_mask & gt_mask
    report = evaluate(pred, gt, mask)
    print(report.to_text())
    return 0


def _parse_pixels(raw: str) -> list[tuple[int, int]]:
    pixels = []
    for chunk in raw.split(";"):
        parts = chunk.split(",")
        if len(parts) != 2:
            raise UsageError(f"bad pixel {chunk!r}, expected x,y")
        try:
            pixels.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise UsageError(f"bad pixel {chunk!r}") from exc
    return pixels


def _cmd_probe(args: argparse.Namespace) -> int:
    pixels = _parse_pixels(args.pixels)
    suite = default_suite()
    if not 0 <= args.scene < len(suite):
        raise UsageError(f"--scene must lie in 0..{len(suite) - 1}")
    spec = suite[args.scene]
    matcher_config = _matcher_config(args, {}, max_disp_fallback=spec.max_disparity)
    sampler_config = _sampler_config(args, {})
    run = run_scene(spec, matcher_config, sampler_config, keep_snapshots=True)
    snapshots = run.output.snapshots
    grid = list(sampler_config.timestep_grid())

    from .volume import signed_volume_entropy

    entropy_maps = [signed_volume_entropy(dv) for dv in snapshots]
    height, width = entropy_maps[0].shape
    rows = []
    for x, y in pixels:
        if not (0 <= x < width and 0 <= y < height):
            raise ValueError(f"pixel ({x}, {y}) outside the {width}x{height} frame")
        for step, (t, emap) in enumerate(zip(grid, entropy_maps), start=1):
            rows.append([str(x), str(y), str(step), str(t), f"{emap[y, x]:.6f}"])
    header = ["x", "y", "step", "t", "entropy"]
    print(reporting.format_table(header, rows))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        reporting.write_csv(out_dir / "probe.csv", header, rows)
        traces, labels = [], []
        for x, y in pixels:
            traces.append([float(emap[y, x]) for emap in entropy_maps])
            labels.append(f"({x},{y})")
        reporting.save_entropy_figure(out_dir / "probe_trace.png", traces, labels)
        for x, y in pixels:
            reporting.save_probe_figure(
                out_dir / f"probe_{x}_{y}.png", snapshots, (x, y), grid
            )
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    suite = default_suite()
    if args.count is not None:
        if args.count < 1:
            raise UsageError("--count must be >= 1")
        suite = suite[: args.count]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, spec in enumerate(suite):
        pair, gt = gen_stereogram(spec)
        scene_dir = out_dir / f"scene_{i:02d}"
        scene_dir.mkdir(exist_ok=True)
        fileio.write_pgm(scene_dir / "left.pgm", pair.left)
        fileio.write_pgm(scene_dir / "right.pgm", pair.right)
        fileio.write_pfm(scene_dir / "gt.pfm", np.where(gt.mask, gt.values, np.inf))
        (scene_dir / "scene.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
        manifest.append(spec.to_dict())
    (out_dir / "suite.json").write_text(json.dumps({"scenes": manifest}, indent=2) + "\n")
    print(f"wrote {len(suite)} scenes to {out_dir}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="stereodiff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    demo = sub.add_parser("demo", help="run the synthetic suite and compare against the baseline")
    demo.add_argument("--out", type=str, default=None, help="directory for reports and figures")
    demo.add_argument("--scenes", type=int, default=None, help="restrict to the first N scenes")
    demo.add_argument("--no-figures", dest="figures", action="store_false")
    _add_matcher_flags(demo)
    _add_sampler_flags(demo)
    demo.set_defaults(func=_cmd_demo)

    run = sub.add_parser("run", help="run the pipeline on an image pair or a suite file")
    run.add_argument("--left", type=str, default=None)
    run.add_argument("--right", type=str, default=None)
    run.add_argument("--gt", type=str, default=None, help="ground-truth PFM for metrics")
    run.add_argument("--suite", type=str, default=None, help="suite JSON written by gen")
    run.add_argument("--config", type=str, default=None, help="flat JSON config file")
    run.add_argument("--out", type=str, default=None)
    run.add_argument("--no-maps", dest="save_maps", action="store_false")
    run.add_argument("--no-figures", dest="figures", action="store_false")
    _add_matcher_flags(run)
    _add_sampler_flags(run)
    run.set_defaults(func=_cmd_run)

    ev = sub.add_parser("eval", help="metrics between two disparity PFM files")
    ev.add_argument("pred", type=str)
    ev.add_argument("gt", type=str)
    ev.set_defaults(func=_cmd_eval)

    probe = sub.add_parser("probe-entropy", help="per-step filter entropy at given pixels")
    probe.add_argument("--pixels", type=str, required=True, help="semicolon list of x,y pairs")
    probe.add_argument("--scene", type=int, default=0, help="default suite scene index")
    probe.add_argument("--out", type=str, default=None)
    _add_matcher_flags(probe)
    _add_sampler_flags(probe)
    probe.set_defaults(func=_cmd_probe)

    gen = sub.add_parser("gen", help="write the synthetic suite to disk")
    gen.add_argument("--out", type=str, required=True)
    gen.add_argument("--count", type=int, default=None)
    gen.set_defaults(func=_cmd_gen)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (fileio.FileFormatError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
