"""Command-line surface tying the modules into runnable experiments.

Exit codes: 0 success, 1 validation/usage error, 2 I/O or file-format
error. Every command accepts --config FILE with line-oriented `key = value`
entries (flag names with underscores); explicit flags override file values,
and every run writes a manifest with resolved settings and artifact
checksums.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import RunManifest, coerce_like, read_config
from .fileio import FileFormatError, read_flo, read_image, write_flo, write_image
from .losses import LossWeights
from .multigrid import (
    PyramidConfig,
    SolverOptions,
    coarse_to_fine,
    long_range_flow,
    network_pair_predictor,
    solve_direct,
)
from .tracker import (
    JointMap,
    MaskStack,
    TrackerConfig,
    detect_shots,
    eval_boundary_f,
    eval_jaccard,
    eval_pck,
    masks_from_label_image,
    propagate_masks,
    propagate_pose,
    recon_l1,
)

FRAME_PATTERNS = ("*.png", "*.pgm")


def _add_pyramid_flags(p, levels=3, kernel=7):
    p.add_argument("--levels", type=int, default=levels, help="pyramid scales")
    p.add_argument("--kernel", type=int, default=kernel, help="per-scale kernel size")


def _add_weight_flags(p):
    p.add_argument("--lambda-fl", type=float, default=1.0)
    p.add_argument("--lambda-fb", type=float, default=0.1)
    p.add_argument("--lambda-sm", type=float, default=0.01)
    p.add_argument("--lambda-sp", type=float, default=0.001)


def _add_solver_flags(p):
    p.add_argument("--iters", type=int, default=500, help="ADAM steps per scale")
    p.add_argument("--solver-lr", type=float, default=0.05)
    p.add_argument("--budget", type=int, default=2_000_000)
    p.add_argument("--checkpoint", default=None,
                   help="use a trained model instead of the direct solver")


def _weights(args) -> LossWeights:
    return LossWeights(args.lambda_fl, args.lambda_fb, args.lambda_sm, args.lambda_sp)


def _pyramid(args) -> PyramidConfig:
    return PyramidConfig(levels=args.levels, k=args.kernel)


def _solver_options(args) -> SolverOptions:
    return SolverOptions(iterations=args.iters, lr=args.solver_lr, budget=args.budget)


def _result_fn(args):
    """(src, tgt) -> MultigridResult via solver or checkpoint."""
    pyr = _pyramid(args)
    weights = _weights(args)
    if args.checkpoint:
        from .fileio import load_checkpoint

        params, net_cfg = load_checkpoint(args.checkpoint)
        if net_cfg.k != pyr.k:
            raise ValueError(
                f"checkpoint predicts k={net_cfg.k} filters but --kernel is {pyr.k}"
            )
        predict = network_pair_predictor(params, net_cfg)
        return lambda a, b: coarse_to_fine(predict, a, b, pyr, weights)
    opts = _solver_options(args)
    return lambda a, b: solve_direct(a, b, pyr, opts, weights)


def _cached_pair_flow(result_fn, frames):
    ids = {id(f): i for i, f in enumerate(frames)}
    cache: dict = {}

    def flow_fn(a, b):
        key = (ids.get(id(a)), ids.get(id(b)))
        if key in cache:
            return cache[key]
        flow = result_fn(a, b).cropped_flow
        if key != (None, None):
            cache[key] = flow
        return flow

    return flow_fn


def _load_frames(dir_path) -> tuple[list[np.ndarray], list[Path]]:
    d = Path(dir_path)
    paths = sorted(p for pat in FRAME_PATTERNS for p in d.glob(pat))
    paths = sorted(set(paths))
    if not paths:
        raise FileNotFoundError(f"no frames (*.png, *.pgm) found in {d}")
    return [read_image(p) for p in paths], paths


def _export_result(res, out: Path, manifest: RunManifest, tgt=None):
    from .fields import filters_to_flow

    out.mkdir(parents=True, exist_ok=True)
    flow_path = out / "flow.flo"
    write_flo(res.cropped_flow, flow_path)
    manifest.record_artifact(flow_path)
    recon_path = out / "recon.png"
    write_image(res.recon, recon_path)
    manifest.record_artifact(recon_path)
    for field, recon in zip(res.fields, res.scale_recons):
        p = out / f"scale_{field.scale_index}.flo"
        write_flo(filters_to_flow(field), p)
        manifest.record_artifact(p)
        rp = out / f"recon_scale_{field.scale_index}.png"
        write_image(recon, rp)
        manifest.record_artifact(rp)
    lines = ["scale sizes and per-scale losses (direction: fwd then bwd)"]
    for field, (bd_f, bd_b) in zip(res.fields, res.losses):
        lines.append(
            f"scale {field.scale_index}: {field.height}x{field.width}"
        )
        for bd in (bd_f, bd_b):
            lines.append(
                f"  {bd.direction}: rec={bd.rec:.6f} fl={bd.fl:.6f} fb={bd.fb:.6f} "
                f"sm={bd.sm:.6f} sp={bd.sp:.6f} total={bd.total:.6f}"
            )
    if tgt is not None:
        lines.append(f"final recon charbonnier = {res.recon_error(tgt):.6f}")
    scales_path = out / "scales.txt"
    scales_path.write_text("\n".join(lines) + "\n")
    manifest.record_artifact(scales_path)


def cmd_synth(args) -> int:
    from .synth import ShapeSpec, SynthSceneConfig, generate_scene, write_corpus

    vel = tuple(float(x) for x in args.velocity.split(","))
    if len(vel) != 2:
        raise ValueError(f"--velocity must be 'rows,cols', got {args.velocity!r}")
    spec = ShapeSpec(
        kind=args.kind,
        size=args.shape_size,
        center=(args.size / 2.0, args.size / 2.0 + args.center_offset),
        motion=args.motion,
        velocity=vel,
        angular_velocity=args.angular_velocity,
        flat_value=args.flat_value,
    )
    cfg = SynthSceneConfig(
        height=args.size, width=args.size, frames=args.frames,
        shapes=(spec,), background=args.background,
        background_gain=args.background_gain, seed=args.seed,
    )
    scene = generate_scene(cfg)
    manifest = RunManifest("synth")
    manifest.record_settings(_settings(args))
    out = Path(args.out)
    for p in write_corpus(scene, out):
        manifest.record_artifact(p)
    manifest.write(out / "manifest.txt")
    print(f"wrote {args.frames} frames to {out}")
    return 0


def cmd_solve(args) -> int:
    src = read_image(args.src)
    tgt = read_image(args.tgt)
    manifest = RunManifest("solve")
    manifest.record_settings(_settings(args))
    manifest.record_input(args.src)
    manifest.record_input(args.tgt)
    res = solve_direct(src, tgt, _pyramid(args), _solver_options(args), _weights(args))
    out = Path(args.out)
    _export_result(res, out, manifest, tgt)
    manifest.write(out / "manifest.txt")
    print(f"recon charbonnier = {res.recon_error(tgt):.6f}")
    return 0


def cmd_infer(args) -> int:
    src = read_image(args.src)
    tgt = read_image(args.tgt)
    manifest = RunManifest("infer")
    manifest.record_settings(_settings(args))
    manifest.record_input(args.src)
    manifest.record_input(args.tgt)
    res = _result_fn(args)(src, tgt)
    out = Path(args.out)
    _export_result(res, out, manifest, tgt)
    manifest.write(out / "manifest.txt")
    print(f"recon charbonnier = {res.recon_error(tgt):.6f}")
    return 0


def cmd_train(args) -> int:
    from .net import NetConfig
    from .train import TrainConfig, train

    frames, _ = _load_frames(args.corpus)
    net_cfg = NetConfig(
        embed_channels=tuple(int(c) for c in args.embed_channels.split(",")),
        full_res_channels=args.full_res_channels,
        head_channels=None,
        k=args.kernel,
        seed=args.seed,
    )
    train_cfg = TrainConfig(
        learning_rate=args.lr,
        iterations=args.iterations,
        pair_window=args.pair_window,
        batch_size=args.batch_size,
        augment_flip=not args.no_flip,
        augment_rot90=not args.no_rot90,
        weights=_weights(args),
        seed=args.seed,
        checkpoint_interval=args.checkpoint_interval,
    )
    manifest = RunManifest("train")
    manifest.record_settings(_settings(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(it, log_rows):
        if it % max(1, args.iterations // 20) == 0 or it == args.iterations:
            recent = [r[-1] for r in log_rows if r[0] == it]
            print(f"iter {it}/{args.iterations} mean total {np.mean(recent):.5f}", flush=True)

    train(frames, net_cfg, train_cfg, _pyramid(args), out_dir=out, progress=progress)
    for name in ("checkpoint_final.bin", "train_log.csv"):
        manifest.record_artifact(out / name)
    manifest.write(out / "manifest.txt")
    return 0


def cmd_track(args) -> int:
    frames, paths = _load_frames(args.frames_dir)
    first = masks_from_label_image(read_image(args.mask), args.num_objects or None)
    manifest = RunManifest("track")
    manifest.record_settings(_settings(args))
    manifest.record_input(args.frames_dir)
    manifest.record_input(args.mask)
    cfg = TrackerConfig(window=args.k, mask_threshold=args.threshold)
    flow_fn = _cached_pair_flow(_result_fn(args), frames)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    anchor = (frames[0], first) if args.use_first_frame else None
    history = [(frames[0], first)]
    n_obj = first.num_objects
    for t in range(1, len(frames)):
        stack = propagate_masks(history, frames[t], flow_fn, cfg, anchor=anchor)
        label = np.zeros(stack.shape)
        for i in range(n_obj):
            label[stack.probs[i] > 0.5] = round((i + 1) * 255.0 / n_obj) / 255.0
        p = out / f"mask_{t:04d}.png"
        write_image(label[:, :, None], p)
        manifest.record_artifact(p)
        history.append((frames[t], stack))
        history = history[-cfg.window :]
    manifest.write(out / "manifest.txt")
    print(f"propagated masks for {len(frames) - 1} frames to {out}")
    return 0


def cmd_pose(args) -> int:
    from .synth import read_joints_csv, write_joints_csv

    frames, _ = _load_frames(args.frames_dir)
    joints_frames, vis_frames = read_joints_csv(args.joints)
    manifest = RunManifest("pose")
    manifest.record_settings(_settings(args))
    manifest.record_input(args.frames_dir)
    manifest.record_input(args.joints)
    cfg = TrackerConfig(joint_radius=args.radius)
    flow_fn = _cached_pair_flow(_result_fn(args), frames)
    joints = JointMap(joints_frames[0], vis_frames[0], frames[0].shape[:2])
    tracked = [joints.points.copy()]
    visible = [joints.visible.copy()]
    for t in range(1, len(frames)):
        flow = flow_fn(frames[t - 1], frames[t])
        joints = propagate_pose(joints, flow, cfg)
        tracked.append(joints.points.copy())
        visible.append(joints.visible.copy())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    p = out / "joints_tracked.csv"
    write_joints_csv(p, tracked, visible)
    manifest.record_artifact(p)
    manifest.write(out / "manifest.txt")
    print(f"tracked {joints.points.shape[0]} joints over {len(frames)} frames")
    return 0


def cmd_shots(args) -> int:
    frames, _ = _load_frames(args.frames_dir)
    manifest = RunManifest("shots")
    manifest.record_settings(_settings(args))
    manifest.record_input(args.frames_dir)
    flow_fn = _cached_pair_flow(_result_fn(args), frames)
    boundaries, errors = detect_shots(frames, flow_fn)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bp = out / "boundaries.txt"
    bp.write_text("".join(f"{b}\n" for b in boundaries))
    manifest.record_artifact(bp)
    ep = out / "pair_errors.csv"
    ep.write_text("pair,error\n" + "".join(f"{t},{e:.8f}\n" for t, e in enumerate(errors)))
    manifest.record_artifact(ep)
    manifest.write(out / "manifest.txt")
    print(f"boundaries: {boundaries}")
    return 0


def cmd_longflow(args) -> int:
    frames, _ = _load_frames(args.frames_dir)
    i, j = args.i, args.j
    manifest = RunManifest("longflow")
    manifest.record_settings(_settings(args))
    manifest.record_input(args.frames_dir)
    flow_fn = _cached_pair_flow(_result_fn(args), frames)
    flow = long_range_flow(frames, i, j, flow_fn)
    from .fields import warp_with_flow

    recon = warp_with_flow(frames[i], flow)
    err = recon_l1(recon, frames[j])
    baseline = recon_l1(frames[i], frames[j])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fp = out / "flow.flo"
    write_flo(flow, fp)
    manifest.record_artifact(fp)
    rp = out / "recon.png"
    write_image(recon, rp)
    manifest.record_artifact(rp)
    report = out / "recon_l1.txt"
    report.write_text(
        f"frames = {i} -> {j}\nrecon_l1 = {err:.4f}\nidentity_l1 = {baseline:.4f}\n"
    )
    manifest.record_artifact(report)
    manifest.write(out / "manifest.txt")
    print(f"recon_l1 = {err:.4f} (identity baseline {baseline:.4f})")
    return 0


def cmd_eval(args) -> int:
    if args.kind == "masks":
        pred_paths = sorted(Path(args.pred).glob("mask_*.png"))
        rows = ["name,jaccard,boundary_f"]
        scores = []
        for pp in pred_paths:
            gp = Path(args.gt) / pp.name
            if not gp.exists():
                continue
            pred = masks_from_label_image(read_image(pp))
            gt = masks_from_label_image(read_image(gp))
            n = min(pred.num_objects, gt.num_objects)
            for obj in range(n):
                j = eval_jaccard(pred.probs[obj] > 0.5, gt.probs[obj] > 0.5)
                f = eval_boundary_f(pred.probs[obj] > 0.5, gt.probs[obj] > 0.5,
                                    args.tolerance)
                rows.append(f"{pp.name}/obj{obj},{j:.4f},{f:.4f}")
                scores.append((j, f))
        if not scores:
            raise ValueError("no overlapping mask files to score")
        mj = float(np.mean([s[0] for s in scores]))
        mf = float(np.mean([s[1] for s in scores]))
        rows.append(f"mean,{mj:.4f},{mf:.4f}")
        Path(args.out).write_text("\n".join(rows) + "\n")
        print(f"jaccard mean {mj:.4f}, boundary F mean {mf:.4f}")
        return 0
    from .synth import read_joints_csv

    pred_frames, pred_vis = read_joints_csv(args.pred)
    gt_frames, _ = read_joints_csv(args.gt)
    if len(pred_frames) != len(gt_frames):
        raise ValueError("prediction and ground truth frame counts differ")
    rows = ["frame,pck"]
    vals = []
    for t, (pf, gf) in enumerate(zip(pred_frames, gt_frames)):
        pck = eval_pck(pf, gf, args.tau, args.bbox, pred_vis[t])
        rows.append(f"{t},{pck:.4f}")
        vals.append(pck)
    rows.append(f"mean,{float(np.mean(vals)):.4f}")
    Path(args.out).write_text("\n".join(rows) + "\n")
    print(f"pck@{args.tau} mean {float(np.mean(vals)):.4f}")
    return 0


def cmd_gradcheck(args) -> int:
    from .fields import FilterFlowField
    from .losses import finite_diff_check, total_loss_and_grads

    rng = np.random.default_rng(args.seed)
    k = 3
    failures = 0
    for name in ("rec", "fl", "fb", "sm", "sp", "total"):
        worst = 0.0
        for trial in range(3):
            src = rng.random((8, 8, 1))
            tgt = rng.random((8, 8, 1))
            lf = rng.normal(size=(8, 8, k * k))
            lb = rng.normal(size=(8, 8, k * k))
            zero = {"rec": (0, 0, 0, 0), "fl": (1, 0, 0, 0), "fb": (0, 1, 0, 0),
                    "sm": (0, 0, 1, 0), "sp": (0, 0, 0, 1), "total": (1.0, 0.1, 0.01, 0.001)}
            w = LossWeights(*[float(x) for x in zero[name]])

            def fn(l):
                (b1, b2), _ = total_loss_and_grads(
                    FilterFlowField(l, k), FilterFlowField(lb, k), src, tgt, w
                )
                return b1.total + b2.total

            _, (g, _) = total_loss_and_grads(
                FilterFlowField(lf, k), FilterFlowField(lb, k), src, tgt, w
            )
            worst = max(worst, finite_diff_check(fn, g, lf.copy(), step=1e-5,
                                                 samples=80, seed=args.seed + trial))
        status = "ok" if worst < 1e-4 else "FAIL"
        if worst >= 1e-4:
            failures += 1
        print(f"{name:6s} max rel err {worst:.3e}  {status}")

    from .net import NetConfig, Tape, backward, forward, init_params

    cfg = NetConfig(embed_channels=(6, 8, 8, 6), full_res_channels=4,
                    head_channels=(8, 9), k=3, seed=args.seed)
    params = init_params(cfg)
    src = rng.random((16, 16, 1))
    tgt = rng.random((16, 16, 1))
    tape = Tape()
    field = forward(params, src, tgt, cfg, tape)
    dlogits = rng.normal(size=field.logits.shape)
    grads = backward(tape, dlogits)
    worst = 0.0
    names = [n for n in params if n.endswith("_w")]
    for name in names:
        flat = params[name].reshape(-1)
        idx = rng.choice(flat.size, size=min(8, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            step = 1e-6
            flat[i] = orig + step
            lp = float((forward(params, src, tgt, cfg).logits * dlogits).sum())
            flat[i] = orig - step
            lm = float((forward(params, src, tgt, cfg).logits * dlogits).sum())
            flat[i] = orig
            numeric = (lp - lm) / (2 * step)
            analytic = grads[name].reshape(-1)[i]
            denom = max(abs(analytic), abs(numeric), 1e-6)
            worst = max(worst, abs(analytic - numeric) / denom)
    status = "ok" if worst < 1e-4 else "FAIL"
    if worst >= 1e-4:
        failures += 1
    print(f"network max rel err {worst:.3e}  {status}")
    return 1 if failures else 0


def _settings(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="filterflow",
        description="Multigrid per-pixel filter flow toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("out")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--kind", choices=["rectangle", "disk", "stick"], default="rectangle")
    p.add_argument("--motion", choices=["translate", "sinusoid", "rotate"], default="translate")
    p.add_argument("--shape-size", type=float, default=11.0)
    p.add_argument("--center-offset", type=float, default=-12.0,
                   help="initial column offset of the shape from center")
    p.add_argument("--velocity", default="0,2")
    p.add_argument("--angular-velocity", type=float, default=0.15)
    p.add_argument("--flat-value", type=float, default=None)
    p.add_argument("--background", choices=["noise", "flat"], default="noise")
    p.add_argument("--background-gain", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve", help="direct-solver flow between two images")
    p.add_argument("src")
    p.add_argument("tgt")
    p.add_argument("-o", "--out", default="out")
    _add_pyramid_flags(p)
    _add_solver_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_solve, checkpoint=None)

    p = sub.add_parser("infer", help="learned-model flow for a pair")
    p.add_argument("checkpoint")
    p.add_argument("src")
    p.add_argument("tgt")
    p.add_argument("-o", "--out", default="out")
    _add_pyramid_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("train", help="train the predictor on a frame directory")
    p.add_argument("corpus")
    p.add_argument("-o", "--out", default="run")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.0005)
    p.add_argument("--pair-window", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--no-flip", action="store_true")
    p.add_argument("--no-rot90", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-interval", type=int, default=100)
    p.add_argument("--embed-channels", default="16,32,32,16")
    p.add_argument("--full-res-channels", type=int, default=8)
    _add_pyramid_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("track", help="propagate masks over a frame directory")
    p.add_argument("frames_dir")
    p.add_argument("mask", help="first-frame label image")
    p.add_argument("-o", "--out", default="tracked")
    p.add_argument("--k", type=int, default=3, help="temporal window")
    p.add_argument("--threshold", type=float, default=0.8)
    p.add_argument("--use-first-frame", action="store_true")
    p.add_argument("--num-objects", type=int, default=0)
    _add_pyramid_flags(p)
    _add_solver_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("pose", help="propagate joints over a frame directory")
    p.add_argument("frames_dir")
    p.add_argument("joints", help="joints CSV with frame-0 annotations")
    p.add_argument("-o", "--out", default="pose")
    p.add_argument("--radius", type=int, default=3)
    _add_pyramid_flags(p)
    _add_solver_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_pose)

    p = sub.add_parser("shots", help="detect shot boundaries")
    p.add_argument("frames_dir")
    p.add_argument("-o", "--out", default="shots")
    _add_pyramid_flags(p, levels=2)
    _add_solver_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_shots)

    p = sub.add_parser("longflow", help="compose flow from frame i to frame j")
    p.add_argument("frames_dir")
    p.add_argument("i", type=int)
    p.add_argument("j", type=int)
    p.add_argument("-o", "--out", default="longflow")
    _add_pyramid_flags(p)
    _add_solver_flags(p)
    _add_weight_flags(p)
    p.set_defaults(func=cmd_longflow)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("kind", choices=["masks", "joints"])
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("-o", "--out", default="metrics.csv")
    p.add_argument("--tolerance", type=float, default=2.0, help="boundary F tolerance px")
    p.add_argument("--tau", type=float, default=0.2)
    p.add_argument("--bbox", type=float, default=64.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def _apply_config_file(parser, argv):
    """Pre-scan for --config and install its values as subcommand defaults."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValueError("--config requires a file path")
    cfg_path = argv[idx + 1]
    values = read_config(cfg_path)
    rest = argv[:idx] + argv[idx + 2 :]
    if not rest:
        raise ValueError("--config cannot replace the subcommand")
    sub_name = rest[0]
    sub_parser = None
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            sub_parser = action.choices.get(sub_name)
    if sub_parser is None:
        return rest
    defaults = {}
    known = {a.dest: a.default for a in sub_parser._actions}
    for key, value in values.items():
        dest = key.replace("-", "_")
        if dest in known:
            defaults[dest] = coerce_like(value, known[dest])
    sub_parser.set_defaults(**defaults)
    return rest


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        # argparse exits 2 on usage errors; 0 stays 0 (e.g. --help)
        return 0 if e.code in (0, None) else 1
    except (ValueError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, FileFormatError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
