"""Command-line interface.

Subcommands: synth (generate a scene), mvopt (refine a scene), fuse
(inverse-variance fusion report), align (attention-map alignment demo),
verify (run the property suites). Exit codes: 0 success or all suites
passing, 1 a property/invariant violation, 2 invalid input or arguments.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fusion, mvopt, scene_io, synth, verify
from .attention import (
    alignment_energy,
    alignment_step,
    build_joint_attention,
    estimate_spectral_norm,
    project_nonexpansive,
)
from .errors import MvkitError, SceneFormatError
from .rng import derive_seed, generator

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def _parse_sigmas(text: str, count: int | None = None):
    try:
        values = tuple(float(p) for p in text.split(",") if p.strip() != "")
    except ValueError:
        raise ValueError(f"could not parse sigma list {text!r}")
    if count is not None and len(values) == 1:
        values = values * count
    return values


def _emit(doc: dict, path: str | None) -> None:
    if path:
        scene_io.write_report(doc, path)
    else:
        sys.stdout.write(scene_io.report_json(doc))


def cmd_synth(args) -> int:
    sigmas = _parse_sigmas(args.sigmas, args.views) if args.sigmas else None
    config = synth.SceneConfig(
        frame_count=args.frames,
        view_count=args.views,
        height=args.size,
        width=args.size,
        seed=args.seed,
        blob_sigma=args.blob_sigma,
        sigmas=sigmas,
    )
    scene = synth.generate_scene(config)
    scene_io.write_scene(scene, args.out)
    if args.pgm_dir:
        scene_io.dump_sequence_pgm(scene.corrupted, args.pgm_dir)
    print(f"wrote scene {args.out} ({args.frames} frames, {args.views} views)")
    return EXIT_OK


def cmd_mvopt(args) -> int:
    config, seq, doc = scene_io.read_scene(args.scene_in)
    opt = mvopt.MvOptConfig(
        w1=args.w1,
        w2=args.w2,
        w3=args.w3,
        passes_per_timestamp=args.passes,
        opposite_view_term=args.opposite_view,
    )
    refined, trace = mvopt.mvopt_run(seq, opt)
    ok, violation = mvopt.check_monotone(trace)
    if args.trace:
        scene_io.write_trace_csv(trace, args.trace)
    if args.out:
        out_doc = scene_io.scene_to_document(
            config, refined.rig, refined.clamped().frames, None
        )
        if "clean_keypoints" in doc:
            out_doc["clean_keypoints"] = doc["clean_keypoints"]
        scene_io.write_scene(out_doc, args.out)
    f0 = trace.records[0].f_total
    f1 = trace.records[-1].f_total
    print(f"objective {f0:.6g} -> {f1:.6g} over {len(trace) - 1} updates")
    if not ok:
        print(f"monotone descent violated at trace record {violation}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_fuse(args) -> int:
    sigmas = np.asarray(_parse_sigmas(args.sigmas), dtype=np.float64)
    beta = fusion.inverse_variance_weights(sigmas)
    report = {
        "sigmas": sigmas.tolist(),
        "beta": beta.tolist(),
        "expected_mse": fusion.expected_mse(beta, sigmas),
        "best_single_view_mse": float(np.min(sigmas) ** 2),
        "seed": args.seed,
    }
    if sigmas.size <= 4:
        oracle = fusion.brute_force_optimal_weights(sigmas, 0.005)
        report["oracle_beta"] = oracle.tolist()
        report["oracle_mse"] = fusion.expected_mse(oracle, sigmas)
        report["oracle_grid_step"] = 0.005
    if args.learn:
        d = 8
        v_star = generator(args.seed, "fuse-vstar").uniform(-1.0, 1.0, d)
        v_star /= np.linalg.norm(v_star)
        model = fusion.NoisyViewModel(v_star, sigmas)
        samples = fusion.sample_views(model, args.samples, derive_seed(args.seed, "fuse-samples"))
        learned = fusion.learn_view_weights(
            model, samples, steps=args.steps, seed=derive_seed(args.seed, "fuse-probe")
        )
        report["learned_omega"] = learned.omega.tolist()
        report["alpha_mean"] = learned.alpha_mean.tolist()
        report["final_training_loss"] = learned.loss
        report["rank_corr_alpha_vs_inverse_variance"] = fusion.spearman_rank_corr(
            learned.alpha_mean, sigmas ** -2.0
        )
    _emit(report, args.out)
    return EXIT_OK


def cmd_align(args) -> int:
    rng = generator(args.seed, "align-cli")
    raw_t = rng.uniform(0.0, 1.0, (args.size, args.size))
    raw_m = rng.uniform(0.0, 1.0, (args.size, args.size))
    a_temp = project_nonexpansive(raw_t, 50)
    a_mv = project_nonexpansive(raw_m, 50)
    z = rng.standard_normal(args.size)
    energies = [alignment_energy(z, a_temp, a_mv, args.lam)]
    for _ in range(args.steps):
        z = alignment_step(z, a_temp, a_mv, args.lam)
        energies.append(alignment_energy(z, a_temp, a_mv, args.lam))
    joint = build_joint_attention(a_temp, a_mv, args.lam)
    report = {
        "size": args.size,
        "lambda": args.lam,
        "steps": args.steps,
        "seed": args.seed,
        "energies": energies,
        "joint_spectral_norm": estimate_spectral_norm(joint.matrix, 100),
        "monotone": bool(np.all(np.diff(energies) <= 1e-12)),
    }
    _emit(report, args.out)
    return EXIT_OK if report["monotone"] else EXIT_VIOLATION


def cmd_verify(args) -> int:
    report = verify.run_verify(args.suite, args.seed)
    _emit(report, args.out)
    if not args.out:
        return EXIT_OK if report["overall_pass"] else EXIT_VIOLATION
    status = "pass" if report["overall_pass"] else "FAIL"
    for record in report["suites"]:
        mark = "pass" if record["passed"] else "FAIL"
        print(f"  [{mark}] {record['suite']}: {record['anchor']}")
    print(f"verify: {status} ({len(report['suites'])} suites) -> {args.out}")
    return EXIT_OK if report["overall_pass"] else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvkit",
        description="multi-view frame refinement toolkit: synthetic scenes, "
        "fusion, attention alignment, block-coordinate refinement, and "
        "numerical property suites",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-view scene")
    p.add_argument("--views", type=int, default=8)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blob-sigma", type=float, default=1.5)
    p.add_argument("--sigmas", type=str, default=None,
                   help="comma-separated per-view noise levels (or one value for all)")
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--pgm-dir", type=str, default=None,
                   help="also dump one PGM per frame channel here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mvopt", help="refine a scene with the block optimizer")
    p.add_argument("--in", dest="scene_in", type=str, required=True)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--trace", type=str, default=None, help="write the loss trace CSV here")
    p.add_argument("--passes", type=int, default=8)
    p.add_argument("--w1", type=float, default=1.0)
    p.add_argument("--w2", type=float, default=0.1)
    p.add_argument("--w3", type=float, default=0.02)
    p.add_argument("--opposite-view", action="store_true")
    p.set_defaults(func=cmd_mvopt)

    p = sub.add_parser("fuse", help="inverse-variance fusion report")
    p.add_argument("--sigmas", type=str, required=True)
    p.add_argument("--learn", action="store_true")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("align", help="attention alignment demo on random maps")
    p.add_argument("--size", type=int, default=12)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("verify", help="run the numerical property suites")
    p.add_argument("--suite", type=str, default="all",
                   choices=["all", *verify.SUITES.keys()])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def run_command(argv) -> int:
    """Entry point with the documented exit-code contract."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (SceneFormatError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MvkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
