"""Property suites behind the `verify` subcommand.

Each suite exercises one verified claim of the library (closed-form
optimality, convexity, monotone descent, gradient correctness, round trips,
determinism) at pinned tolerances and returns a JSON-ready record. All
randomness is derived from the single master seed, so two runs of the same
suite produce identical records except for the runtime field.
"""

from __future__ import annotations

import time

import numpy as np

from . import attention, fusion, mvopt, scorecheck, synth
from .core import AttentionMap, build_view_rig
from .rng import derive_seed, generator
from .scene_io import scene_to_document

DESCENT_SCENES = 20
CONVERGENCE_SCENES = 3
STATIONARITY_TOL = 1e-4
MONOTONE_TOL = 1e-9
SWEEP_TOL = 1e-10


def _record(name, anchor, seed, passed, checks, started):
    return {
        "suite": name,
        "anchor": anchor,
        "seed": seed,
        "passed": bool(passed),
        "checks": checks,
        "runtime_ms": round(1000.0 * (time.perf_counter() - started), 3),
    }


def run_score_suite(seed: int) -> dict:
    """Binned empirical MMSE denoiser vs the closed form, plus conditioning gain."""
    started = time.perf_counter()
    checks = {}

    # single-Gaussian case: bin means within 3 SE of the closed form at centers
    model = scorecheck.GaussianLatentModel.single(0.0, 1.0, 1.0)
    binned = scorecheck.empirical_mmse_denoiser(model, 1_000_000, 40, derive_seed(seed, "score-bins"))
    pop = binned.populated
    within = (
        np.abs(binned.mean_eps[pop] - binned.analytic_center[pop]) <= 3.0 * binned.stderr[pop]
    )
    frac = float(within.mean())
    checks["gaussian_bin_agreement"] = {
        "populated_bins": int(pop.sum()),
        "fraction_within_3se": frac,
        "required": 0.95,
        "passed": frac >= 0.95,
    }

    # two-component mixture: compare against the bin-averaged closed form,
    # which stays unbiased where the denoiser bends within a bin
    mix = scorecheck.GaussianLatentModel(
        weights=[0.5, 0.5], means=[-5.0, 5.0], stds=[0.5, 0.5], sigma_t=1.0
    )
    binned_mix = scorecheck.empirical_mmse_denoiser(mix, 1_000_000, 40, derive_seed(seed, "score-mix"))
    pop = binned_mix.populated
    within = (
        np.abs(binned_mix.mean_eps[pop] - binned_mix.analytic_bin_mean[pop])
        <= 3.0 * binned_mix.residual_stderr[pop]
    )
    frac_mix = float(within.mean())
    checks["mixture_bin_agreement"] = {
        "populated_bins": int(pop.sum()),
        "fraction_within_3se": frac_mix,
        "required": 0.95,
        "passed": frac_mix >= 0.95,
    }

    # denoiser equals the scaled score of the noised marginal
    zs = np.linspace(-4.0, 4.0, 33)
    single = scorecheck.GaussianLatentModel.single(0.7, 1.3, 0.8)
    pred = scorecheck.analytic_denoiser(single, zs)
    score = -(zs - 0.7) / (1.3 ** 2 + 0.8 ** 2)
    rel = float(np.max(np.abs(pred + 0.8 * score) / np.maximum(np.abs(pred), 1e-30)))
    checks["score_identity"] = {"max_rel_err": rel, "tolerance": 1e-10, "passed": rel < 1e-10}

    gain = scorecheck.conditioning_gain(mix, 1_000_000, derive_seed(seed, "score-gain"))
    ok_gain = gain.gain >= -3.0 * gain.gain_stderr
    checks["conditioning_gain"] = {
        "mse_conditional": gain.mse_conditional,
        "mse_unconditional": gain.mse_unconditional,
        "gain": gain.gain,
        "stderr": gain.gain_stderr,
        "passed": bool(ok_gain),
    }
    passed = all(c["passed"] for c in checks.values())
    return _record(
        "score",
        "squared-loss-optimal noise predictor equals the conditional expectation",
        seed,
        passed,
        checks,
        started,
    )


def run_fusion_suite(seed: int) -> dict:
    """Closed-form inverse-variance weights vs exhaustive grid search."""
    started = time.perf_counter()
    rng = generator(seed, "fusion-suite")
    grid_step = 0.005
    mismatches = 0
    dominated = True
    cases = []
    for i in range(50):
        m = int(rng.integers(2, 5))
        sigmas = np.exp(rng.uniform(np.log(0.1), np.log(10.0), m))
        beta = fusion.inverse_variance_weights(sigmas)
        oracle = fusion.brute_force_optimal_weights(sigmas, grid_step)
        gap = float(np.max(np.abs(beta - oracle)))
        mse_closed = fusion.expected_mse(beta, sigmas)
        mse_oracle = fusion.expected_mse(oracle, sigmas)
        if gap > grid_step:
            mismatches += 1
        if mse_closed > mse_oracle * (1.0 + 1e-12):
            dominated = False
        if i < 5:
            cases.append({"sigmas": sigmas.tolist(), "max_coord_gap": gap})
    checks = {
        "oracle_agreement": {
            "cases": 50,
            "grid_step": grid_step,
            "mismatches": mismatches,
            "passed": mismatches == 0,
            "sample_cases": cases,
        },
        "oracle_dominance": {"passed": dominated},
    }

    # dominance over single views and Monte-Carlo consistency
    sigmas = np.array([0.4, 1.1, 2.5])
    beta = fusion.inverse_variance_weights(sigmas)
    d = 6
    mse = fusion.expected_mse(beta, sigmas, d)
    single_best = float(d * np.min(sigmas) ** 2)
    model = fusion.NoisyViewModel(np.linspace(-1.0, 1.0, d), sigmas)
    samples = fusion.sample_views(model, 100_000, derive_seed(seed, "fusion-mc"))
    fused = fusion.fuse(samples, beta)
    err = np.sum((fused - model.v_star) ** 2, axis=1)
    mc_mse = float(err.mean())
    mc_se = float(err.std(ddof=1) / np.sqrt(err.size))
    checks["beats_single_view"] = {
        "expected_mse": mse,
        "best_single_view": single_best,
        "passed": mse < single_best,
    }
    checks["monte_carlo_consistency"] = {
        "mc_mse": mc_mse,
        "expected": mse,
        "stderr": mc_se,
        "passed": abs(mc_mse - mse) <= 3.0 * mc_se,
    }
    passed = all(c["passed"] for c in checks.values())
    return _record(
        "fusion",
        "inverse-variance weights minimize the expected fusion error",
        seed,
        passed,
        checks,
        started,
    )


def run_fusion_learn_suite(seed: int) -> dict:
    """Learned attention weights recover the per-view reliability ordering."""
    started = time.perf_counter()
    d = 8
    v_star = generator(seed, "learn-vstar").uniform(-1.0, 1.0, d)
    v_star /= np.linalg.norm(v_star)
    sigmas = np.array([0.1, 0.25, 0.6, 1.5])
    rank_ok = 0
    for k in range(20):
        model = fusion.NoisyViewModel(v_star, sigmas)
        samples = fusion.sample_views(model, 256, derive_seed(seed, "learn", k))
        learned = fusion.learn_view_weights(model, samples, steps=2000, seed=derive_seed(seed, "probe", k))
        corr = fusion.spearman_rank_corr(learned.alpha_mean, sigmas ** -2.0)
        if corr == 1.0:
            rank_ok += 1
    checks = {
        "rank_alignment": {
            "seeds": 20,
            "sigmas": sigmas.tolist(),
            "perfect_rank_count": rank_ok,
            "passed": rank_ok == 20,
        }
    }

    # equal noise levels give a near-uniform mean attention
    sigmas_eq = np.full(4, 0.5)
    worst = 0.0
    for k in range(20):
        model = fusion.NoisyViewModel(v_star, sigmas_eq)
        samples = fusion.sample_views(model, 256, derive_seed(seed, "learn-eq", k))
        learned = fusion.learn_view_weights(model, samples, steps=2000, seed=derive_seed(seed, "probe-eq", k))
        worst = max(worst, float(np.max(np.abs(learned.alpha_mean - 0.25))))
    checks["equal_sigma_uniformity"] = {
        "max_deviation": worst,
        "tolerance": 0.02,
        "passed": worst <= 0.02,
    }
    passed = all(c["passed"] for c in checks.values())
    return _record(
        "fusion-learn",
        "learned attention weights act as a differentiable reliability estimator",
        seed,
        passed,
        checks,
        started,
    )


def run_attention_suite(seed: int) -> dict:
    """Convexity of the alignment energy and nonexpansiveness of the joint map."""
    started = time.perf_counter()
    rng = generator(seed, "attention-suite")
    convex_worst = -np.inf
    expand_worst = 0.0
    fixed_point_worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 17))
        raw_t = rng.uniform(0.0, 1.0, (n, n))
        raw_m = rng.uniform(0.0, 1.0, (n, n))
        a_t = attention.project_nonexpansive(raw_t, 50)
        a_m = attention.project_nonexpansive(raw_m, 50)
        lam = float(rng.uniform(0.0, 3.0))
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        mid = attention.alignment_energy(0.5 * (x + y), a_t, a_m, lam)
        avg = 0.5 * (
            attention.alignment_energy(x, a_t, a_m, lam)
            + attention.alignment_energy(y, a_t, a_m, lam)
        )
        convex_worst = max(convex_worst, mid - avg)
        joint = attention.build_joint_attention(a_t, a_m, lam)
        lhs = float(np.linalg.norm(joint.matrix @ (x - y)))
        rhs = float(np.linalg.norm(x - y))
        if rhs > 0:
            expand_worst = max(expand_worst, lhs / rhs)
    checks = {
        "midpoint_convexity": {
            "pairs": 200,
            "worst_violation": float(convex_worst),
            "tolerance": 1e-9,
            "passed": convex_worst <= 1e-9,
        },
        "joint_nonexpansive": {
            "worst_ratio": expand_worst,
            "tolerance": 1.0 + 1e-6,
            "passed": expand_worst <= 1.0 + 1e-6,
        },
    }

    # shared fixed point of both maps is a stationary point of the energy
    rng_fp = generator(seed, "attention-fixed-point")
    for _ in range(20):
        n = int(rng_fp.integers(2, 9))
        raw = rng_fp.uniform(0.1, 1.0, (n, n))
        a_t = AttentionMap(raw / raw.sum(axis=1, keepdims=True), row_stochastic=True)
        raw2 = rng_fp.uniform(0.1, 1.0, (n, n))
        a_m = AttentionMap(raw2 / raw2.sum(axis=1, keepdims=True), row_stochastic=True)
        z = np.full(n, float(rng_fp.uniform(-2.0, 2.0)))  # constant vectors are fixed points
        g = attention.alignment_energy_gradient(z, a_t, a_m, 0.7)
        fixed_point_worst = max(fixed_point_worst, float(np.max(np.abs(g))))
    checks["fixed_point_stationarity"] = {
        "worst_gradient": fixed_point_worst,
        "tolerance": 1e-10,
        "passed": fixed_point_worst <= 1e-10,
    }

    # one alignment step at the default rate never raises the energy
    rng_step = generator(seed, "attention-step")
    step_ok = True
    for _ in range(50):
        n = int(rng_step.integers(2, 17))
        a_t = attention.project_nonexpansive(rng_step.uniform(0.0, 1.0, (n, n)), 50)
        a_m = attention.project_nonexpansive(rng_step.uniform(0.0, 1.0, (n, n)), 50)
        lam = float(rng_step.uniform(0.0, 3.0))
        z = rng_step.standard_normal(n)
        z_next = attention.alignment_step(z, a_t, a_m, lam)
        if attention.alignment_energy(z_next, a_t, a_m, lam) > attention.alignment_energy(
            z, a_t, a_m, lam
        ) + 1e-12:
            step_ok = False
    checks["step_descends"] = {"passed": step_ok}
    passed = all(c["passed"] for c in checks.values())
    return _record(
        "attention",
        "alignment energy is convex and the additive joint map is nonexpansive",
        seed,
        passed,
        checks,
        started,
    )


def _fd_gradient(f, x, h=1e-5):
    g = np.zeros_like(x)
    flat_x = x.ravel()
    flat_g = g.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        fp = f(x)
        flat_x[i] = orig - h
        fm = f(x)
        flat_x[i] = orig
        flat_g[i] = (fp - fm) / (2.0 * h)
    return g


def _rel_err(a, b) -> float:
    na = float(np.linalg.norm(a.ravel()))
    nb = float(np.linalg.norm(b.ravel()))
    return float(np.linalg.norm((a - b).ravel()) / max(na, nb, 1e-300))


def run_gradient_suite(seed: int) -> dict:
    """Analytic gradients vs central finite differences."""
    started = time.perf_counter()
    from .core import FrameSequence

    worst_local = 0.0
    worst_global = 0.0
    for k in range(20):
        rng = generator(seed, "grad-scene", k)
        t_count, m_count, h, w, c = 3, int(rng.integers(2, 4)), 8, 8, 2
        rig = build_view_rig(m_count, 0)
        frames = rng.uniform(0.05, 0.95, (t_count, m_count, h, w, c))
        cfg = mvopt.MvOptConfig(opposite_view_term=bool(k % 4 == 3 and m_count % 2 == 0))
        t = int(rng.integers(1, t_count))
        v = int(rng.integers(0, m_count))
        seq = FrameSequence(rig=rig, frames=frames)
        _, grad = mvopt.total_loss(seq, t, v, cfg)

        def local_f(x):
            fr = np.array(frames)
            fr[t, v] = x
            return mvopt.total_loss(FrameSequence(rig=rig, frames=fr), t, v, cfg)[0]

        fd = _fd_gradient(local_f, frames[t, v].copy())
        worst_local = max(worst_local, _rel_err(grad, fd))

        grad_g = mvopt.global_block_gradient(seq, t, v, cfg)

        def global_f(x):
            fr = np.array(frames)
            fr[t, v] = x
            return mvopt.global_objective(FrameSequence(rig=rig, frames=fr), cfg)

        fd_g = _fd_gradient(global_f, frames[t, v].copy())
        worst_global = max(worst_global, _rel_err(grad_g, fd_g))

    worst_learn = 0.0
    for k in range(20):
        rng = generator(seed, "grad-learn", k)
        d = 5
        model = fusion.NoisyViewModel(
            rng.uniform(-1.0, 1.0, d), np.exp(rng.uniform(np.log(0.2), np.log(2.0), 3))
        )
        samples = fusion.sample_views(model, 64, derive_seed(seed, "grad-learn-samples", k))
        queries = model.v_star[None, :] + 0.01 * generator(
            seed, "grad-learn-probe", k
        ).standard_normal((64, d))
        omega = rng.uniform(0.5, 1.5, 3)
        _, grad, _ = fusion.fusion_loss_and_grad(omega, queries, samples, model.v_star)

        def learn_f(x):
            return fusion.fusion_loss_and_grad(x, queries, samples, model.v_star)[0]

        fd = _fd_gradient(learn_f, omega.copy(), h=1e-6)
        worst_learn = max(worst_learn, _rel_err(grad, fd))

    checks = {
        "sequence_loss_gradient": {
            "instances": 20,
            "worst_rel_err": worst_local,
            "tolerance": 1e-5,
            "passed": worst_local < 1e-5,
        },
        "full_objective_gradient": {
            "instances": 20,
            "worst_rel_err": worst_global,
            "tolerance": 1e-5,
            "passed": worst_global < 1e-5,
        },
        "fusion_weight_gradient": {
            "instances": 20,
            "worst_rel_err": worst_learn,
            "tolerance": 1e-5,
            "passed": worst_learn < 1e-5,
        },
        "alignment_step_gradient": _alignment_gradient_check(seed),
    }
    passed = all(c["passed"] for c in checks.values())
    return _record(
        "gradients",
        "analytic gradients match central finite differences",
        seed,
        passed,
        checks,
        started,
    )


def _alignment_gradient_check(seed: int) -> dict:
    rng = generator(seed, "grad-align")
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 10))
        a_t = attention.project_nonexpansive(rng.uniform(0.0, 1.0, (n, n)), 50)
        a_m = attention.project_nonexpansive(rng.uniform(0.0, 1.0, (n, n)), 50)
        lam = float(rng.uniform(0.0, 2.0))
        z = rng.standard_normal(n)
        grad = attention.alignment_energy_gradient(z, a_t, a_m, lam)

        def f(x):
            return attention.alignment_energy(x, a_t, a_m, lam)

        fd = _fd_gradient(f, z.copy(), h=1e-6)
        worst = max(worst, _rel_err(grad, fd))
    return {"instances": 20, "worst_rel_err": worst, "tolerance": 1e-6, "passed": worst < 1e-6}


def _descent_scene(seed: int, index: int) -> synth.SceneConfig:
    rng = generator(seed, "descent-sigmas", index)
    sigmas = tuple(rng.uniform(0.05, 0.2, 8).tolist())
    return synth.SceneConfig(
        frame_count=8,
        view_count=8,
        height=32,
        width=32,
        seed=derive_seed(seed, "descent-scene", index),
        sigmas=sigmas,
    )


def run_descent_suite(seed: int) -> dict:
    """Monotone descent on 20 scenes, stationarity at convergence, front-view advantage."""
    started = time.perf_counter()
    cfg = mvopt.MvOptConfig()
    violations = 0
    advantage_hits = 0
    per_seed = []
    for k in range(DESCENT_SCENES):
        scene = synth.generate_scene(_descent_scene(seed, k))
        refined, trace = mvopt.mvopt_run(scene.corrupted, cfg)
        ok, first = mvopt.check_monotone(trace, MONOTONE_TOL)
        if not ok:
            violations += 1
        before = mvopt.semantic_by_view(scene.corrupted)
        after = mvopt.semantic_by_view(refined)
        order = scene.rig.novel_order
        reduction = 1.0 - after / np.where(before > 0, before, 1.0)
        near = float(0.5 * (reduction[order[0]] + reduction[order[1]]))
        far = float(0.5 * (reduction[order[-1]] + reduction[order[-2]]))
        if near > far:
            advantage_hits += 1
        per_seed.append(
            {
                "scene": k,
                "monotone": bool(ok),
                "f_initial": float(trace.records[0].f_total),
                "f_final": float(trace.records[-1].f_total),
                "near_view_reduction": near,
                "far_view_reduction": far,
            }
        )

    stationarity = []
    stationary_ok = True
    for k in range(CONVERGENCE_SCENES):
        scene = synth.generate_scene(_descent_scene(seed, k))
        res = mvopt.mvopt_converge(scene.corrupted, cfg, sweep_tol=SWEEP_TOL)
        ok, _ = mvopt.check_monotone(res.trace, MONOTONE_TOL)
        norms = mvopt.block_stationarity(res.sequence, cfg)
        max_norm = float(norms.max())
        if not (res.converged and ok and max_norm < STATIONARITY_TOL):
            stationary_ok = False
        stationarity.append(
            {
                "scene": k,
                "sweeps": res.sweeps,
                "converged": bool(res.converged),
                "max_block_gradient": max_norm,
            }
        )

    advantage_frac = advantage_hits / DESCENT_SCENES
    checks = {
        "monotone_descent": {
            "scenes": DESCENT_SCENES,
            "tolerance": MONOTONE_TOL,
            "violations": violations,
            "passed": violations == 0,
        },
        "stationarity_at_convergence": {
            "scenes": CONVERGENCE_SCENES,
            "sweep_tolerance": SWEEP_TOL,
            "gradient_tolerance": STATIONARITY_TOL,
            "runs": stationarity,
            "passed": stationary_ok,
        },
        "front_view_advantage": {
            "scenes": DESCENT_SCENES,
            "fraction": advantage_frac,
            "required": 0.8,
            "per_seed": per_seed,
            "passed": advantage_frac >= 0.8,
        },
    }
    passed = all(c["passed"] for c in checks.values())
    return _record(
        "descent",
        "block-coordinate refinement descends monotonically to stationary points",
        seed,
        passed,
        checks,
        started,
    )


def run_effectiveness_suite(seed: int) -> dict:
    """The reference scene's objective at least halves in one refinement run."""
    started = time.perf_counter()
    config = synth.SceneConfig(
        frame_count=8,
        view_count=8,
        height=32,
        width=32,
        seed=42,
        sigmas=(0.05, 0.1, 0.2, 0.1, 0.05, 0.2, 0.1, 0.15),
    )
    scene = synth.generate_scene(config)
    _, trace = mvopt.mvopt_run(scene.corrupted, mvopt.MvOptConfig())
    f0 = trace.records[0].f_total
    f1 = trace.records[-1].f_total
    ratio = f1 / f0
    checks = {
        "objective_halved": {
            "f_initial": f0,
            "f_final": f1,
            "ratio": ratio,
            "required": 0.5,
            "passed": ratio <= 0.5,
        }
    }
    return _record(
        "effectiveness",
        "refinement halves the sequence objective on the reference scene",
        seed,
        checks["objective_halved"]["passed"],
        checks,
        started,
    )


def run_synth_suite(seed: int) -> dict:
    """Rendering round trips, cross-view geometry, corruption statistics."""
    started = time.perf_counter()
    checks = {}
    worst_rt = 0.0
    worst_y = 0.0
    worst_bone = 0.0
    for k in range(5):
        config = synth.SceneConfig(
            frame_count=6,
            view_count=8,
            height=32,
            width=32,
            seed=derive_seed(seed, "synth-scene", k),
        )
        scene = synth.generate_scene(config)
        skel = synth.make_skeleton_sequence(config)
        lengths = []
        for t in range(config.frame_count):
            lengths.append(
                [
                    float(np.linalg.norm(skel.positions[t, c] - skel.positions[t, p]))
                    for p, c in skel.bones
                ]
            )
        lengths = np.array(lengths)
        worst_bone = max(worst_bone, float(np.abs(lengths - lengths[0]).max()))
        for t in range(config.frame_count):
            ys = np.array([scene.keypoints[t][m].xy[:, 1] for m in range(8)])
            worst_y = max(worst_y, float(np.abs(ys - ys[0]).max()))
            for m in range(8):
                got = mvopt.extract_pose(scene.clean.frames[t, m])
                err = np.sqrt(((got.xy - scene.keypoints[t][m].xy) ** 2).sum(axis=1)).max()
                worst_rt = max(worst_rt, float(err))
    checks["render_extract_round_trip"] = {
        "worst_err_px": worst_rt,
        "tolerance": 0.5,
        "passed": worst_rt <= 0.5,
    }
    checks["cross_view_y_consistency"] = {
        "worst_err": worst_y,
        "tolerance": 1e-9,
        "passed": worst_y <= 1e-9,
    }
    checks["bone_length_drift"] = {
        "worst_drift": worst_bone,
        "tolerance": 1e-9,
        "passed": worst_bone <= 1e-9,
    }

    # corruption strictly raises the sequence objective
    cfg = mvopt.MvOptConfig()
    raised = 0
    for k in range(20):
        rng = generator(seed, "synth-corrupt", k)
        config = synth.SceneConfig(
            frame_count=4,
            view_count=4,
            height=24,
            width=24,
            seed=derive_seed(seed, "synth-corrupt-scene", k),
            sigmas=tuple(rng.uniform(0.05, 0.2, 4).tolist()),
        )
        scene = synth.generate_scene(config)
        if mvopt.global_objective(scene.corrupted, cfg) > mvopt.global_objective(
            scene.clean, cfg
        ):
            raised += 1
    checks["corruption_raises_objective"] = {"seeds": 20, "raised": raised, "passed": raised == 20}
    passed = all(c["passed"] for c in checks.values())
    return _record(
        "synth",
        "scene generation is deterministic, rigid and geometrically consistent",
        seed,
        passed,
        checks,
        started,
    )


def run_determinism_suite(seed: int) -> dict:
    """Bitwise repeatability of generation, sampling and refinement."""
    started = time.perf_counter()
    checks = {}
    config = synth.SceneConfig(
        frame_count=4,
        view_count=4,
        height=24,
        width=24,
        seed=derive_seed(seed, "det-scene"),
        sigmas=(0.05, 0.1, 0.2, 0.1),
    )
    scene_a = synth.generate_scene(config)
    scene_b = synth.generate_scene(config)
    same_scene = bool(np.array_equal(scene_a.corrupted.frames, scene_b.corrupted.frames))
    doc_a = scene_to_document(config, scene_a.rig, scene_a.corrupted.frames, scene_a.keypoints)
    doc_b = scene_to_document(config, scene_b.rig, scene_b.corrupted.frames, scene_b.keypoints)
    checks["scene_regeneration"] = {"passed": same_scene and doc_a == doc_b}

    cfg = mvopt.MvOptConfig(passes_per_timestamp=2)
    _, trace_a = mvopt.mvopt_run(scene_a.corrupted, cfg)
    _, trace_b = mvopt.mvopt_run(scene_b.corrupted, cfg)
    same_trace = trace_a.records == trace_b.records
    checks["refinement_trace"] = {"records": len(trace_a), "passed": bool(same_trace)}

    model = fusion.NoisyViewModel(np.linspace(-1, 1, 4), [0.3, 0.9])
    s_a = fusion.sample_views(model, 1000, derive_seed(seed, "det-samples"))
    s_b = fusion.sample_views(model, 1000, derive_seed(seed, "det-samples"))
    checks["sampling"] = {"passed": bool(np.array_equal(s_a, s_b))}
    passed = all(c["passed"] for c in checks.values())
    return _record(
        "determinism",
        "identical seeds and configs reproduce results bit for bit",
        seed,
        passed,
        checks,
        started,
    )


SUITES = {
    "score": run_score_suite,
    "fusion": run_fusion_suite,
    "fusion-learn": run_fusion_learn_suite,
    "attention": run_attention_suite,
    "gradients": run_gradient_suite,
    "descent": run_descent_suite,
    "effectiveness": run_effectiveness_suite,
    "synth": run_synth_suite,
    "determinism": run_determinism_suite,
}


def run_verify(suite: str = "all", seed: int = 0) -> dict:
    """Run one suite or all of them; returns the report document."""
    if suite == "all":
        names = list(SUITES)
    elif suite in SUITES:
        names = [suite]
    else:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or all")
    started = time.perf_counter()
    records = [SUITES[name](seed) for name in names]
    return {
        "version": "mvkit-report-1",
        "suite": suite,
        "seed": seed,
        "suites": records,
        "overall_pass": all(r["passed"] for r in records),
        "runtime_ms": round(1000.0 * (time.perf_counter() - started), 3),
    }


def strip_runtime(report: dict) -> dict:
    """Copy of a report with runtime fields removed (for byte comparisons)."""
    out = {k: v for k, v in report.items() if k != "runtime_ms"}
    out["suites"] = [{k: v for k, v in r.items() if k != "runtime_ms"} for r in report["suites"]]
    return out
