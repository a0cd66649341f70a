"""Acceptance suite.

One test per headline guarantee the package makes. Each test prints a single
``[acceptance] <name>: PASS|FAIL (<measurements>)`` line before asserting, so
``pytest -v tests/test_acceptance.py`` reads as a checklist and a failure
still shows what was measured.

The six guarantees:

1. geometry-metric-contract   distance functions behave like metrics under
                              10^4 randomized trials (bi-invariance, range,
                              symmetry, agreement with an axis-angle oracle,
                              pose composition, translation sign/scale
                              invariance) in under 5 seconds.
2. medoid-exhaustive          the medoid vote matches an O(m^2) exhaustive
                              search exactly on 10^3 random instances in
                              under 5 seconds.
3. translation-scale          report files are byte-identical when every
                              backend translation is scaled by 7.3.
4. consensus-beats-baselines  across 10 fresh synthetic datasets of 200
                              pairs, medoid consensus beats the two-frame
                              baseline and naive averaging, oracle never
                              loses to medoid, and total scoring beats
                              med-only scoring, all in under 60 seconds.
5. metrics-reference          aggregate metrics match hand-computed fixtures
                              and a brute-force recomputation on 10^3 random
                              error tables to 1e-9.
6. end-to-end-determinism     two cold CLI runs produce byte-identical
                              reports, and a warm rerun answers entirely
                              from cache with the same report bytes.
"""

import json
import math
import time
from collections import defaultdict

import numpy as np
from scipy.spatial.transform import Rotation

from pose_consensus import cli, pipeline, synth
from pose_consensus.benchmark import ErrorRow, aggregate, accuracy_curve, pair_errors
from pose_consensus.consensus import ScoreMode, medoid, select_best
from pose_consensus.estimator import protocol
from pose_consensus.estimator.synthetic import SyntheticBackend
from pose_consensus.geometry import (
    Pose,
    RelativePose,
    dist_pose,
    dist_rot,
    dist_trans,
    relative_pose,
)

from .conftest import make_rng


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def test_c1_geometry_metric_contract():
    n = 10_000
    start = time.monotonic()
    rng = make_rng(20260819)

    r1 = Rotation.random(n, random_state=np.random.RandomState(1)).as_matrix()
    r2 = Rotation.random(n, random_state=np.random.RandomState(2)).as_matrix()
    q = Rotation.random(n, random_state=np.random.RandomState(3)).as_matrix()
    oracle = (Rotation.from_matrix(r1).inv() * Rotation.from_matrix(r2)).magnitude()
    t1 = rng.normal(size=(n, 3))
    t2 = rng.normal(size=(n, 3))
    trans_a = rng.normal(size=(n, 3))
    trans_b = rng.normal(size=(n, 3))

    worst = defaultdict(float)
    for i in range(n):
        d = dist_rot(r1[i], r2[i])
        assert -1e-12 <= d <= math.pi + 1e-12
        worst["rot_symmetry"] = max(worst["rot_symmetry"], abs(d - dist_rot(r2[i], r1[i])))
        worst["rot_left_invariance"] = max(
            worst["rot_left_invariance"], abs(d - dist_rot(q[i] @ r1[i], q[i] @ r2[i]))
        )
        worst["rot_right_invariance"] = max(
            worst["rot_right_invariance"], abs(d - dist_rot(r1[i] @ q[i], r2[i] @ q[i]))
        )
        worst["rot_oracle"] = max(worst["rot_oracle"], abs(d - oracle[i]))

        pose_a = Pose(rotation=r1[i], translation=trans_a[i])
        pose_b = Pose(rotation=r2[i], translation=trans_b[i])
        rel = relative_pose(pose_a, pose_b)
        worst["pose_composition"] = max(
            worst["pose_composition"],
            float(np.max(np.abs(rel.matrix @ pose_a.matrix - pose_b.matrix))),
        )

        dt, defined = dist_trans(t1[i], t2[i])
        assert defined and -1e-12 <= dt <= math.pi / 2 + 1e-12
        assert dist_trans(-t1[i], t2[i]) == (dt, True)
        assert dist_trans(t1[i], -t2[i]) == (dt, True)
        assert dist_trans(4.0 * t1[i], 0.25 * t2[i]) == (dt, True)
        scaled, _ = dist_trans(7.3 * t1[i], 0.9 * t2[i])
        worst["trans_generic_scale"] = max(worst["trans_generic_scale"], abs(scaled - dt))

    elapsed = time.monotonic() - start
    limits = {
        "rot_symmetry": 1e-9,
        "rot_left_invariance": 1e-9,
        "rot_right_invariance": 1e-9,
        "rot_oracle": 1e-9,
        "pose_composition": 1e-10,
        "trans_generic_scale": 1e-12,
    }
    ok = elapsed < 5.0 and all(worst[k] <= lim for k, lim in limits.items())
    detail = f"{n} trials in {elapsed:.2f}s; " + ", ".join(
        f"{k}={worst[k]:.2e}<={lim:.0e}" for k, lim in limits.items()
    )
    _report("geometry-metric-contract", ok, detail)


def test_c2_medoid_exhaustive():
    start = time.monotonic()
    rng = make_rng(77)
    worst_gap = 0.0
    mismatches = 0
    for trial in range(1000):
        m = int(rng.integers(2, 12))
        rotations = Rotation.random(m, random_state=np.random.RandomState(trial)).as_matrix()
        poses = [
            RelativePose(rotation=rotations[j], translation=rng.normal(size=3))
            for j in range(m)
        ]
        if trial % 5 == 0:
            poses[0] = RelativePose(rotation=poses[0].rotation, translation=np.zeros(3))
        index, d_med = medoid(poses)
        means = [
            np.mean([dist_pose(poses[i], poses[j]).total_rad for j in range(m) if j != i])
            for i in range(m)
        ]
        expected = int(np.argmin(means))
        mismatches += index != expected
        worst_gap = max(worst_gap, abs(d_med - means[expected]))
    elapsed = time.monotonic() - start
    ok = mismatches == 0 and worst_gap <= 1e-12 and elapsed < 5.0
    _report(
        "medoid-exhaustive",
        ok,
        f"1000 instances in {elapsed:.2f}s; index mismatches={mismatches}, "
        f"max |d_med - brute| = {worst_gap:.2e} <= 1e-12",
    )


class ScalingBackend:
    """Wraps a backend, multiplying every reported translation by a constant."""

    def __init__(self, inner, scale: float):
        self._inner = inner
        self._scale = scale
        self.backend_id = inner.backend_id
        self.backend_version = inner.backend_version

    def estimate_line(self, request) -> str:
        line = self._inner.estimate_line(request)
        obj = json.loads(line)
        if obj.get("status") == "ok":
            obj["translation"] = [self._scale * v for v in obj["translation"]]
        return protocol.dumps_canonical(obj)

    def close(self) -> None:
        self._inner.close()


def test_c3_translation_scale_invariance():
    params = synth.SynthParams(pairs=50, seed=424242)
    scenarios, manifest, registry = synth.generate(params)
    config = pipeline.RunConfig(seed=11)

    plain = pipeline.run_benchmark(
        manifest, registry, SyntheticBackend(scenarios), None, config
    )
    scaled = pipeline.run_benchmark(
        manifest, registry, ScalingBackend(SyntheticBackend(scenarios), 7.3), None, config
    )

    same_names = sorted(plain.files) == sorted(scaled.files)
    diff = [name for name in plain.files if plain.files[name] != scaled.files.get(name)]
    same_rows = list(plain.rows) == list(scaled.rows)
    ok = same_names and not diff and same_rows
    _report(
        "translation-scale",
        ok,
        f"50 pairs, scale 7.3: {len(plain.files)} report files byte-identical"
        + (f"; differing: {diff}" if diff else "")
        + ("" if same_rows else "; rows differ"),
    )


def test_c4_consensus_beats_baselines():
    start = time.monotonic()
    seeds = range(10)
    pairs_per_seed = 200
    wins = defaultdict(int)
    means_by_seed = []

    for seed in seeds:
        scenarios, manifest, registry = synth.generate(
            synth.SynthParams(pairs=pairs_per_seed, seed=seed)
        )
        backend = SyntheticBackend(scenarios)
        config = pipeline.RunConfig(seed=seed)
        sums = defaultdict(float)
        for pair in manifest.pairs:
            evaluation = pipeline.evaluate_pair(
                pair, registry.for_pair(pair.pair_id), backend, None, config
            )
            for row in evaluation.rows:
                sums[row.variant] += row.rot_err_deg
            med_only = select_best(evaluation.scores, pair.pair_id, ScoreMode.MED_ONLY)
            rot_deg, _ = pair_errors(med_only, relative_pose(pair.pose_a, pair.pose_b))
            sums["med_only"] += rot_deg
        means = {k: v / pairs_per_seed for k, v in sums.items()}
        means_by_seed.append(means)
        wins["medoid<pair_only"] += means["medoid"] < means["pair_only"]
        wins["medoid<average"] += means["medoid"] < means["average"]
        wins["oracle<=medoid"] += means["oracle"] <= means["medoid"]
        wins["total<med_only"] += means["medoid"] < means["med_only"]

    elapsed = time.monotonic() - start
    ok = (
        wins["medoid<pair_only"] >= 9
        and wins["medoid<average"] >= 9
        and wins["oracle<=medoid"] == 10
        and wins["total<med_only"] >= 8
        and elapsed < 60.0
    )
    typical = means_by_seed[0]
    _report(
        "consensus-beats-baselines",
        ok,
        f"10 seeds x {pairs_per_seed} pairs in {elapsed:.1f}s; "
        f"medoid<pair_only {wins['medoid<pair_only']}/10 (need 9), "
        f"medoid<average {wins['medoid<average']}/10 (need 9), "
        f"oracle<=medoid {wins['oracle<=medoid']}/10 (need 10), "
        f"total<med_only {wins['total<med_only']}/10 (need 8); "
        f"seed-0 mean rot err: medoid {typical['medoid']:.2f} deg, "
        f"pair_only {typical['pair_only']:.2f}, average {typical['average']:.2f}, "
        f"oracle {typical['oracle']:.2f}, med_only {typical['med_only']:.2f}",
    )


def test_c5_metrics_reference():
    def row(pair_id, rot, trans):
        return ErrorRow(pair_id, "medoid", rot, trans, "v0")

    deviations = []

    fixtures = [
        (aggregate([row("p0", 10.0, 10.0)]).auc30, 66.66666666666667),
        (aggregate([row("p0", 10.0, 40.0)]).auc30, 0.0),
        (aggregate([row("p0", 0.0, 0.0), row("p1", 0.0, 0.0)]).auc30, 100.0),
        (
            aggregate([row("p0", 10.0, 40.0)], auc_convention="mean_per_quantity").auc30,
            33.333333333333336,
        ),
        (aggregate([row("p0", 10.0, None)]).auc30, 66.66666666666667),
    ]
    deviations.extend(abs(got - want) for got, want in fixtures)

    strict = aggregate([row("p0", 5.0, 15.0)])
    exact_threshold_excluded = strict.r_acc[5] == 0.0 and strict.t_acc[15] == 0.0

    rng = make_rng(31337)
    monotone = True
    for _ in range(1000):
        n = int(rng.integers(1, 25))
        rows = []
        for i in range(n):
            trans = None if rng.uniform() < 0.2 else float(rng.uniform(0, 50))
            rows.append(row(f"p{i}", float(rng.uniform(0, 50)), trans))
        got = aggregate(rows)

        rots = [r.rot_err_deg for r in rows]
        deviations.append(abs(got.mre - sum(rots) / n))
        transes = [r.trans_err_deg for r in rows if r.trans_err_deg is not None]
        if transes:
            deviations.append(abs(got.mte - sum(transes) / len(transes)))
        for tau in (5, 15, 30):
            deviations.append(abs(got.r_acc[tau] - 100.0 * sum(r < tau for r in rots) / n))
        worst = [
            r.rot_err_deg if r.trans_err_deg is None else max(r.rot_err_deg, r.trans_err_deg)
            for r in rows
        ]
        expected_auc = sum(
            100.0 * sum(w < tau for w in worst) / n for tau in range(1, 31)
        ) / 30.0
        deviations.append(abs(got.auc30 - expected_auc))

        curve = accuracy_curve(rows)
        joint = [c[3] for c in curve]
        monotone = monotone and joint == sorted(joint)
        deviations.append(abs(sum(joint) / 30.0 - got.auc30))

    worst_dev = max(deviations)
    ok = worst_dev <= 1e-9 and exact_threshold_excluded and monotone
    _report(
        "metrics-reference",
        ok,
        f"5 fixtures + 1000 random tables: max deviation {worst_dev:.2e} <= 1e-9, "
        f"strict thresholds={'yes' if exact_threshold_excluded else 'NO'}, "
        f"curve monotone={'yes' if monotone else 'NO'}",
    )


def test_c6_end_to_end_determinism(tmp_path):
    data = tmp_path / "data"
    code = cli.main(
        [
            "synth", "--pairs", "2", "--frames-per-video", "24",
            "--seed", "7", "--out", str(data),
        ]
    )
    assert code == 0

    def run(out, cache):
        return cli.main(
            [
                "run",
                "--manifest", str(data / "manifest.json"),
                "--registry", str(data / "registry.json"),
                "--backend", f"synthetic:{data / 'scenario.json'}",
                "--seed", "3",
                "--cache-dir", str(cache),
                "--out", str(out),
            ]
        )

    assert run(tmp_path / "cold1", tmp_path / "cache1") == 0
    assert run(tmp_path / "cold2", tmp_path / "cache2") == 0
    assert run(tmp_path / "warm", tmp_path / "cache1") == 0

    names = sorted(p.name for p in (tmp_path / "cold1").iterdir())
    cold_diff = [
        name
        for name in names
        if (tmp_path / "cold1" / name).read_bytes() != (tmp_path / "cold2" / name).read_bytes()
    ]
    warm_diff = [
        name
        for name in names
        if name != "run_stats.json"
        and (tmp_path / "cold1" / name).read_bytes() != (tmp_path / "warm" / name).read_bytes()
    ]
    warm_stats = json.loads((tmp_path / "warm" / "run_stats.json").read_text())
    cold_stats = json.loads((tmp_path / "cold1" / "run_stats.json").read_text())

    ok = (
        not cold_diff
        and not warm_diff
        and cold_stats["backend_calls"] == 90
        and cold_stats["cache_hits"] == 0
        and warm_stats["backend_calls"] == 0
        and warm_stats["cache_hits"] == 90
    )
    _report(
        "end-to-end-determinism",
        ok,
        f"{len(names)} report files; cold/cold differing={cold_diff or 'none'}, "
        f"cold/warm differing (stats aside)={warm_diff or 'none'}, "
        f"warm backend_calls={warm_stats['backend_calls']} (want 0), "
        f"warm cache_hits={warm_stats['cache_hits']} (want 90)",
    )
