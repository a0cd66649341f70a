import json
import math
import subprocess
import sys

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from pose_consensus.errors import (
    BackendTimeout,
    BackendUnavailable,
    ManifestError,
    MalformedResponse,
)
from pose_consensus.estimator import protocol
from pose_consensus.estimator.backends import (
    CountingBackend,
    EchoBackend,
    ProcessBackend,
    cached_estimate,
    estimate,
)
from pose_consensus.estimator.cache import ResultCache, frame_digest, request_key
from pose_consensus.estimator.protocol import EstimatorRequest
from pose_consensus.estimator.synthetic import (
    ScenarioSet,
    SyntheticBackend,
    SyntheticScenario,
    VideoSpec,
    anchor_refs,
    frame_ref,
    synthetic_sample,
)
from pose_consensus.geometry import RelativePose, dist_rot, dist_trans, validate_rotation
from pose_consensus.sampling import FrameSubset

from .conftest import ECHO_BACKEND

IDENTITY_R = np.eye(3)
ZERO_T = np.zeros(3)


def rot_z(deg: float) -> np.ndarray:
    return Rotation.from_euler("z", deg, degrees=True).as_matrix()


# ------------------------------------------------------------------ protocol


def test_request_round_trip():
    req = EstimatorRequest("r1", ("a.png", "b.png", "c.png"))
    line = protocol.encode_request(req)
    assert json.loads(line) == {"frames": ["a.png", "b.png", "c.png"], "id": "r1", "type": "estimate"}
    assert protocol.parse_request(line) == req


def test_request_lines_are_canonical_bytes():
    req = EstimatorRequest("r1", ("a", "b"))
    line = protocol.encode_request(req)
    assert line == '{"frames":["a","b"],"id":"r1","type":"estimate"}'
    assert protocol.encode_request(req) == line


def test_request_requires_two_frames():
    with pytest.raises(ValueError):
        EstimatorRequest("r1", ("only",))
    with pytest.raises(ValueError):
        EstimatorRequest("r1", ("a", ""))


def test_ok_response_round_trip():
    line = protocol.encode_ok_response("r9", rot_z(30), np.array([0.0, 0.0, 2.0]))
    resp = protocol.parse_response(line, expected_id="r9")
    assert resp.ok
    assert resp.request_id == "r9"
    validate_rotation(np.asarray(resp.rotation).reshape(3, 3))
    np.testing.assert_array_equal(resp.pose.translation, [0.0, 0.0, 1.0])
    assert resp.line == line


def test_failed_response_omits_pose_fields():
    line = protocol.encode_failed_response("r2")
    assert json.loads(line) == {"id": "r2", "status": "failed", "type": "result"}
    resp = protocol.parse_response(line, expected_id="r2")
    assert not resp.ok
    assert resp.pose is None


def test_response_id_mismatch():
    line = protocol.encode_ok_response("r1", IDENTITY_R, ZERO_T)
    with pytest.raises(MalformedResponse):
        protocol.parse_response(line, expected_id="other")


@pytest.mark.parametrize(
    "line",
    [
        "not json at all",
        '{"id":"r1","type":"estimate"}',                       # wrong type
        '{"id":"r1","status":"weird","type":"result"}',        # bad status
        '{"status":"ok","type":"result"}',                     # missing id
        '{"id":"r1","status":"ok","type":"result"}',           # ok without pose
        '{"id":"r1","rotation":[1,0,0],"status":"ok","translation":[0,0,0],"type":"result"}',
        '{"id":"r1","rotation":[1,0,0,0,1,0,0,0,true],"status":"ok","translation":[0,0,0],"type":"result"}',
        '{"id":"r1","rotation":[1,0,0,0,1,0,0,0,"1"],"status":"ok","translation":[0,0,0],"type":"result"}',
    ],
)
def test_response_malformed_lines(line):
    with pytest.raises(MalformedResponse):
        protocol.parse_response(line, expected_id="r1")


def test_response_rejects_nonfinite_values():
    obj = {
        "id": "r1",
        "rotation": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1e400],
        "status": "ok",
        "translation": [0.0, 0.0, 0.0],
        "type": "result",
    }
    with pytest.raises(MalformedResponse):
        protocol.parse_response(json.dumps(obj), expected_id="r1")


def test_response_tolerates_small_rotation_drift():
    noisy = rot_z(20) + 1e-5 * np.ones((3, 3))
    obj = json.loads(protocol.encode_ok_response("r1", rot_z(20), np.array([1.0, 0.0, 0.0])))
    obj["rotation"] = [float(v) for v in noisy.reshape(-1)]
    resp = protocol.parse_response(protocol.dumps_canonical(obj), expected_id="r1")
    validate_rotation(np.asarray(resp.rotation).reshape(3, 3))
    assert dist_rot(np.asarray(resp.rotation).reshape(3, 3), rot_z(20)) < 1e-4


def test_response_rejects_large_rotation_drift():
    noisy = rot_z(20) + 0.02 * np.ones((3, 3))
    obj = json.loads(protocol.encode_ok_response("r1", rot_z(20), np.array([1.0, 0.0, 0.0])))
    obj["rotation"] = [float(v) for v in noisy.reshape(-1)]
    with pytest.raises(MalformedResponse):
        protocol.parse_response(protocol.dumps_canonical(obj), expected_id="r1")


def test_hello_round_trip():
    line = protocol.encode_hello("dust3r", "2.1")
    assert protocol.parse_hello(line) == ("dust3r", "2.1")
    ack = protocol.encode_hello_ack()
    assert ack == '{"protocol":1,"type":"hello-ack"}'
    protocol.parse_hello_ack(ack)


def test_hello_rejects_wrong_protocol():
    with pytest.raises(MalformedResponse):
        protocol.parse_hello('{"backend":"x","protocol":2,"type":"hello","version":"1"}')
    with pytest.raises(MalformedResponse):
        protocol.parse_hello_ack('{"protocol":1,"type":"hello"}')


def test_canonical_direction_rounds_to_float32():
    t = np.array([0.2, -0.4, 0.9])
    direction = protocol.canonical_direction(t)
    assert math.isclose(float(np.linalg.norm(direction)), 1.0, abs_tol=1e-6)
    # every component survives a float32 round trip unchanged
    np.testing.assert_array_equal(direction, direction.astype(np.float32).astype(float))


def test_canonical_direction_reapplication_moves_at_most_one_ulp():
    # canonicalization snaps a float64 unit vector onto the float32 grid;
    # re-normalizing a snapped vector may flip the last mantissa bit, never more
    rng = np.random.default_rng(0)
    for _ in range(200):
        d = protocol.canonical_direction(rng.normal(size=3))
        again = protocol.canonical_direction(d)
        ulp = np.spacing(np.abs(d).astype(np.float32)).astype(float)
        assert np.all(np.abs(again - d) <= ulp)


def test_canonical_direction_zero_for_tiny_vectors():
    np.testing.assert_array_equal(protocol.canonical_direction(np.zeros(3)), np.zeros(3))
    np.testing.assert_array_equal(
        protocol.canonical_direction(np.array([1e-12, 0.0, 0.0])), np.zeros(3)
    )


def test_scaled_translation_ingests_to_identical_direction():
    """Magnitude carries no information; any positive rescale of an emitted
    translation must parse back to the very same unit vector."""
    rng = np.random.default_rng(1)
    for _ in range(200):
        t = rng.normal(size=3)
        line = protocol.encode_ok_response("r", IDENTITY_R, t)
        base = protocol.parse_response(line, expected_id="r").pose.translation
        scaled = json.loads(line)
        scaled["translation"] = [7.3 * v for v in scaled["translation"]]
        again = protocol.parse_response(protocol.dumps_canonical(scaled), expected_id="r")
        np.testing.assert_array_equal(again.pose.translation, base)


# --------------------------------------------------------------------- cache


def test_frame_digest_file_content_vs_name(tmp_path):
    f = tmp_path / "frame.png"
    f.write_bytes(b"pixels-v1")
    by_content = frame_digest(str(f))
    f.write_bytes(b"pixels-v2")
    assert frame_digest(str(f)) != by_content
    assert frame_digest("no/such/file.png") == frame_digest("no/such/file.png")
    assert frame_digest("no/such/file.png") != frame_digest("no/such/other.png")


def test_request_key_sensitivity():
    key = request_key("b", "1", ("f1", "f2"))
    assert key == request_key("b", "1", ("f1", "f2"))
    assert key != request_key("b", "2", ("f1", "f2"))
    assert key != request_key("c", "1", ("f1", "f2"))
    assert key != request_key("b", "1", ("f2", "f1"))
    assert key != request_key("b", "1", ("f1", "f2", "f3"))
    int(key, 16)  # hex digest


def test_cache_put_get_round_trip(tmp_path):
    cache = ResultCache(tmp_path)
    line = protocol.encode_ok_response("r1", IDENTITY_R, ZERO_T)
    key = request_key("echo", "1", ("a", "b"))
    assert cache.get(key) is None
    cache.put(key, line)
    assert cache.get(key) == line
    # no stray temp files left behind
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".tmp-")] == []


def test_cache_corrupt_entry_is_a_miss(tmp_path, caplog):
    cache = ResultCache(tmp_path)
    key = request_key("echo", "1", ("a", "b"))
    cache.put(key, "garbage that will not parse")
    with caplog.at_level("WARNING"):
        assert cache.get(key) is None
    assert any("cache" in r.message.lower() for r in caplog.records)


def test_cached_estimate_hits_skip_the_backend(tmp_path):
    cache = ResultCache(tmp_path)
    backend = CountingBackend(EchoBackend())
    request = EstimatorRequest("r1", ("a.png", "b.png"))
    first = cached_estimate(cache, backend, request)
    second = cached_estimate(cache, backend, request)
    assert backend.calls == 1
    assert first.line == second.line


def test_cached_estimate_relabels_hits(tmp_path):
    cache = ResultCache(tmp_path)
    backend = CountingBackend(EchoBackend())
    cached_estimate(cache, backend, EstimatorRequest("first-id", ("a", "b")))
    hit = cached_estimate(cache, backend, EstimatorRequest("second-id", ("a", "b")))
    assert backend.calls == 1
    assert hit.request_id == "second-id"
    assert hit.ok


def test_cached_estimate_none_cache_calls_through():
    backend = CountingBackend(EchoBackend())
    request = EstimatorRequest("r1", ("a", "b"))
    cached_estimate(None, backend, request)
    cached_estimate(None, backend, request)
    assert backend.calls == 2


def test_cached_estimate_does_not_cache_malformed_lines(tmp_path):
    class GarbageBackend:
        backend_id = "junk"
        backend_version = "1"

        def estimate_line(self, request):
            return "not a protocol line"

        def close(self):
            pass

    cache = ResultCache(tmp_path)
    request = EstimatorRequest("r1", ("a", "b"))
    with pytest.raises(MalformedResponse):
        cached_estimate(cache, GarbageBackend(), request)
    assert cache.get(request_key("junk", "1", ("a", "b"))) is None


# ----------------------------------------------------------- process backend


def test_process_backend_handshake_and_estimate(echo_command):
    backend = ProcessBackend(echo_command)
    try:
        assert (backend.backend_id, backend.backend_version) == ("echo", "1")
        resp = estimate(backend, EstimatorRequest("r1", ("a.png", "b.png")))
        assert resp.ok
        np.testing.assert_array_equal(np.asarray(resp.rotation).reshape(3, 3), np.eye(3))
        # several sequential requests keep the strict alternation intact
        for i in range(5):
            assert estimate(backend, EstimatorRequest(f"r{i}", ("a", "b"))).ok
    finally:
        backend.close()


def test_process_backend_failed_results(echo_command):
    backend = ProcessBackend(echo_command + " --fail-substr broken")
    try:
        resp = estimate(backend, EstimatorRequest("r1", ("ok.png", "broken.png")))
        assert not resp.ok
        assert resp.pose is None
        assert estimate(backend, EstimatorRequest("r2", ("ok.png", "fine.png"))).ok
    finally:
        backend.close()


def test_process_backend_garbage_line(echo_command):
    backend = ProcessBackend(echo_command + " --garbage")
    try:
        with pytest.raises(MalformedResponse):
            estimate(backend, EstimatorRequest("r1", ("a", "b")))
    finally:
        backend.close()


def test_process_backend_death_mid_run(echo_command):
    backend = ProcessBackend(echo_command + " --die-after 1")
    try:
        assert estimate(backend, EstimatorRequest("r1", ("a", "b"))).ok
        with pytest.raises(BackendUnavailable):
            estimate(backend, EstimatorRequest("r2", ("a", "b")))
    finally:
        backend.close()


def test_process_backend_timeout(echo_command):
    backend = ProcessBackend(echo_command + " --hang", timeout_s=0.5)
    try:
        with pytest.raises(BackendTimeout):
            estimate(backend, EstimatorRequest("r1", ("a", "b")))
    finally:
        backend.close()


def test_process_backend_bad_hello(echo_command):
    with pytest.raises(MalformedResponse):
        ProcessBackend(echo_command + " --bad-hello")


def test_process_backend_missing_binary():
    with pytest.raises(BackendUnavailable):
        ProcessBackend("/no/such/binary-anywhere")


def test_process_backend_close_is_idempotent(echo_command):
    backend = ProcessBackend(echo_command)
    backend.close()
    backend.close()


def test_echo_child_reproduces_golden_transcript(fixtures_dir):
    requests = (fixtures_dir / "protocol_requests.jsonl").read_bytes()
    golden = (fixtures_dir / "protocol_golden.jsonl").read_bytes()
    proc = subprocess.run(
        [sys.executable, str(ECHO_BACKEND)],
        input=requests,
        stdout=subprocess.PIPE,
        timeout=30,
    )
    assert proc.returncode == 0
    assert proc.stdout == golden


# ----------------------------------------------------------------- synthetic


def scenario(sigma_rot=0.0, sigma_dir=0.0, quality="consistent", offset_deg=0.0, seed=0):
    offset = RelativePose(rotation=rot_z(offset_deg), translation=np.zeros(3))
    return SyntheticScenario(
        pair_id="p0",
        ground_truth=RelativePose(
            rotation=rot_z(12), translation=np.array([0.2, -0.4, 0.9])
        ),
        pair_sigma_rot=sigma_rot,
        pair_sigma_dir=sigma_dir,
        videos=(VideoSpec(quality, offset, sigma_rot, sigma_dir),),
        seed=seed,
    )


def subset_of(*indices) -> FrameSubset:
    return FrameSubset(pair_anchor=anchor_refs("p0"), interior_indices=tuple(indices))


def test_synthetic_zero_noise_reproduces_ground_truth():
    scn = scenario(sigma_rot=0.0, sigma_dir=0.0)
    resp = synthetic_sample(scn, 0, subset_of(3, 7, 11))
    gt = scn.ground_truth
    assert dist_rot(np.asarray(resp.rotation).reshape(3, 3), gt.rotation) <= 1e-12
    # the wire carries float32 unit directions, so agreement is float32-level
    d, defined = dist_trans(resp.pose.translation, gt.translation)
    assert defined and d < 1e-6
    np.testing.assert_array_equal(
        resp.pose.translation, protocol.canonical_direction(gt.translation)
    )


def test_synthetic_zero_noise_pair_only_baseline():
    scn = scenario()
    resp = synthetic_sample(scn, None, subset_of())
    assert dist_rot(np.asarray(resp.rotation).reshape(3, 3), scn.ground_truth.rotation) <= 1e-12


def test_synthetic_degenerate_offset_is_exactly_applied():
    scn = scenario(quality="degenerate_wrong", offset_deg=180.0)
    gt = scn.ground_truth
    for subset in (subset_of(3, 7, 11), subset_of(2, 8, 14)):
        resp = synthetic_sample(scn, 0, subset)
        got = np.asarray(resp.rotation).reshape(3, 3)
        assert abs(dist_rot(got, gt.rotation) - math.pi) <= 1e-9


def test_synthetic_lines_are_deterministic():
    scn = scenario(sigma_rot=math.radians(5), sigma_dir=math.radians(5), seed=3)
    a = synthetic_sample(scn, 0, subset_of(3, 7, 11), request_id="x")
    b = synthetic_sample(scn, 0, subset_of(3, 7, 11), request_id="x")
    assert a.line == b.line


def test_synthetic_noise_keyed_by_subset_contents():
    scn = scenario(sigma_rot=math.radians(5), sigma_dir=math.radians(5), seed=3)
    a = synthetic_sample(scn, 0, subset_of(3, 7, 11))
    b = synthetic_sample(scn, 0, subset_of(3, 7, 12))
    assert a.line != b.line
    # the pair-only draw lives in its own stream
    pair = synthetic_sample(scn, None, subset_of())
    anchors_only = synthetic_sample(scn, 0, subset_of())
    assert pair.line != anchors_only.line


def test_synthetic_consistent_noise_magnitude():
    """Half-normal rotation noise at sigma two degrees has mean ~1.6 degrees."""
    sigma = math.radians(2.0)
    scn = SyntheticScenario(
        pair_id="p0",
        ground_truth=RelativePose(rotation=rot_z(12), translation=np.array([0.2, -0.4, 0.9])),
        pair_sigma_rot=0.0,
        pair_sigma_dir=0.0,
        videos=(
            VideoSpec("consistent", RelativePose.identity(), sigma, sigma),
        ),
        seed=5,
    )
    gt_r = scn.ground_truth.rotation
    total = 0.0
    n = 10_000
    for i in range(n):
        resp = synthetic_sample(scn, 0, subset_of(2 + i, 10_000 + i))
        total += math.degrees(dist_rot(np.asarray(resp.rotation).reshape(3, 3), gt_r))
    assert 1.2 <= total / n <= 2.0


def test_video_spec_degenerate_requires_offset():
    with pytest.raises(ValueError):
        VideoSpec("degenerate_wrong", RelativePose.identity(), 0.0, 0.0)
    with pytest.raises(ValueError):
        VideoSpec("weird-quality", RelativePose.identity(), 0.0, 0.0)
    with pytest.raises(ValueError):
        VideoSpec("consistent", RelativePose.identity(), -0.1, 0.0)


def test_scenario_set_round_trip(tmp_path):
    scn = scenario(
        sigma_rot=0.01, sigma_dir=0.02, quality="degenerate_wrong", offset_deg=60, seed=4
    )
    sset = ScenarioSet(seed=4, pairs={"p0": scn})
    again = ScenarioSet.from_dict(sset.to_dict())
    assert again.to_dict() == sset.to_dict()
    assert again.version_digest() == sset.version_digest()

    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(sset.to_dict()))
    loaded = ScenarioSet.load(path)
    assert loaded.to_dict() == sset.to_dict()


def test_scenario_set_digest_tracks_content():
    a = ScenarioSet(seed=1, pairs={"p0": scenario(seed=1)})
    b = ScenarioSet(seed=2, pairs={"p0": scenario(seed=2)})
    c = ScenarioSet(seed=1, pairs={"p0": scenario(seed=1, sigma_rot=0.5)})
    assert a.version_digest() != b.version_digest()
    assert a.version_digest() != c.version_digest()


def test_scenario_set_rejects_incoherent_seeds():
    with pytest.raises(ValueError):
        ScenarioSet(seed=4, pairs={"p0": scenario(seed=1)})
    with pytest.raises(ValueError):
        ScenarioSet(seed=0, pairs={"other-id": scenario(seed=0)})


def test_scenario_set_rejects_bad_payloads():
    with pytest.raises(ManifestError):
        ScenarioSet.from_dict({"schema_version": 99, "seed": 0, "pairs": {}})
    with pytest.raises(ManifestError):
        ScenarioSet.from_dict({"seed": 0})


def test_synthetic_backend_answers_by_frame_refs():
    scn = scenario()
    backend = SyntheticBackend(ScenarioSet(seed=0, pairs={"p0": scn}))
    a, b = anchor_refs("p0")
    frames = (a, b, frame_ref("p0", 0, 3), frame_ref("p0", 0, 7))
    resp = estimate(backend, EstimatorRequest("r1", frames))
    assert resp.ok
    direct = synthetic_sample(scn, 0, subset_of(3, 7), request_id="r1")
    assert resp.line == direct.line


def test_synthetic_backend_pair_only_request():
    scn = scenario()
    backend = SyntheticBackend(ScenarioSet(seed=0, pairs={"p0": scn}))
    resp = estimate(backend, EstimatorRequest("r1", anchor_refs("p0")))
    assert resp.ok


def test_synthetic_backend_rejects_unknown_pairs():
    backend = SyntheticBackend(ScenarioSet(seed=0, pairs={"p0": scenario()}))
    with pytest.raises(ValueError):
        backend.estimate_line(EstimatorRequest("r1", anchor_refs("p-unknown")))
