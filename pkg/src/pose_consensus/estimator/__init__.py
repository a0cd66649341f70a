"""Black-box pose-estimator abstraction: wire protocol, backends, caching,
and the synthetic simulator."""

from .backends import (
    CountingBackend,
    EchoBackend,
    EstimatorBackend,
    ProcessBackend,
    cached_estimate,
    estimate,
)
from .cache import ResultCache, frame_digest, request_key
from .protocol import (
    PROTOCOL_VERSION,
    EstimatorRequest,
    EstimatorResponse,
    canonical_direction,
    dumps_canonical,
    encode_failed_response,
    encode_hello,
    encode_hello_ack,
    encode_ok_response,
    encode_request,
    parse_hello,
    parse_hello_ack,
    parse_request,
    parse_response,
)
from .synthetic import (
    QUALITIES,
    ScenarioSet,
    SyntheticBackend,
    SyntheticScenario,
    VideoSpec,
    anchor_refs,
    frame_ref,
    synthetic_sample,
)

__all__ = [
    "CountingBackend",
    "EchoBackend",
    "EstimatorBackend",
    "ProcessBackend",
    "cached_estimate",
    "estimate",
    "ResultCache",
    "frame_digest",
    "request_key",
    "PROTOCOL_VERSION",
    "EstimatorRequest",
    "EstimatorResponse",
    "canonical_direction",
    "dumps_canonical",
    "encode_failed_response",
    "encode_hello",
    "encode_hello_ack",
    "encode_ok_response",
    "encode_request",
    "parse_hello",
    "parse_hello_ack",
    "parse_request",
    "parse_response",
    "QUALITIES",
    "ScenarioSet",
    "SyntheticBackend",
    "SyntheticScenario",
    "VideoSpec",
    "anchor_refs",
    "frame_ref",
    "synthetic_sample",
]
