"""Exception types shared across the package.

Everything raised on purpose derives from :class:`PoseConsensusError` so
callers (the CLI, the service layer) can map failures to exit codes or HTTP
status codes without matching on strings.
"""


class PoseConsensusError(Exception):
    """Base class for all errors raised by this package."""


class NotARotation(PoseConsensusError):
    """A 3x3 matrix failed the orthonormality / determinant check."""


class DegenerateMatrix(PoseConsensusError):
    """A matrix could not be projected to a rotation (rank deficient)."""


class VideoTooShort(PoseConsensusError):
    """A video does not have enough frames for the requested subset size."""


class InsufficientSamples(PoseConsensusError):
    """Fewer than two usable samples; a medoid is not defined."""


class MissingPairBaseline(PoseConsensusError):
    """A score mode needs the pair-only pose but none is available."""


class NoVideos(PoseConsensusError):
    """Selection was asked to pick a video from an empty list."""


class NoSamples(PoseConsensusError):
    """Oracle selection got an empty candidate list."""


class BackendUnavailable(PoseConsensusError):
    """The estimator backend could not be started or has gone away."""


class BackendTimeout(PoseConsensusError):
    """The estimator backend did not answer within the deadline."""


class MalformedResponse(PoseConsensusError):
    """The estimator backend sent a line that violates the wire protocol."""


class ManifestError(PoseConsensusError):
    """An input document (manifest, registry, or scenario file) is invalid."""


class EmptyReport(PoseConsensusError):
    """Aggregation was asked to summarize zero rows."""


class EmptySelection(PoseConsensusError):
    """Pair selection produced no pairs (empty yaw band or empty manifest)."""
