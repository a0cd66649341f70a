"""Estimator backends and the estimate entry points.

A backend is anything with ``backend_id``, ``backend_version`` and an
``estimate_line(request) -> str`` method returning one raw response line.
Keeping the byte-level line as the backend contract means the cache can
store responses verbatim and identical requests stay byte-identical no
matter whether they were answered live or from disk.
"""

from __future__ import annotations

import dataclasses
import queue
import shlex
import subprocess
import threading
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from ..errors import BackendTimeout, BackendUnavailable
from . import protocol
from .cache import ResultCache, request_key
from .protocol import EstimatorRequest, EstimatorResponse

DEFAULT_TIMEOUT_S = 300.0


@runtime_checkable
class EstimatorBackend(Protocol):
    backend_id: str
    backend_version: str

    def estimate_line(self, request: EstimatorRequest) -> str: ...

    def close(self) -> None: ...


class EchoBackend:
    """Answers every request with the identity pose. Used for plumbing tests."""

    backend_id = "echo"
    backend_version = "1"

    def estimate_line(self, request: EstimatorRequest) -> str:
        return protocol.encode_ok_response(request.request_id, np.eye(3), np.zeros(3))

    def close(self) -> None:
        pass


class CountingBackend:
    """Wrapper that counts actual backend invocations (i.e. cache misses)."""

    def __init__(self, inner: EstimatorBackend) -> None:
        self._inner = inner
        self._lock = threading.Lock()
        self.calls = 0

    @property
    def backend_id(self) -> str:
        return self._inner.backend_id

    @property
    def backend_version(self) -> str:
        return self._inner.backend_version

    def estimate_line(self, request: EstimatorRequest) -> str:
        with self._lock:
            self.calls += 1
        return self._inner.estimate_line(request)

    def close(self) -> None:
        self._inner.close()


class ProcessBackend:
    """A child process speaking the line protocol over stdin/stdout.

    The child announces itself with a hello line; we answer hello-ack and
    from then on strictly alternate one request line / one response line.
    A reader thread drains stdout so timeouts can be enforced without
    platform-specific non-blocking I/O.
    """

    def __init__(self, command, timeout_s: float = DEFAULT_TIMEOUT_S) -> None:
        self.timeout_s = timeout_s
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise ValueError("backend command is empty")
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailable(f"could not launch backend {argv[0]!r}: {exc}") from exc
        self._lines: queue.Queue[Optional[str]] = queue.Queue()
        self._reader = threading.Thread(target=self._drain_stdout, daemon=True)
        self._reader.start()
        self._lock = threading.Lock()
        try:
            hello = self._next_line("handshake")
            self.backend_id, self.backend_version = protocol.parse_hello(hello)
            self._send(protocol.encode_hello_ack())
        except Exception:
            self.close()
            raise

    def _drain_stdout(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _send(self, line: str) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendUnavailable(f"backend process went away: {exc}") from exc

    def _next_line(self, what: str) -> str:
        try:
            line = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            self._proc.kill()
            raise BackendTimeout(f"backend produced no {what} within {self.timeout_s:g}s")
        if line is None:
            code = self._proc.poll()
            raise BackendUnavailable(f"backend closed its stdout (exit status {code})")
        return line.rstrip("\n")

    def estimate_line(self, request: EstimatorRequest) -> str:
        with self._lock:  # the protocol allows one in-flight request
            self._send(protocol.encode_request(request))
            return self._next_line("response")

    def close(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        try:
            if proc.stdin is not None:
                proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


def estimate(backend: EstimatorBackend, request: EstimatorRequest) -> EstimatorResponse:
    """One backend call, parsed and ingested.

    Raises:
        BackendUnavailable, BackendTimeout: transport failures.
        MalformedResponse: wire-contract violations (including a response
            that answers some other request id).
    """
    line = backend.estimate_line(request)
    return protocol.parse_response(line, expected_id=request.request_id)


def cached_estimate(
    cache: Optional[ResultCache],
    backend: EstimatorBackend,
    request: EstimatorRequest,
) -> EstimatorResponse:
    """Like :func:`estimate` but consulting the result cache first.

    The key depends on the backend identity/version and the ordered frame
    contents, never on the request id, so a cache hit may have been written
    under a different id; the returned response is relabeled to match.
    """
    if cache is None:
        return estimate(backend, request)
    key = request_key(backend.backend_id, backend.backend_version, request.frame_refs)
    line = cache.get(key)
    if line is None:
        line = backend.estimate_line(request)
        response = protocol.parse_response(line, expected_id=request.request_id)
        cache.put(key, line)
        return response
    response = protocol.parse_response(line)
    if response.request_id != request.request_id:
        response = dataclasses.replace(response, request_id=request.request_id)
    return response
