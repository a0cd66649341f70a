"""The request/response loop."""

from __future__ import annotations

import sys
import traceback

from . import protocol


def serve(model, stdin=None, stdout=None, stderr=None) -> int:
    """Serve estimates over text streams until the input closes.

    Sends the hello line, waits for the host's hello-ack, then answers one
    result per request line in order. A model error downgrades to a
    ``failed`` result for that request; a protocol violation by the host is
    unrecoverable (requests could no longer be matched to results) and ends
    the loop with exit code 1.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr

    _say(stdout, protocol.encode_hello(model.name, model.version))

    ack = stdin.readline()
    if not ack:
        return 0  # host vanished before the handshake; nothing to clean up
    try:
        protocol.parse_hello_ack(ack)
    except protocol.ProtocolError as exc:
        print(f"handshake failed: {exc}", file=stderr)
        return 1

    for line in stdin:
        if not line.strip():
            continue
        try:
            request = protocol.parse_request(line)
        except protocol.ProtocolError as exc:
            print(f"unusable request line: {exc}", file=stderr)
            return 1
        try:
            rotation, translation = model.estimate(request.frames)
            result = protocol.encode_ok_result(request.request_id, rotation, translation)
        except Exception:
            traceback.print_exc(file=stderr)
            result = protocol.encode_failed_result(request.request_id)
        _say(stdout, result)
    return 0


def _say(stream, line: str) -> None:
    stream.write(line + "\n")
    stream.flush()
