"""Stdio bridge that serves pose estimates over the line-delimited protocol.

The bridge is a standalone process: a host launches it, exchanges a
hello/hello-ack handshake, then writes one estimate request per line and
reads one result per line. Heavy model weights load once per process;
per-request errors downgrade to ``status: failed`` results instead of
killing the stream.
"""

from .models import EchoModel, ModelUnavailable, load_model
from .protocol import ProtocolError, Request
from .serve import serve

__version__ = "0.1.0"

__all__ = [
    "EchoModel",
    "ModelUnavailable",
    "ProtocolError",
    "Request",
    "load_model",
    "serve",
]
