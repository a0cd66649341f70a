#!/usr/bin/env python3
"""Minimal line-protocol estimator used by the process-backend tests.

Speaks the estimator wire protocol on stdin/stdout and answers every
request with the identity pose.  Intentionally self-contained: it stands
in for a third-party estimator process, so it must not import the
package under test.

Flags (for exercising host-side failure handling):
  --fail-substr S   answer requests whose frame list mentions S with a
                    failed result instead of a pose
  --die-after N     exit abruptly after N responses
  --hang            read requests but never answer them
  --garbage         answer the first request with a non-JSON line
  --bad-hello       open with a malformed hello line
"""

import argparse
import json
import sys


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _emit(line):
    sys.stdout.write(line + "\n")
    sys.stdout.flush()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--fail-substr", default=None)
    parser.add_argument("--die-after", type=int, default=None)
    parser.add_argument("--hang", action="store_true")
    parser.add_argument("--garbage", action="store_true")
    parser.add_argument("--bad-hello", action="store_true")
    args = parser.parse_args()

    if args.bad_hello:
        _emit(_dumps({"type": "hello", "protocol": 999}))
    else:
        _emit(_dumps({"backend": "echo", "protocol": 1, "type": "hello", "version": "1"}))

    ack = sys.stdin.readline()
    if not ack:
        return 0
    obj = json.loads(ack)
    if obj.get("type") != "hello-ack":
        return 1

    answered = 0
    for raw in sys.stdin:
        raw = raw.strip()
        if not raw:
            continue
        request = json.loads(raw)
        if request.get("type") != "estimate":
            return 1
        if args.hang:
            continue
        if args.die_after is not None and answered >= args.die_after:
            return 3
        if args.garbage:
            _emit("this is not a protocol line")
            answered += 1
            continue
        rid = request["id"]
        if args.fail_substr and any(args.fail_substr in f for f in request["frames"]):
            _emit(_dumps({"id": rid, "status": "failed", "type": "result"}))
        else:
            _emit(
                _dumps(
                    {
                        "id": rid,
                        "rotation": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                        "status": "ok",
                        "translation": [0.0, 0.0, 0.0],
                        "type": "result",
                    }
                )
            )
        answered += 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
