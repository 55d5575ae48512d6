"""Scriptable stand-in for an external simulator process.

Serves the newline-delimited JSON protocol for a 2-D linear contraction
(x_{t+1} = 0.5 x_t), with misbehaviour modes for transport tests.
"""

import json
import sys
import time


def rollout(x0, horizon):
    x = list(x0)
    for _ in range(int(horizon)):
        x = [0.5 * v for v in x]
    return x


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "linear"
    out = sys.stdout

    if mode == "bad-handshake":
        out.write("not json at all\n")
        out.flush()
        return
    if mode == "wrong-hello":
        out.write(json.dumps({"type": "greetings", "dims": 2}) + "\n")
        out.flush()
        return

    out.write(json.dumps({"type": "hello", "state_dim": 2}) + "\n")
    out.flush()

    if mode == "silent":
        time.sleep(3600)
        return

    for line in sys.stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        if mode == "die-mid":
            return
        if mode == "error-response":
            out.write(json.dumps({"type": "error", "id": req["id"], "message": "nope"}) + "\n")
        elif mode == "mismatched-id":
            out.write(json.dumps({"type": "result", "id": req["id"] + 999, "xT": [0.0, 0.0]}) + "\n")
        elif "x0s" in req:
            xts = [rollout(x0, req["T"]) for x0 in req["x0s"]]
            out.write(json.dumps({"type": "result", "id": req["id"], "xTs": xts}) + "\n")
        else:
            out.write(json.dumps({"type": "result", "id": req["id"], "xT": rollout(req["x0"], req["T"])}) + "\n")
        out.flush()


if __name__ == "__main__":
    main()
