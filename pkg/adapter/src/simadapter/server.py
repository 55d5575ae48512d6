"""Line-protocol server turning a step function into a black-box simulator.

The session announces itself once, then answers simulation requests in FIFO
order until its input stream closes::

    -> {"type": "hello", "state_dim": 2}
    <- {"type": "simulate", "id": 0, "x0": [0.1, 0.0], "T": 100}
    -> {"type": "result", "id": 0, "xT": [...]}

A batch request carries ``x0s`` and is answered with ``xTs`` under the same
id.  Malformed or invalid lines produce ``{"type": "error", ...}`` and the
session keeps serving.  Floats are serialized with shortest round-trip
precision, so a recorded transcript replays to byte-identical responses for
a deterministic step function.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field


@dataclass
class AdapterSession:
    """One served connection: the wrapped system plus a request counter."""

    state_dim: int
    step_fn: object  # callable (state, t) -> state
    requests_served: int = 0
    errors_sent: int = 0
    _out: object = field(default=None, repr=False)

    def _emit(self, payload):
        self._out.write(json.dumps(payload) + "\n")
        self._out.flush()

    def _error(self, request_id, message):
        self.errors_sent += 1
        self._emit({"type": "error", "id": request_id, "message": message})

    def _rollout(self, x0, horizon):
        x = [float(v) for v in x0]
        for t in range(horizon):
            x = list(self.step_fn(x, t))
        return [float(v) for v in x]

    def _validate_vector(self, value):
        if not isinstance(value, list) or len(value) != self.state_dim:
            raise ValueError(f"state must be a list of {self.state_dim} numbers")
        if not all(isinstance(v, (int, float)) for v in value):
            raise ValueError("state entries must be numbers")
        return value

    def handle_line(self, line):
        """Serve one request line (no-op for blank lines)."""
        if not line.strip():
            return
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            self._error(None, "malformed request: not valid JSON")
            return
        request_id = request.get("id") if isinstance(request, dict) else None
        if not isinstance(request_id, int):
            request_id = None
        try:
            if not isinstance(request, dict) or request.get("type") != "simulate":
                raise ValueError("unknown request type")
            if request_id is None:
                raise ValueError("request needs an integer id")
            horizon = request.get("T")
            if not isinstance(horizon, int) or horizon < 0:
                raise ValueError(f"T must be a non-negative integer, got {horizon!r}")
            if ("x0" in request) == ("x0s" in request):
                raise ValueError("request needs exactly one of x0 / x0s")
            if "x0" in request:
                x0 = self._validate_vector(request["x0"])
                response = {"type": "result", "id": request_id, "xT": self._rollout(x0, horizon)}
            else:
                batch = request["x0s"]
                if not isinstance(batch, list):
                    raise ValueError("x0s must be a list of states")
                xts = [self._rollout(self._validate_vector(x0), horizon) for x0 in batch]
                response = {"type": "result", "id": request_id, "xTs": xts}
        except ValueError as exc:
            self._error(request_id, str(exc))
            return
        self.requests_served += 1
        self._emit(response)


def serve(step_fn, state_dim, stdin=None, stdout=None):
    """Run a session until the input stream closes; returns the session.

    ``step_fn`` must be deterministic for the protocol's replay guarantee to
    hold.  Exceptions raised by ``step_fn`` are deliberately not caught: a
    broken wrapped system should kill the process visibly, not limp on.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    session = AdapterSession(int(state_dim), step_fn, _out=stdout)
    session._emit({"type": "hello", "state_dim": session.state_dim})
    for line in stdin:
        session.handle_line(line)
    return session
