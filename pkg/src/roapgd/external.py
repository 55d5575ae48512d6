"""Client for external black-box simulators.

The external process speaks newline-delimited JSON over its standard
streams.  It announces itself first::

    {"type": "hello", "state_dim": n}

and then answers simulation requests in FIFO order::

    {"type": "simulate", "id": 7, "x0": [...], "T": 100}
    {"type": "result", "id": 7, "xT": [...]}

A batch variant carries ``x0s``/``xTs`` under a single id.  Errors come back
as ``{"type": "error", "id": ..., "message": ...}``.  The client enforces a
per-request timeout and treats any protocol violation (bad handshake, id
mismatch, unparseable line, process exit) as a :class:`TransportError`.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading

import numpy as np

from .errors import TransportError
from .geometry import as_state
from .simulate import OVERFLOW_BOUND, Simulator, Trajectory


class ExternalSimulator(Simulator):
    """Serial session with one simulator child process.

    Sessions are one-request-at-a-time (guarded by a lock, so a session can
    be shared between threads); run several processes for true parallelism.
    Only terminal states cross the wire, so :meth:`simulate` returns a
    two-row trajectory holding the endpoints.
    """

    def __init__(self, command, timeout=60.0, expected_dim=None):
        self.command = list(command)
        self.timeout = float(timeout)
        self._lock = threading.Lock()
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            raise TransportError(f"failed to launch simulator {self.command}: {exc}") from exc
        self._lines = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        try:
            hello = self._read_message()
            if hello.get("type") != "hello" or not isinstance(hello.get("state_dim"), int):
                raise TransportError(f"bad handshake from simulator: {hello!r}")
            self.state_dim = hello["state_dim"]
            if self.state_dim < 1:
                raise TransportError(f"handshake declared state_dim {self.state_dim}")
            if expected_dim is not None and expected_dim != self.state_dim:
                raise TransportError(
                    f"simulator has state_dim {self.state_dim}, configuration says {expected_dim}"
                )
        except TransportError:
            self.close()
            raise

    def _pump(self):
        try:
            for line in self._proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)  # EOF marker

    def _read_message(self):
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise TransportError(f"simulator response timed out after {self.timeout}s") from None
        if line is None:
            raise TransportError("simulator closed its output stream")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TransportError(f"unparseable simulator output: {line!r}") from exc
        if not isinstance(msg, dict):
            raise TransportError(f"unexpected simulator output: {msg!r}")
        return msg

    def _roundtrip(self, request):
        with self._lock:
            request_id = self._next_id
            self._next_id += 1
            request = dict(request, id=request_id)
            try:
                self._proc.stdin.write(json.dumps(request) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"simulator process is gone: {exc}") from exc
            response = self._read_message()
        if response.get("id") != request_id:
            raise TransportError(
                f"out-of-order response: expected id {request_id}, got {response.get('id')!r}"
            )
        if response.get("type") == "error":
            raise TransportError(f"simulator error: {response.get('message')}")
        if response.get("type") != "result":
            raise TransportError(f"unexpected response type: {response!r}")
        return response

    @staticmethod
    def _classify(x0, x_t):
        x_t = np.asarray(x_t, dtype=float)
        if x_t.shape != x0.shape:
            raise TransportError(f"terminal state has shape {x_t.shape}, expected {x0.shape}")
        if not (np.all(np.isfinite(x_t)) and np.max(np.abs(x_t)) <= OVERFLOW_BOUND):
            # Only endpoints cross the wire, so the last known in-bounds
            # state is the initial one.
            return x0, True
        return x_t, False

    def terminal_state(self, x0, horizon):
        x0 = as_state(x0, self.state_dim)
        response = self._roundtrip({"type": "simulate", "x0": x0.tolist(), "T": int(horizon)})
        if "xT" not in response:
            raise TransportError(f"result without xT: {response!r}")
        return self._classify(x0, response["xT"])

    def terminal_batch(self, x0s, horizon):
        x0s = [as_state(x0, self.state_dim) for x0 in x0s]
        response = self._roundtrip(
            {"type": "simulate", "x0s": [x.tolist() for x in x0s], "T": int(horizon)}
        )
        xts = response.get("xTs")
        if not isinstance(xts, list) or len(xts) != len(x0s):
            raise TransportError(f"batch result has {len(xts or [])} entries, expected {len(x0s)}")
        pairs = [self._classify(x0, x_t) for x0, x_t in zip(x0s, xts)]
        return np.array([s for s, _ in pairs]), np.array([d for _, d in pairs], dtype=bool)

    def simulate(self, x0, horizon):
        """Endpoint-only trajectory; the protocol does not stream history."""
        x_t, diverged = self.terminal_state(x0, horizon)
        states = np.array([as_state(x0, self.state_dim), x_t])
        return Trajectory(states, None, diverged=diverged, diverged_at=horizon if diverged else None)

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
        if proc.stdout is not None:
            proc.stdout.close()
