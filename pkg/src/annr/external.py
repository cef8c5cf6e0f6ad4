"""Line protocol for black-box evaluators running in another process.

The session opens with ``HELLO m=<dim>`` answered by ``READY``.  Each request
is ``EVAL x0 x1 ...`` (shortest round-trip decimals) and each response is a
single decimal number or ``ERROR <text>``.  Lines are UTF-8 and LF-terminated;
one request is in flight at a time.

Running ``python -m annr.external <target> [key=value ...]`` serves one of the
built-in targets over stdin/stdout, which is handy for testing.
"""

from __future__ import annotations

import math
import queue
import shlex
import subprocess
import sys
import threading

import numpy as np

from .exceptions import EvaluationError, InvalidInputError

__all__ = ["ExternalFunction", "format_request", "parse_response", "serve"]

_EOF = object()


def format_request(x) -> str:
    return "EVAL " + " ".join(repr(float(c)) for c in x)


def parse_response(line: str) -> float:
    """Value carried by one response line; raises EvaluationError otherwise."""
    text = line.strip()
    if text.startswith("ERROR"):
        raise EvaluationError(f"evaluator reported: {text[5:].strip()}", raw=line)
    try:
        v = float(text)
    except ValueError:
        raise EvaluationError(f"malformed response {text!r}", raw=line) from None
    if not math.isfinite(v):
        raise EvaluationError(f"non-finite response {text!r}", raw=line)
    return v


class ExternalFunction:
    """Target function backed by an evaluator subprocess."""

    domain = None

    def __init__(self, command, dim: int, timeout: float = 30.0, name: str = "external"):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.dim = int(dim)
        self.timeout = timeout
        self.name = name
        self.calls = 0
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        reply = self._exchange(f"HELLO m={self.dim}")
        if reply.strip() != "READY":
            self.close()
            raise EvaluationError(f"handshake failed: expected READY, got {reply.strip()!r}", raw=reply)

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def _exchange(self, request: str) -> str:
        try:
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError):
            raise EvaluationError("evaluator channel is closed", raw=None) from None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise EvaluationError(f"no response within {self.timeout} s", raw=None) from None
        if line is _EOF:
            self._lines.put(_EOF)  # stay closed for later calls
            raise EvaluationError("evaluator closed the channel", raw=None)
        return line

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim or not np.all(np.isfinite(x)):
            raise InvalidInputError(f"need {self.dim} finite coordinates, got {x}")
        line = self._exchange(format_request(x))
        self.calls += 1
        try:
            return parse_response(line)
        except EvaluationError as exc:
            exc.point = x
            raise

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(fn, stdin=None, stdout=None):
    """Answer protocol requests with ``fn(x)`` until stdin closes."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    dim = None
    for line in stdin:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "HELLO":
            dim = int(parts[1].split("=", 1)[1])
            reply = "READY"
        elif parts[0] == "EVAL":
            try:
                x = np.array([float(p) for p in parts[1:]])
                if dim is not None and x.size != dim:
                    raise ValueError(f"expected {dim} coordinates")
                reply = repr(float(fn(x)))
            except Exception as exc:  # report, keep serving
                reply = f"ERROR {exc}"
        else:
            reply = f"ERROR unknown request {parts[0]}"
        stdout.write(reply + "\n")
        stdout.flush()


def main(argv=None):
    from .testbed import builtin

    args = sys.argv[1:] if argv is None else argv
    if not args:
        print("usage: python -m annr.external <target> [key=value ...]", file=sys.stderr)
        return 2
    params = {}
    for kv in args[1:]:
        k, v = kv.split("=", 1)
        params[k] = float(v)
    serve(builtin(args[0], **params))
    return 0


if __name__ == "__main__":
    sys.exit(main())
