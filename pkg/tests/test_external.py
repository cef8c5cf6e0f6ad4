import io
import sys
import textwrap

import numpy as np
import pytest

from annr.engine import ANNR, EngineConfig, run
from annr.exceptions import EvaluationError, RunError
from annr.external import ExternalFunction, format_request, parse_response, serve
from annr.testbed import builtin


def stub(tmp_path, body, name="stub.py"):
    """Evaluator script answering the handshake, then ``body(x, n)`` per request."""
    src = textwrap.dedent('''
        import sys
        n = 0
        for line in sys.stdin:
            parts = line.split()
            if parts[0] == "HELLO":
                print("READY", flush=True)
                continue
            x = [float(v) for v in parts[1:]]
            n += 1
    ''') + textwrap.indent(textwrap.dedent(body), " " * 4)
    path = tmp_path / name
    path.write_text(src)
    return [sys.executable, str(path)]


SQNORM = 'print(repr(sum(v * v for v in x)), flush=True)\n'


def test_format_and_parse():
    assert format_request([1.0, 0.1]) == "EVAL 1.0 0.1"
    assert format_request([1 / 3]) == f"EVAL {1 / 3!r}"
    assert parse_response("2.5\n") == 2.5
    for bad in ("nan", "inf", "hello", "ERROR boom", ""):
        with pytest.raises(EvaluationError) as exc:
            parse_response(bad)
        assert exc.value.raw == bad


def test_stub_sqnorm(tmp_path):
    with ExternalFunction(stub(tmp_path, SQNORM), dim=2) as f:
        assert f([1.0, 1.0]) == 2.0
        assert f(np.array([3.0, 4.0])) == 25.0
        assert f.calls == 2


def test_stub_nan_is_error(tmp_path):
    with ExternalFunction(stub(tmp_path, 'print("nan", flush=True)\n'), dim=2) as f:
        with pytest.raises(EvaluationError) as exc:
            f([0.0, 0.0])
        assert exc.value.raw.strip() == "nan"


def test_stub_error_line(tmp_path):
    with ExternalFunction(stub(tmp_path, 'print("ERROR out of range", flush=True)\n'), dim=1) as f:
        with pytest.raises(EvaluationError, match="out of range"):
            f([0.5])


def test_bad_handshake(tmp_path):
    path = tmp_path / "rude.py"
    path.write_text("import sys\nfor line in sys.stdin:\n    print('NOPE', flush=True)\n")
    with pytest.raises(EvaluationError, match="handshake"):
        ExternalFunction([sys.executable, str(path)], dim=2)


def test_timeout(tmp_path):
    body = "import time\ntime.sleep(5)\nprint('1.0', flush=True)\n"
    with ExternalFunction(stub(tmp_path, body), dim=1, timeout=0.3) as f:
        with pytest.raises(EvaluationError, match="no response within"):
            f([0.0])


def test_channel_closed_mid_run_keeps_trace(tmp_path):
    body = "if n > 4 + 6:\n    sys.exit(0)\n" + SQNORM
    cfg = EngineConfig(dim=2, box=builtin("sqnorm").box, budget=50, epsilon=1e-12, n_init=0, lam=1.0)
    with ExternalFunction(stub(tmp_path, body), dim=2) as f:
        with pytest.raises(RunError) as exc:
            run(cfg, f)
    assert len(exc.value.trace) == 6


def test_serve_in_process():
    out = io.StringIO()
    serve(lambda x: float(x.sum()), io.StringIO("HELLO m=2\nEVAL 1.0 2.5\nEVAL 1\nBYE\n"), out)
    assert out.getvalue().splitlines() == ["READY", "3.5", "ERROR expected 2 coordinates",
                                           "ERROR unknown request BYE"]


def test_module_server_matches_in_process_trace():
    f = builtin("gaussian")
    cfg = EngineConfig(dim=2, box=f.box, budget=40, seed=5, epsilon=1e-12)
    local = io.StringIO()
    run(cfg, f).write_csv(local, timing=False)
    with ExternalFunction([sys.executable, "-m", "annr.external", "gaussian"], dim=2) as ext:
        remote = io.StringIO()
        ANNR(cfg, ext).run().write_csv(remote, timing=False)
    assert remote.getvalue() == local.getvalue()
