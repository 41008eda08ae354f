import json
import os
import subprocess
import sys

import pytest

from classtrack import _backend

_PROBE = """
import json
from classtrack import _backend
from classtrack.scenario import ScenarioSpec, generate
from classtrack.tracker import run_sequence
dets, _ = generate(ScenarioSpec(class_counts=(3, 2, 2), num_frames=40, detection_noise=1.5,
                                embedding_noise=0.1, seed=3))
out = [[(t, c, b.x, b.y, b.w, b.h) for t, c, b in r.outputs] for r in run_sequence(dets)]
print(json.dumps({"backend": _backend.BACKEND, "outputs": out}))
"""


def _run(backend):
    env = dict(os.environ, CLASSTRACK_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", _PROBE], env=env, capture_output=True, text=True)
    return proc


def test_default_backend_is_numba():
    assert _backend.HAS_NUMBA
    assert _backend.BACKEND == os.environ.get("CLASSTRACK_BACKEND", "numba")


def test_env_flag_selects_numpy_and_tracks_identically():
    results = {}
    for backend in ("numba", "numpy"):
        proc = _run(backend)
        assert proc.returncode == 0, proc.stderr
        payload = json.loads(proc.stdout)
        assert payload["backend"] == backend
        results[backend] = payload["outputs"]
    ids = lambda outs: [[row[:2] for row in frame] for frame in outs]
    assert ids(results["numba"]) == ids(results["numpy"])
    for fa, fb in zip(results["numba"], results["numpy"]):
        for ra, rb in zip(fa, fb):
            assert ra[2:] == pytest.approx(rb[2:], abs=1e-9)


def test_bad_backend_rejected():
    proc = _run("cuda")
    assert proc.returncode != 0
    assert "CLASSTRACK_BACKEND" in proc.stderr
