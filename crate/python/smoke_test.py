"""Smoke test for the betaedge_py extension.

Build first:
    cargo build -p betaedge-py --release --features extension-module
then run from the repository root:
    python3 python/smoke_test.py
"""

import importlib
import json
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("betaedge_py")
    except ImportError:
        pass
    built = ROOT / "target" / "release" / "libbetaedge_py.so"
    if not built.exists():
        sys.exit(f"missing {built}; build the extension first")
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(built, tmp / "betaedge_py.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("betaedge_py")


def main():
    be = load()

    v = be.Potential.hermite()
    assert v.degree == 2
    assert abs(v(2.0) - 1.0) < 1e-15

    a, b = be.local_minimizer(be.Potential([0.0, 0.0, 1.0]), 0.5)
    assert abs(a) < 1e-10 and abs(b - 0.5 * math.sqrt(0.5)) < 1e-10

    c = be.edge_constants(v)
    for key, want in [("edge", 2.0), ("tau", 1.0), ("gamma", 1.0), ("vartheta", 1.0)]:
        assert abs(c[key] - want) < 1e-10, (key, c[key])

    d = v.w_partials(0.3, 0.8)
    assert abs(4 * 0.8 * d["w11"] - 0.8 * d["w22"] - d["w2"]) < 1e-12

    t = be.Tridiagonal([0.1, -0.5, 0.7, 0.2], [0.5, 1.2, 0.8])
    lam, w = t.spectral_measure()
    back = be.Tridiagonal.from_measure(lam, w)
    assert max(abs(x - y) for x, y in zip(back.offdiag, t.offdiag)) < 1e-12
    assert abs(t.eigen_max() - lam[-1]) < 1e-12

    model = be.Model(v, 2.0, 12)
    s = model.sample(seed=1, stream=0)
    ga, gb = model.grad_log_density(s)
    assert len(ga) == 12 and len(gb) == 11
    assert math.isfinite(model.log_density(s))

    f = be.minimizer(v, 60)
    ev = f.eigenvalues()
    assert len(ev) == 60 and -2.0 < ev[0] < ev[-1] < 2.0

    tw = be.sao_samples(2.0, 200, seed=3)
    mean = sum(tw) / len(tw)
    assert abs(mean + 1.77) < 0.25, mean

    summary = json.loads(be.run_config('kind = "tw_reference"\nseed = 1\n[sao]\nbeta = 2.0\nh = 0.05\n[samples]\nsao = 50\n'))
    assert summary["statistics"]["sample_count"] == 50

    print("smoke test ok")


if __name__ == "__main__":
    main()
