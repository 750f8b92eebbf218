"""Smoke test for the qdgrasp Python extension.

Build first with `cargo build --release -p qdgrasp-py`, then run
`python3 python/smoke_test.py`. The script loads the compiled library straight
from target/ unless `qdgrasp` is already importable.
"""

import importlib.machinery
import importlib.util
import math
import os
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    try:
        import qdgrasp  # noqa: F401

        return qdgrasp
    except ImportError:
        pass
    suffix = {"darwin": "libqdgrasp.dylib", "win32": "qdgrasp.dll"}.get(sys.platform, "libqdgrasp.so")
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / suffix
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("qdgrasp", str(lib))
            spec = importlib.util.spec_from_loader("qdgrasp", loader)
            mod = importlib.util.module_from_spec(spec)
            loader.exec_module(mod)
            return mod
    sys.exit("qdgrasp extension not found; run `cargo build --release -p qdgrasp-py` first")


def main():
    qd = load_module()
    ball = qd.Mesh.sphere(0.035)
    panda = qd.Gripper.preset("panda")
    assert panda.genome_len("contact") == 7 and panda.genome_len("antipodal") == 4
    assert abs(ball.area - 4 * math.pi * 0.035**2) / ball.area < 0.02

    # top-down diametric pinch: y_g points down, fingers close along x
    s = math.sqrt(0.5)
    r = qd.evaluate(ball, panda, [0.0, 0.0, 0.04], [-s, 0.0, 0.0, s])
    assert r["valid"] and r["fitness"] == 2.0, r
    assert len(r["contacts"]) == 2

    g = qd.project(ball, panda, "approach", [0.0] * 7)
    assert g is not None and g["nu"] <= math.pi / 4 + 1e-12

    grasps = qd.search(ball, panda, "contact", "ME_scs", budget=600, seed=1)
    assert all(x["fitness"] > 0 for x in grasps)
    again = qd.search(ball, panda, "contact", "ME_scs", budget=600, seed=1)
    assert grasps == again

    u, p = qd.mann_whitney([5, 6, 7, 8, 9], [0, 1, 2, 3, 4])
    assert u == 25 and abs(p - 1 / 252) < 1e-12

    try:
        qd.Gripper.preset("robotiq")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown preset accepted")

    with tempfile.TemporaryDirectory() as tmp:
        ball.save_obj(os.path.join(tmp, "ball.obj"))
        cfg = Path(tmp) / "exp.toml"
        cfg.write_text(
            '[run]\nprior = "contact"\nalgorithm = "random"\nseeds = [0]\n'
            f'output_dir = "{tmp}/run"\n\n[mesh]\npath = "ball.obj"\n\n'
            '[gripper]\npreset = "panda"\n\n[qd]\nbudget = 50\n'
        )
        run_dir = qd.run_experiment(str(cfg))
        rows = qd.compare_runs([str(run_dir)])
        assert len(rows) == 1
        try:
            qd.run_experiment(str(cfg), ["qd.budget=-1"])
        except ValueError as e:
            assert "qd.budget" in str(e)
        else:
            raise AssertionError("bad budget accepted")

    print(f"qdgrasp {qd.__version__} smoke test passed: {len(grasps)} grasps found")


if __name__ == "__main__":
    main()
