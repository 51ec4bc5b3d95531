"""Smoke test for the Python extension.

Build first with `cargo build --release -p heston-is-py`, then run
`python3 python/smoke_test.py`. Set HESTON_IS_LIB to point at the built
shared library if it is not under ./target.
"""

import importlib.util
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_library():
    env = os.environ.get("HESTON_IS_LIB")
    if env:
        return Path(env)
    names = ["libheston_is_py.so", "libheston_is_py.dylib", "heston_is_py.dll"]
    for profile in ["release", "debug"]:
        for name in names:
            p = ROOT / "target" / profile / name
            if p.exists():
                return p
    sys.exit("shared library not found; run `cargo build --release -p heston-is-py`")


def load():
    src = find_library()
    suffix = ".pyd" if src.suffix == ".dll" else ".so"
    tmp = Path(tempfile.mkdtemp())
    dst = tmp / ("heston_is" + suffix)
    shutil.copy(src, dst)
    spec = importlib.util.spec_from_file_location("heston_is", dst)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    hi = load()

    p = hi.HestonParams()
    assert p.kappa == 2.0 and p.rho == -0.5 and p.feller()
    try:
        hi.HestonParams(rho=1.5)
    except ValueError as e:
        assert "rho" in str(e)
    else:
        raise AssertionError("rho=1.5 accepted")

    kinds = hi.estimator_kinds()
    assert "LDPsn" in kinds and "BS_A2" in kinds

    lt = hi.large_time_constants(p)
    assert abs(lt["nu"] * lt["q"] - 1.0) < 1e-12 and lt["nu"] > 0

    d = hi.drift("LDPsn", 55.0, n_steps=50)
    assert len(d["t"]) == 51 and all(v > 0 for v in d["psi"])

    classic = hi.price("Classic", 50.0, n_paths=20_000, n_steps=50, seed=3)
    ldp = hi.price("LDPsn", 50.0, n_paths=20_000, n_steps=50, seed=3)
    se = math.hypot(classic.std_err, ldp.std_err)
    assert abs(classic.price - ldp.price) < 4 * se, (classic, ldp)
    assert ldp.var_reduction > 2.0, ldp

    bs = hi.HestonParams.black_scholes(0.25)
    cv = hi.price("ControlGeometric", 50.0, payoff="arithmetic_asian", n_paths=5_000, n_steps=50, params=bs)
    assert cv.var_reduction > 50.0, cv

    print(classic)
    print(ldp)
    print(cv)
    print("smoke test ok")


if __name__ == "__main__":
    main()
