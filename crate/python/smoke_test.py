"""Smoke test for the pnl_attrib_py extension module.

Build first, then run with the built library on the import path:

    cargo build --release -p pnl-attrib-py --features extension-module
    cp target/release/libpnl_attrib_py.so python/pnl_attrib_py.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pnl_attrib_py as pa


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * (1.0 + abs(b))


def main():
    path = pa.Path([0.0, 1.0], [[1.0, 3.0], [2.0, 5.0]])
    f = pa.Payoff("product2", 2)
    assert f.value([3.0, 5.0]) == 15.0

    su = pa.decompose("su", f, path, perm="id")
    assert [c[-1] for c in su.contributions] == [4.0, 9.0]
    oat = pa.decompose("oat", f, path)
    assert oat.residual[-1] == 6.0
    iasu = pa.decompose("iasu", f, path)
    assert [c[-1] for c in iasu.contributions] == [7.0, 6.0]
    assert pa.interactions(f, path)[(0, 1)][-1] == 6.0

    try:
        pa.decompose("su", f, path)
    except ValueError:
        pass
    else:
        raise AssertionError("su without perm should fail")

    sim = pa.simulate("kind = bond\nsteps = 100\nseed = 1\n")
    assert sim.dim == 4 and sim.steps == 100
    assert sum(sim.jumps(2)) == 1
    with tempfile.TemporaryDirectory() as tmp:
        file = os.path.join(tmp, "p.csv")
        sim.write_csv(file)
        back = pa.Path.read_csv(file)
        assert back.values(0) == sim.values(0)

    price, delta, gamma, theta = pa.bs_greeks(100.0, 0.0)
    # d1 = (r + vol^2 / 2) / vol = 0.2 at the money with T = 1
    assert close(gamma, math.exp(-0.02) / math.sqrt(2 * math.pi) / 20.0)
    assert close(pa.lognormal_quantile(0.0, 1.0, 0.5), 1.0)
    assert pa.harmonic_divergence(4) == 25.0 / 12.0
    s = pa.stability_gap(1000, 1.0, 3)
    assert close(s["right_sum"] - s["left_sum"], s["gap"], 1e-10)

    print("pnl_attrib_py smoke test passed:", path, f, su)


if __name__ == "__main__":
    main()
