"""Smoke test for the dwnls Python bindings.

Build the extension first, e.g.

    cd crates/python && maturin develop --release

then run ``python python/smoke_test.py``.
"""

import math

import dwnls_py as dwnls


def main():
    v = dwnls.Potential.quartic(1.0, 1.0)
    assert abs(v([1.0]) - 1.0) < 1e-15

    gamma, method = dwnls.agmon_distance(v, 2048)
    assert abs(gamma - 4.0 / 3.0) < 1e-3, gamma
    print(f"agmon gamma = {gamma:.6f} ({method})")

    h = dwnls.lowest_eigenpairs(dwnls.Potential.harmonic(1.0), dwnls.Grid(1, 8.0, 1024), 0.1, k=3)
    assert abs(h.eigenvalues[0] - 1.1) < 1e-8, h.eigenvalues

    s = dwnls.lowest_eigenpairs(v, dwnls.Grid(1, 4.0, 128), 0.3, k=3)
    print(s)
    assert s.omega_split > 0.0
    n = len(s.phi_r)
    assert n == 128

    period = s.beat_period
    quarter = period / 4.0
    run = dwnls.evolve(s, 0.0, quarter / 2000, quarter, output_stride=2000)
    assert abs(run["pop_L"][-1] - 1.0) < 1e-5, run["pop_L"][-1]
    assert max(abs(x - 1.0) for x in run["norm"]) < 1e-12

    c = s.c_sigma(1)
    tau, z, inv, min_z = dwnls.twomode_integrate(
        s.omega_split, s.omega_mean, 0.0, c, period / 2000, period, stride=100
    )
    assert abs(min_z + 1.0) < 1e-5, min_z

    rows, eta_star = dwnls.selftrap_scan([0.1, 1.0, 3.0, 5.0, 10.0], steps_per_period=2000)
    assert eta_star is not None and 3.0 < eta_star < 5.0, eta_star
    print(f"self-trapping threshold eta* = {eta_star:.4f}")

    try:
        dwnls.Potential.harmonic_barrier(1.0, 0.1, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("single-well barrier accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
