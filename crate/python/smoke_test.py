"""Smoke test for the Python bindings.

Build first:  pip install --no-build-isolation -e crates/py
Run:          python python/smoke_test.py [--full]
"""

import cmath
import math
import sys
import tempfile

import holonomy_py as h


def close(a, b, tol):
    return all(abs(x - y) < tol for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def main(full):
    # exp of a quarter-turn generator is the quarter turn
    r = h.matrix_exponential([[0.0, -math.pi / 2], [math.pi / 2, 0.0]])
    assert close(r, [[0, -1], [1, 0]], 1e-14), r

    # zero connection transports by the identity
    zero = h.Connection.zero(2, 2)
    path = h.Path.spline([[-0.5, -0.3], [0.1, 0.4], [0.6, 0.0]])
    assert close(h.transport(zero, path), [[1, 0], [0, 1]], 1e-15)

    # scalar A = dt along u -> u on [0, 1] gives e
    one = h.Connection.constant([[[1.0]]])
    f = h.transport(one, h.Path.segment([0.0], [1.0]))
    assert abs(f[0][0] - math.e) < 1e-12, f

    # product formula approaches the RK4 value
    mag = h.Connection.magnetic()
    arc = h.Path.arc([0.5, 0.2], 1.0, (0.0, 2.0))
    ref = h.transport(mag, arc)[0][0]
    errs = [abs(h.transport(mag, arc, "product", n, "midpoint")[0][0] - ref) for n in (64, 128)]
    assert 3.5 < errs[0] / errs[1] < 4.5, errs

    # reconstruction recovers the connection
    a = mag.evaluate([0.3, -0.2], [0.0, 1.0])
    b = h.reconstruct_at(mag, [0.3, -0.2], [0.0, 1.0])
    assert abs(a[0][0] - b[0][0]) < 1e-7, (a, b)

    # sphere holonomy and the circle bordism
    sphere = h.Bundle.sphere()
    theta = math.pi / 3
    loop = h.Path.colatitude(theta)
    got = sphere.holonomy_angle(loop)
    want = h.sphere_holonomy_angle(theta)
    assert abs(cmath.exp(1j * got) - cmath.exp(1j * want)) < 1e-6, (got, want)
    hol = sphere.transport(loop)
    tr = hol[0][0] + hol[1][1]
    assert abs(sphere.circle_value(loop) - tr) < 1e-8
    assert sphere.snake_residual(loop) < 1e-8
    assert sphere.cech_residual() < 1e-10

    circle = h.Bundle.flat_circle(0.9)
    value = circle.circle_value(h.Path.arc([0.0, 0.0], 1.0))
    assert abs(value - 2 * math.cos(0.9)) < 1e-8, value

    # config runner
    cfg = 'kind = "transport"\n[connection]\npreset = "zero"\n[path]\nkind = "circle"\n'
    with tempfile.TemporaryDirectory() as d:
        ok, report = h.run_config(cfg, d)
    assert ok and "transport.identity_residual" in report
    try:
        h.run_config('kind = "transport"\n[connection]\npreset = "nope"\n', ".")
    except ValueError as e:
        assert "preset" in str(e)
    else:
        raise AssertionError("bad preset accepted")

    if full:
        results = h.verify_all(0)
        for _, _, _, line in results:
            print(line)
        assert all(ok for _, _, ok, _ in results)

    print("smoke test passed")


if __name__ == "__main__":
    main("--full" in sys.argv[1:])
