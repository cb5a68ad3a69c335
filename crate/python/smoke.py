"""Smoke test for the fourphoton Python extension.

Build and run from the repository root:

    cargo build --release -p fourphoton-python
    cp target/release/libfourphoton_py.so python/fourphoton.so
    python3 python/smoke.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import fourphoton as fp  # noqa: E402


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    t_star = (3 + math.sqrt(3)) / 6
    close(fp.hwp_transmissivity(fp.theta_star()), t_star, 1e-12)
    close(fp.e_over_a([0.5 ** 0.5, 0.5 ** 0.5]), 0.5, 1e-15)

    out = fp.Ket.basis([2, 2]).run([fp.Element.beam_splitter(t_star)])
    close(out.detect_prob([2, 2]), 0.0, 1e-12)
    close(out.amplitude([3, 1]).real, 1 / math.sqrt(3), 1e-12)
    close(out.amplitude([1, 3]).real, -1 / math.sqrt(3), 1e-12)
    close(out.norm_sqr(), 1.0, 1e-12)

    close(abs(fp.permanent([[1, 2], [3, 4]]) - 10), 0.0, 1e-12)

    rows = fp.theta_scan(0.0, math.pi / 2, 181)
    close(rows[0][1], 1.0, 1e-12)
    assert len(rows) == 181

    dip = fp.hom_dip_scan(-2000.0, 2000.0, 3, lambdas=[0.5 ** 0.5, 0.5 ** 0.5])
    close(dip[1][1] / dip[0][1], 2 / 9, 1e-9)

    phis = [2 * math.pi * i / 36 for i in range(36)]
    y = [100 * (1 + 0.62 * math.cos(4 * p) + 0.39 * math.cos(2 * p)) for p in phis]
    rep = fp.fit_xy(phis, y, "fringe")
    close(rep["params"]["v4"], 0.62, 1e-9)
    close(rep["params"]["v2"], 0.39, 1e-9)
    assert rep["converged"]

    noisy = fp.poissonize(fp.fringe_scan(fp.theta_star(), 0.0, math.pi, 19), 1000.0, 7)
    assert noisy == fp.poissonize(fp.fringe_scan(fp.theta_star(), 0.0, math.pi, 19), 1000.0, 7)

    b = fp.balance_theta1()
    close(math.degrees(b["theta1"]), 13.68, 0.05)

    try:
        fp.e_over_a([])
    except ValueError:
        pass
    else:
        raise AssertionError("empty Schmidt spec accepted")

    failed = [c for c in fp.run_checks() if not c[4]]
    assert not failed, failed
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
