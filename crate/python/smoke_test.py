#!/usr/bin/env python3
"""Smoke test for the rolldisk Python bindings.

Copies the built cdylib into a temp directory as an importable module,
then exercises each exported function once with loose sanity checks.

Run from the repository root after `cargo build -p rolldisk-py`:

    python3 python/smoke_test.py
"""

import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def import_rolldisk():
    for profile in ("debug", "release"):
        lib = ROOT / "target" / profile / "librolldisk.so"
        if lib.exists():
            break
    else:
        sys.exit("librolldisk.so not found; run `cargo build -p rolldisk-py` first")
    tmp = tempfile.mkdtemp(prefix="rolldisk-smoke-")
    shutil.copy(lib, pathlib.Path(tmp) / "rolldisk.so")
    sys.path.insert(0, tmp)
    import rolldisk

    return rolldisk


def main():
    rd = import_rolldisk()

    presets = rd.magnet_presets()
    assert "H" in presets, presets
    print(f"magnet_presets: {presets}")

    names = rd.list_scenarios()
    assert "pendulum" in names and "joint" in names, names
    print(f"list_scenarios: {names}")

    dist, flux = rd.flux_profile("H", 0.005, 0.03, samples=16)
    assert len(dist) == len(flux) == 16
    assert all(b > a for a, b in zip(flux[1:], flux))  # decays with distance
    print(f"flux_profile: {flux[0]:.4f} T at {dist[0]*1e3:.1f} mm "
          f"-> {flux[-1]:.4f} T at {dist[-1]*1e3:.1f} mm")

    f_near = rd.attraction("H", 0.0)
    f_far = rd.attraction("H", 0.01)
    f_half = rd.attraction("H", 0.0, scale=0.5)
    assert f_near > f_far > 0.0
    assert math.isclose(f_half, 0.5 * f_near, rel_tol=1e-12)
    print(f"attraction at contact: {f_near:.3f} N, at 10 mm: {f_far:.3f} N")

    ref = rd.gap_force_reference()
    assert ref["computed_force_n"] > ref["reported_force_n"]
    print(f"gap_force_reference: computed {ref['computed_force_n']:.2f} N vs "
          f"reported {ref['reported_force_n']:.2f} N (ratio {ref['ratio']:.2f})")

    q = rd.module_q_factor()
    assert 1e-4 < q < 1e-2, q
    print(f"module_q_factor: {q:.6e}")

    ok = rd.gain_check(5.0, 0.5)
    marginal = rd.gain_check(2.5, 0.5)
    assert ok["condition1"] and ok["condition2"]
    assert marginal["condition1"] and not marginal["condition2"]
    assert len(ok["poles"]) == 3
    assert min(re for re, _ in ok["poles"]) < 0.0
    print(f"gain_check(5.0, 0.5): conditions hold, poles {ok['poles']}")
    print(f"gain_check(2.5, 0.5): condition2 margin {marginal['margin2']:.2e}")

    # A resting module leaning 0.1 rad: the shell must be pushed, the
    # pendulum pulled back toward vertical.
    d = rd.module_derivative((0.0, 0.0, 0.0, 0.0, 0.1, 0.0))
    assert d[0] == 0.0 and d[4] == 0.0  # velocities are zero
    assert d[5] < 0.0  # gravity restores theta
    print(f"module_derivative at theta=0.1: theta_ddot = {d[5]:.3f} rad/s^2")

    report = rd.run_scenario("joint", include_log=True)
    assert report["as_expected"], report
    assert report["metrics_pass"], report
    assert report["trajectory_csv"].startswith("t,")
    for m in report["metrics"]:
        print(f"run_scenario(joint): {m['name']} = {m['measured']:.4f} "
              f"({m['sense']} {m['threshold']:.4f}) -> "
              f"{'PASS' if m['pass'] else 'FAIL'}")

    weak = rd.run_scenario("joint-weak-magnet")
    assert weak["as_expected"], weak
    print("run_scenario(joint-weak-magnet): decouples as expected")

    balance = rd.run_scenario("balance")
    assert balance["expected_failure"] and not balance["metrics_pass"]
    assert balance["as_expected"]
    print("run_scenario(balance): expected failure observed")

    print("smoke test passed")


if __name__ == "__main__":
    main()
