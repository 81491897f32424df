"""Smoke test for the stt_py extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import json

import stt_py


def main():
    task = stt_py.Task.load("maglev")
    assert task.dim == 1 and task.horizon == 5.0

    res = stt_py.synthesize(task)
    assert res.eta_star < 0, res.eta_star
    tube = res.tube
    lo, hi = tube.bounds(0.0)
    assert abs(lo[0] - 0.75) < 1e-9 and abs(hi[0] - 1.25) < 1e-9

    cert = stt_py.certify(tube, res.eta_star, task, res.epsilon)
    assert cert.passed and cert.oracle_violations == 0, cert.margin
    assert stt_py.verify(tube, task) == []

    again = stt_py.Tube.from_json(tube.to_json())
    assert again.lower == tube.lower
    assert json.loads(tube.to_json())["horizon"] == 5.0

    runs = stt_py.simulate(tube, task, seeds=3)
    assert all(ok for _, ok in runs), runs

    assert abs(stt_py.certificate_margin(-0.1, 6.1, 0.0005) + 0.09695) < 1e-15
    assert stt_py.combine_lipschitz(2.93, 3.17) == 6.1

    status, x, f = stt_py.solve_lp([1.0, 1.0], a_ub=[[-1.0, -2.0]], b_ub=[-2.0], bounds=[(0, None), (0, None)])
    assert status == "optimal" and abs(f - 1.0) < 1e-12, (status, x, f)

    bad = stt_py.Tube([[0.75]], [[1.25]], 5.0)
    assert stt_py.verify(bad, task), "constant tube crosses the timed obstacle"

    try:
        stt_py.Task.load("no-such-task")
    except OSError:
        pass
    else:
        raise AssertionError("missing task should raise")

    print("stt_py smoke test passed")


if __name__ == "__main__":
    main()
