"""Smoke test for the quadtrack_py extension. Run with `python python/smoke_test.py`."""

import math
import os
import tempfile

import quadtrack_py as q


def close(a, b, tol=1e-12):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    v = [0.3, -1.2, 2.0]
    assert close(q.vee(q.hat(v)), v)
    try:
        q.vee([[1.0, 0, 0], [0, 0, 0], [0, 0, 0]])
    except ValueError:
        pass
    else:
        raise AssertionError("vee accepted a non-skew matrix")

    r = q.so3_exp([0.0, 0.0, math.pi / 2])
    assert close([r[0][0], r[1][0], r[2][2]], [0.0, 1.0, 1.0])

    eps, z, j = q.alignment([[1.0, 0, 0], [0, 1.0, 0]], [[1.0, 0, 0], [0, 1.0, 0]], [1.0, 2.0])
    assert eps == 0.0 and close(z, [0, 0, 0])

    cfg = q.Config.preset(1)
    assert q.Config.parse(cfg.to_text()).to_text() == cfg.to_text()
    gains = q.check_gains(cfg)
    assert all(c["satisfied"] for c in gains["checks"] if c["hard"])

    cfg.duration = 2.0
    run = q.run_scenario(cfg)
    assert run.diverged is None
    assert len(run) == round(cfg.duration / cfg.dt) + 1
    tel = run.telemetry()
    assert list(tel) == q.COLUMNS
    assert tel["t"][-1] == 2.0

    report = q.verify(tel, cfg)
    gap = next(c for c in report["checks"] if c["name"] == "alignment_gap_bound")
    assert gap["violations"] == 0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "run.csv")
        run.write_csv(path)
        back = q.read_telemetry(path)
        assert len(back["t"]) == len(tel["t"])
        # CSV keeps 9 significant digits, so margins shift but verdicts must not
        from_file = q.verify(path, cfg)["checks"]
        assert [c["violations"] for c in from_file] == [c["violations"] for c in report["checks"]]

    try:
        q.Config.parse("scenario = 1\nbogus.key = 3\n")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    print(f"smoke ok: {len(run)} rows, final |x_err| {tel['x_err_norm'][-1]:.3e}")


if __name__ == "__main__":
    main()
