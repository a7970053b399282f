"""Smoke test for the calibkit Python extension.

Uses an installed `calibkit` if one is importable, otherwise the library
built by `cargo build --release -p calibkit-python`.
"""

import importlib
import json
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load():
    try:
        return importlib.import_module("calibkit")
    except ImportError:
        pass
    built = os.path.join(ROOT, "target", "release", "libcalibkit.so")
    if not os.path.exists(built):
        sys.exit(f"{built} not found; run `cargo build --release -p calibkit-python` first")
    tmp = tempfile.mkdtemp(prefix="calibkit-")
    shutil.copy(built, os.path.join(tmp, "calibkit.so"))
    sys.path.insert(0, tmp)
    return importlib.import_module("calibkit")


calibkit = load()


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    p = calibkit.softmax([1.0, 2.0, 3.0])
    assert close(p[2], 0.66524095577482189), p

    alpha, beta, a, b = calibkit.lemma2_closed_form(0.3, 0.1)
    assert close(alpha, math.log(7 / 3)) and close(beta, math.log(9))
    assert close(a, (alpha + beta) / 2) and close(b, (alpha - beta) / 2)

    train, val, test = calibkit.gen_hetero([3.0] * 3 + [1 / 3] * 3, [0.0] * 6, 2000, 3.0, seed=7)
    assert len(train) == 0 and len(val) == 6000 and len(test) == 6000
    assert val.num_classes == 6

    before = calibkit.evaluate(test)
    ts = calibkit.fit(val, "ts")
    cts = calibkit.fit(val, "cts")
    after_ts = calibkit.evaluate(test, ts)
    after_cts = calibkit.evaluate(test, cts)
    assert ts.method == "ts" and cts.method == "cts"
    assert after_ts["accuracy"] == before["accuracy"] == after_cts["accuracy"]
    assert after_cts["max_ece"] < after_ts["max_ece"] < before["max_ece"]

    doc = json.loads(cts.to_json())
    assert doc["method"] == "cts" and doc["gamma"] == "inf" and len(doc["alphas"]) == 6
    again = calibkit.CalibrationModel.from_json(cts.to_json())
    assert again.apply(test.logits(0)) == cts.apply(test.logits(0))

    rows = calibkit.reliability(test, cts, bins=10)
    assert len(rows) == 10 and sum(r[2] for r in rows) == len(test)

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "test.csv")
        test.write_csv(path)
        back = calibkit.LogitDataset.read_csv(path)
        assert calibkit.evaluate(back, cts) == after_cts

    try:
        calibkit.LogitDataset(2, [[0.0, float("nan")]], [0])
    except ValueError:
        pass
    else:
        raise AssertionError("NaN logits accepted")

    trials = calibkit.theorem1_experiment(20, 0.05, 4, seed=1)
    assert len(trials) == 8 and {t["scenario"] for t in trials} == {"S1", "S2"}

    print("calibkit smoke test passed:", {k: round(v, 4) for k, v in after_cts.items() if isinstance(v, float)})


if __name__ == "__main__":
    main()
