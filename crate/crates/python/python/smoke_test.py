"""Smoke test for the dsnn extension module.

Build and import it first, e.g.

    cargo build -p dsnn-py --release --features extension-module
    cp target/release/libdsnn.so /tmp/dsnn.so
    PYTHONPATH=/tmp python3 crates/python/python/smoke_test.py
"""

import json
import math
import os
import tempfile

import dsnn


def main():
    assert dsnn.firing_factor(0.0, 1.05, 3.33) == 1.0
    f = dsnn.firing_factor(5.0, 2.0, 10.0)
    assert abs(f - (1 - 0.5 * (1 - math.exp(-1.0)))) < 1e-12

    cfg = dsnn.Config()
    assert dsnn.ad_stdp_delta(0.0, 0.5, cfg) == 0.5 * dsnn.standard_stdp_delta(0.0, cfg)
    assert dsnn.ad_stdp_delta(-5.0, 0.0) == 0.0
    assert abs(dsnn.overall_accuracy(0.9, 0.95, 0.7, 0.6, 0.4) - (0.54 + 0.4 * 0.95 * 0.7)) < 1e-12

    train = dsnn.encode_poisson([0.0, 1.0], seed=3)
    assert all(0 not in step for step in train)
    assert sum(1 in step for step in train) > 0

    try:
        dsnn.Config("[growth]\np_th = 0.2\nf_th = 0.3\n")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    model = dsnn.Model.train_synthetic(seed=5)
    report = json.loads(model.report_json())
    dyn, stat = report["dynamic"], report["static"]
    print("task-1 recall dynamic %.3f static %.3f" % (dyn["task1_recall"], stat["task1_recall"]))
    assert dyn["task1_recall"] >= stat["task1_recall"]
    assert model.neurons[1] == 10

    verdict, _ = model.predict([0.05] * model.feature_dim, sample_id=1)
    assert verdict in ("benign", "attack")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.json")
        model.save(path)
        loaded = dsnn.Model.load(path)
        assert loaded.class_names == model.class_names
        row = [0.5] * model.feature_dim
        assert loaded.predict(row, 7) == model.predict(row, 7)

    checks = json.loads(dsnn.synth_verify())
    print("synth_verify passed:", checks["passed"])
    assert checks["passed"]
    print("ok", model)


if __name__ == "__main__":
    main()
