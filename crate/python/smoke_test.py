"""Smoke test for the qsdse extension module.

Build and run from the repository root:

    cargo build -p qsdse-py --release --features extension-module
    cp target/release/libqsdse.so python/qsdse.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import qsdse  # noqa: E402


def detour_space():
    layers = [
        {"id": "L1", "kind": "input", "depth": 0, "predecessors": [], "output_size": 1, "params_size": 0},
        {"id": "L2", "kind": "convolution", "depth": 1, "output_size": 1, "params_size": 0},
        {"id": "L3", "kind": "convolution", "depth": 2, "output_size": 1, "params_size": 0},
    ]
    net = {"name": "detour", "layers": layers}

    def impl(i, layout, latency):
        return {
            "id": i, "library": "generic", "algorithm": "gemm", "data_type": "FP32",
            "layout": layout, "core": "CPU", "latency_ms": latency, "memory_bytes": 0,
        }

    entries = {
        layer: [impl("a", "NCHW", a), impl("b", "NHWC", b)]
        for layer, a, b in [("L1", 2.0, 3.0), ("L2", 5.0, 4.0), ("L3", 2.0, 3.0)]
    }
    conversions = [
        {"from": {"layout": "NCHW"}, "to": {"layout": "NHWC"}, "penalty_ms": 2.0},
        {"from": {"layout": "NHWC"}, "to": {"layout": "NCHW"}, "penalty_ms": 2.0},
    ]
    costs = {"network_name": "detour", "entries": entries, "conversions": conversions}
    return qsdse.DesignSpace.from_json(json.dumps(net), json.dumps(costs))


def main():
    space = detour_space()
    assert space.depth == 3 and space.is_chain and space.vertex_count == 6
    assert space.evaluate({"L1": "a", "L2": "b", "L3": "a"}) == (12.0, 0)

    assert space.search("ds").best_latency_ms == 12.0
    assert space.search("ds+").best_latency_ms == 9.0
    assert space.search("dijkstra").best_latency_ms == 9.0
    rl = space.search("rl", episodes=200, seed=7)
    assert rl.best_latency_ms == 9.0, rl
    assert len(rl.learning_curve) == 200
    assert json.loads(rl.to_json())["algorithm"] == "rl"

    q = qsdse.bellman_update(0.0, 0.05, 0.9, -1.0, 0.0)
    assert q == -0.05
    assert abs(qsdse.bellman_update(q, 0.05, 0.9, -1.0, q) - -0.09975) < 1e-15
    sched = qsdse.epsilon_schedule(500)
    assert sched[0] == (1.0, 250) and sched[-1] == (0.0, 25) and len(sched) == 11

    assert qsdse.pareto_front([(15, 89), (10, 88), (12, 90)]) == [1, 2]
    assert qsdse.filter_candidates([10.0, 12.0, 13.0], 0.25) == [0, 1]

    scale, offset = qsdse.quant_params_minmax(-1.0, 1.0)
    assert math.isclose(scale, 1 / 127) and offset == 0
    assert qsdse.quantize_roundtrip([0.3, -0.2], scale) <= scale / 2
    assert qsdse.kl_calibrate([1.0] * 2048, -1.0, 1.0) <= scale + 1e-15

    offsets, footprint = qsdse.plan_memory_pool([(f"t{i}", i, i + 1, 64) for i in range(5)])
    assert footprint == 128 and len(offsets) == 5

    mobilenet = qsdse.DesignSpace.preset("mobilenet_like", seed=1)
    assert mobilenet.is_chain and mobilenet.depth > 50
    dj = mobilenet.search("dijkstra")
    assert dj.best_latency_ms <= mobilenet.search("ds+").best_latency_ms
    net_json, costs_json = qsdse.generate("chain", seed=3, depth=4)
    assert len(json.loads(net_json)["layers"]) == 5

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
