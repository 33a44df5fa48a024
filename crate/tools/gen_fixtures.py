#!/usr/bin/env python3
"""Regenerates the synthetic fixture set under fixtures/.

Everything here is deterministic. Weights and images are synthetic
(there is no training pipeline in this repo); the end-to-end tests
check bit-exact agreement between the macro simulation and a reference
integer interpreter, so fixture values only need realistic shape and
spread, not accuracy.

Run from the repository root:  python3 tools/gen_fixtures.py
"""

import json
import math
import os

import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "fixtures")

LAYERS = [
    {"name": "input", "kind": "input"},
    {"name": "conv1", "kind": "conv", "kernel": {"h": 5, "w": 5, "in_ch": 1, "out_ch": 6}, "stride": 1},
    {"name": "pool1", "kind": "pool", "kernel": {"h": 2, "w": 2, "in_ch": 6, "out_ch": 6}, "stride": 2},
    {"name": "conv2", "kind": "conv", "kernel": {"h": 5, "w": 5, "in_ch": 6, "out_ch": 16}, "stride": 1},
    {"name": "pool2", "kind": "pool", "kernel": {"h": 2, "w": 2, "in_ch": 16, "out_ch": 16}, "stride": 2},
    {"name": "conv3", "kind": "conv", "kernel": {"h": 1, "w": 1, "in_ch": 16, "out_ch": 120}, "stride": 1},
    {"name": "flatten", "kind": "flatten"},
    {"name": "fc1", "kind": "fc", "kernel": {"h": 1, "w": 1, "in_ch": 1920, "out_ch": 84}, "stride": 1},
    {"name": "fc2", "kind": "fc", "kernel": {"h": 1, "w": 1, "in_ch": 84, "out_ch": 10}, "stride": 1},
]

WEIGHTED = ["conv1", "conv2", "conv3", "fc1", "fc2"]
ROWS_PER_BANK = 64
PRUNE_RATIO = 0.4


def layer_dims(name):
    for layer in LAYERS:
        if layer["name"] == name:
            k = layer["kernel"]
            if layer["kind"] == "conv":
                return k["out_ch"], k["h"] * k["w"] * k["in_ch"]
            return k["out_ch"], k["in_ch"]
    raise KeyError(name)


def gen_weights(seed, bits):
    """Integer weights per layer: rough bell curve over the signed range."""
    rng = np.random.default_rng(seed)
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    sigma = (hi + 1) / 2.6
    out = {}
    for name in WEIGHTED:
        filters, per_filter = layer_dims(name)
        w = np.clip(np.rint(rng.normal(0.0, sigma, (filters, per_filter))), lo, hi)
        out[name] = w.astype(np.int64)
    return out


def prune_mask(weights, ratio):
    """Per-layer magnitude pruning, ties kept at the earliest position.

    Mirrors the simulator: rank by (|w| desc, filter asc, index asc) and
    keep round((1 - ratio) * n).
    """
    masks = {}
    for name, w in weights.items():
        flat = []
        for f in range(w.shape[0]):
            for i in range(w.shape[1]):
                flat.append((-abs(int(w[f, i])), f, i))
        flat.sort()
        keep = int(round((1.0 - ratio) * len(flat)))
        mask = np.zeros_like(w, dtype=bool)
        for _, f, i in flat[:keep]:
            mask[f, i] = True
        masks[name] = mask
    return masks


def check_mapping(weights, masks):
    """The bank-count properties the test suite pins on this fixture."""
    per_filter = {name: masks[name].sum(axis=1) for name in WEIGHTED}
    c1 = per_filter["conv1"].max()
    c2max, c2min = per_filter["conv2"].max(), per_filter["conv2"].min()
    assert c1 <= ROWS_PER_BANK, f"conv1 filter needs >1 bank ({c1})"
    assert ROWS_PER_BANK < c2max <= 2 * ROWS_PER_BANK, f"conv2 max retained {c2max}"
    assert c2min > 0, "conv2 has a dead filter"
    for name in WEIGHTED:
        assert per_filter[name].min() > 0, f"{name} has a dead filter"
    print(f"  conv1 max retained/filter: {c1} -> 1 bank x 6 filters")
    print(f"  conv2 retained/filter: {c2min}..{c2max} -> 2 banks x 16 filters")


def write_weights_csv(path, weights):
    with open(path, "w") as fh:
        fh.write("layer,filter,index,value\n")
        for name in WEIGHTED:
            w = weights[name]
            for f in range(w.shape[0]):
                for i in range(w.shape[1]):
                    fh.write(f"{name},{f},{i},{int(w[f, i])}\n")


def gen_images(seed, count=100):
    """Blob images: a few smooth Gaussian bumps per 28x28 frame."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:28, 0:28]
    images, labels = [], []
    for i in range(count):
        label = int(rng.integers(0, 10))
        img = np.zeros((28, 28))
        for _ in range(2 + label % 3):
            cy, cx = rng.uniform(5, 23, 2)
            s = rng.uniform(1.5, 4.0)
            amp = rng.uniform(0.5, 1.0)
            img += amp * np.exp(-(((ys - cy) ** 2) + ((xs - cx) ** 2)) / (2 * s * s))
        img = np.clip(img, 0.0, 1.0)
        images.append(img)
        labels.append(label)
    return images, labels


def write_images_csv(path, images, labels):
    with open(path, "w") as fh:
        header = ",".join(f"p{i}" for i in range(28 * 28))
        fh.write(f"id,label,{header}\n")
        for idx, (img, label) in enumerate(zip(images, labels)):
            pixels = ",".join(f"{v:.6f}" for v in img.ravel())
            fh.write(f"{idx},{label},{pixels}\n")


def forward_max_accs(images, weights, masks, act_bits):
    """Integer forward pass tracking each weighted layer's peak |acc|,
    choosing requantize denominators as it goes."""
    qmax = (1 << act_bits) - 1
    scales = {}
    acts = [np.rint(np.clip(img, 0, 1) * qmax).astype(np.int64).reshape(28, 28, 1) for img in images]

    def conv(x, w, mask, k, stride):
        ih, iw, ic = x.shape
        oh = (ih - k["h"]) // stride + 1
        ow = (iw - k["w"]) // stride + 1
        out = np.zeros((oh, ow, k["out_ch"]), dtype=np.int64)
        wm = (w * mask).reshape(k["out_ch"], k["h"], k["w"], k["in_ch"])
        for oy in range(oh):
            for ox in range(ow):
                patch = x[oy * stride : oy * stride + k["h"], ox * stride : ox * stride + k["w"], :]
                out[oy, ox, :] = np.tensordot(wm, patch, axes=([1, 2, 3], [0, 1, 2]))
        return out

    def pool(x, k, stride):
        ih, iw, c = x.shape
        oh = (ih - k) // stride + 1
        ow = (iw - k) // stride + 1
        out = np.zeros((oh, ow, c), dtype=np.int64)
        for oy in range(oh):
            for ox in range(ow):
                out[oy, ox, :] = x[oy * stride : oy * stride + k, ox * stride : ox * stride + k, :].max(axis=(0, 1))
        return out

    final = WEIGHTED[-1]
    for layer in LAYERS:
        name, kind = layer["name"], layer["kind"]
        if kind == "input":
            continue
        if kind == "pool":
            acts = [pool(x, layer["kernel"]["h"], layer["stride"]) for x in acts]
        elif kind == "flatten":
            acts = [x.reshape(1, 1, -1) for x in acts]
        elif kind in ("conv", "fc"):
            w, mask = weights[name], masks[name]
            if kind == "conv":
                raw = [conv(x, w, mask, layer["kernel"], layer["stride"]) for x in acts]
            else:
                wm = w * mask
                raw = [(wm @ x.ravel()).reshape(1, 1, -1) for x in acts]
            if name == final:
                acts = raw
                continue
            peak = max(int(np.abs(r).max()) for r in raw)
            den = max(1, math.ceil(peak / qmax)) if peak > 0 else 1
            scales[name] = {"num": 1, "den": den}
            acts = [np.clip((np.maximum(r, 0) + den // 2) // den, 0, qmax) for r in raw]
    return scales


def main():
    os.makedirs(OUT, exist_ok=True)

    network = {"name": "lenet5", "input_shape": [28, 28, 1], "layers": []}
    for layer in LAYERS:
        entry = {"name": layer["name"], "kind": layer["kind"]}
        if "kernel" in layer:
            entry["kernel"] = layer["kernel"]
            entry["stride"] = layer["stride"]
        network["layers"].append(entry)
    with open(f"{OUT}/lenet5.json", "w") as fh:
        json.dump(network, fh, indent=2)
        fh.write("\n")

    print("weights (4-bit):")
    w4 = gen_weights(101, 4)
    m4 = prune_mask(w4, PRUNE_RATIO)
    check_mapping(w4, m4)
    write_weights_csv(f"{OUT}/lenet5_weights_w4.csv", w4)

    print("weights (8-bit):")
    w8 = gen_weights(202, 8)
    m8 = prune_mask(w8, PRUNE_RATIO)
    check_mapping(w8, m8)
    write_weights_csv(f"{OUT}/lenet5_weights_w8.csv", w8)

    images, labels = gen_images(303)
    write_images_csv(f"{OUT}/images.csv", images, labels)

    print("calibrating scales (first 10 images)...")
    schemes = {}
    for act_bits, weight_bits in [(1, 4), (2, 4), (4, 4), (8, 8)]:
        label = f"{act_bits}A{weight_bits}W"
        weights, masks = (w8, m8) if weight_bits == 8 else (w4, m4)
        layer_scales = forward_max_accs(images[:10], weights, masks, act_bits)
        schemes[label] = {
            "activation_bits": act_bits,
            "weight_bits": weight_bits,
            "scheme_label": label,
            "input_scale": 1.0 / ((1 << act_bits) - 1) if act_bits > 1 else 0.5,
            "layer_scales": layer_scales,
        }
        print(f"  {label}: {layer_scales}")
    with open(f"{OUT}/lenet5_scales.json", "w") as fh:
        json.dump({"schemes": schemes}, fh, indent=2)
        fh.write("\n")

    # Cell library: per-cell costs derived from whole-tree calibration
    # anchors of the 64-operand 4-bit reduction tree.
    cell_library = {
        "cells": [],
        "anchors": {
            "operand_count": 64,
            "operand_width": 4,
            "all_28t_power_uw": 892.0,
            "interleaved_power_uw": 640.0,
            "all_28t_delay_ns": 3.56,
            "interleaved_delay_ns": 1.796,
        },
        "costs": {"loa_or": {"transistors": 6, "power_uw": 0.3, "delay_ns": 0.03}},
    }
    with open(f"{OUT}/adder_cells.json", "w") as fh:
        json.dump(cell_library, fh, indent=2)
        fh.write("\n")

    trees = {
        "presets": [
            {
                "name": "all28t",
                "operand_count": 64,
                "operand_width": 4,
                "interleave_pattern": ["exact28t"],
                "apply": "cycle",
                "stagger_stages": False,
                "max_consecutive_degrading": 1,
            },
            {
                "name": "interleaved",
                "operand_count": 64,
                "operand_width": 4,
                "interleave_pattern": ["exact28t", "exact10t"],
                "apply": "cycle",
                "stagger_stages": True,
                "max_consecutive_degrading": 1,
            },
            {
                "name": "loa2",
                "operand_count": 2,
                "operand_width": 4,
                "interleave_pattern": ["loa_or", "loa_or", "exact28t"],
                "apply": "prefix",
                "stagger_stages": False,
                "max_consecutive_degrading": 1,
            },
        ]
    }
    with open(f"{OUT}/adder_trees.json", "w") as fh:
        json.dump(trees, fh, indent=2)
        fh.write("\n")

    corners = {
        "corners": [
            {"corner": "TT", "temperature_c": 25, "supply_v": 1.2, "sense_threshold_shift": 0.0},
            {"corner": "SS", "temperature_c": 125, "supply_v": 1.2, "sense_threshold_shift": -0.10},
            {"corner": "FF", "temperature_c": -40, "supply_v": 1.2, "sense_threshold_shift": 0.10},
            {"corner": "SF", "temperature_c": 125, "supply_v": 1.2, "sense_threshold_shift": -0.05},
            {"corner": "FS", "temperature_c": -40, "supply_v": 1.2, "sense_threshold_shift": 0.05},
        ]
    }
    with open(f"{OUT}/corners.json", "w") as fh:
        json.dump(corners, fh, indent=2)
        fh.write("\n")

    # Calibration preset pinned to the published operating point:
    # 0.48 ns/cycle, 2.31 TOPS dense, 314 TOPS/W dense. The workload and
    # power override are chosen so the formulas land exactly on that
    # triple; the sparse figures ride along as reference metadata.
    perf = {
        "cycle_latency_ns": 0.48,
        "adder_tree_power_uw_per_bank": 640.0,
        "peripheral_shares": {
            "accumulator": 0.30,
            "activation": 0.20,
            "pooling": 0.10,
            "batchnorm": 0.10,
            "control": 0.10,
        },
        "power_override_w": 2.31e12 / 314e12,
        "credit_rule": "cycle_elision",
        "workload": {"macs": 554400000, "cycles": 1000000},
        "reference": {
            "latency_ns_per_cycle": 0.48,
            "throughput_tops_dense": 2.31,
            "throughput_tops_sparse": 3.1,
            "efficiency_tops_per_w_dense": 314.0,
            "efficiency_tops_per_w_sparse": 419.0,
            "sparsity": 0.30,
            "bitcell_area_um2": 0.85,
        },
    }
    with open(f"{OUT}/perf_calibration.json", "w") as fh:
        json.dump(perf, fh, indent=2)
        fh.write("\n")

    reference_mapping = {
        "description": (
            "Published layer-wise mapping figures for the pruned network. "
            "Carried for comparison only: the analytical formulas in this "
            "repo reproduce the conv1/conv2 bank counts but not the cycle "
            "column or the conv3/fc rows, so plan reports flag those "
            "deltas instead of asserting them."
        ),
        "rows": [
            {"layer": "conv1", "banks_used": 6, "op_cycles": 384},
            {"layer": "conv2", "banks_used": 32, "op_cycles": 48},
            {"layer": "conv3", "banks_used": 45, "op_cycles": 16},
            {"layer": "fc1", "banks_used": 168, "op_cycles": 3840},
            {"layer": "fc2", "banks_used": 20, "op_cycles": 64},
        ],
    }
    with open(f"{OUT}/lenet5_reference_mapping.json", "w") as fh:
        json.dump(reference_mapping, fh, indent=2)
        fh.write("\n")

    # Published comparison rows for other tree designs. Reference data
    # only; the third-party cells are not modeled here.
    tree_reference = {
        "description": "Published adder-tree comparison rows (65 nm, 1.2 V).",
        "rows": [
            {"structure": "all28t", "avg_error": 0.0, "rmse": 0.0, "power_uw": 892.0, "delay_ns": 3.56},
            {"structure": "interleaved", "avg_error": 0.0, "rmse": 0.0, "power_uw": 640.0, "delay_ns": 1.796},
            {"structure": "SESA", "avg_error": 5.47, "rmse": 4.67, "power_uw": 386.25, "delay_ns": 2.29},
            {"structure": "PG-26T", "avg_error": 0.0, "rmse": 0.0, "power_uw": 586.0, "delay_ns": 2.5},
            {"structure": "2D-Inter-(7T+28T)", "avg_error": 0.94, "rmse": 2.86, "power_uw": 511.0, "delay_ns": 4.4},
            {"structure": "1D-Inter-(10T+28T)", "avg_error": 1.34, "rmse": 3.1, "power_uw": 673.89, "delay_ns": 7.34},
            {"structure": "Hybrid-(28T+16T)", "avg_error": 4.5, "rmse": 8.8, "power_uw": 708.0, "delay_ns": 9.29},
            {"structure": "LOA-(28T+OR)", "avg_error": 1.38, "rmse": 4.0, "power_uw": 488.0, "delay_ns": 4.7},
        ],
    }
    with open(f"{OUT}/adder_tree_reference.json", "w") as fh:
        json.dump(tree_reference, fh, indent=2)
        fh.write("\n")

    print("fixtures written to", os.path.abspath(OUT))


if __name__ == "__main__":
    main()
