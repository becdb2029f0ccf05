#!/usr/bin/env python3
"""Smoke test of the sparselets_py extension module.

Builds nothing itself: run `cargo build --release -p sparselets-py` first,
then `python3 python/smoke_test.py`. The script copies the cdylib next to a
temp directory under the importable name and exercises the main types and
operations end to end.
"""

import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_module():
    candidates = [
        os.path.join(ROOT, "target", "release", "libsparselets_py.so"),
        os.path.join(ROOT, "target", "debug", "libsparselets_py.so"),
    ]
    lib = next((c for c in candidates if os.path.exists(c)), None)
    if lib is None:
        sys.exit("build the extension first: cargo build --release -p sparselets-py")
    tmp = tempfile.mkdtemp(prefix="sparselets_py_")
    shutil.copy(lib, os.path.join(tmp, "sparselets_py.so"))
    sys.path.insert(0, tmp)
    import sparselets_py

    return sparselets_py


def main():
    sp = import_module()
    size = 64

    # image pipeline on a natural crop
    img = sp.Image.load(os.path.join(ROOT, "data", "corpus", "camera_0.pgm"), size)
    assert img.size == size
    pipeline = img.whiten().circular_mask()
    assert pipeline.energy() > 0

    bank = sp.Bank(size)
    assert bank.n_scales == 6 and bank.n_orientations == 24
    assert bank.total_coefficients == bank.n_scales * 24 * size * size

    # a pure atom must come back with its own coefficient
    atom = bank.synthesize_atom(2, 7, 20, 30, 1.0, 0.0)
    assert abs(atom.energy() - 1.0) < 1e-9
    one = sp.extract(atom, bank, alpha=1.0, max_edges=1, energy_threshold=0.0)
    (x, y, scale, orientation, _theta, re, im) = one.edges()[0]
    assert (x, y, scale, orientation) == (20, 30, 2, 7)
    assert abs(complex(re, im) - 1.0) < 1e-8

    # extraction: energy identity and reconstruction agreement
    edges = sp.extract(pipeline, bank, alpha=0.8, max_edges=200, energy_threshold=0.0)
    curve = edges.energy_curve(0.8)
    assert curve[0] == 1.0
    assert all(b < a for a, b in zip(curve, curve[1:])), "residual energy must decrease"
    rec = sp.reconstruct(edges, bank)
    err = sum(
        (a - b) ** 2 for a, b in zip(pipeline.data(), rec.data())
    ) / pipeline.energy()
    assert abs(err - curve[-1]) < 1e-6, (err, curve[-1])

    # json round trip
    back = sp.EdgeList.from_json(edges.to_json())
    assert back.edges() == edges.edges()

    # priors: orientation histogram sums to 1, equalization stays in range
    weights = sp.orientation_histogram([edges], n_bins=24)
    assert abs(sum(weights) - 1.0) < 1e-9
    thetas = sp.equalize_orientations(weights, 24)
    assert len(thetas) == 24
    assert all(-math.pi / 2 < t <= math.pi / 2 for t in thetas)

    # chevron map over the extraction, and prior-guided pursuit runs
    ratios = sp.chevron_map([edges])
    assert len(ratios) == 24 * 24
    stim, n_circle = sp.make_circle_in_noise(bank, radius=20.0, n_clutter=30, seed=1)
    assert n_circle > 0
    guided = sp.extract_with_prior(
        stim, bank, [edges], alpha=0.8, max_edges=n_circle, energy_threshold=0.0, eta=0.15
    )
    plain = sp.extract_with_prior(
        stim, bank, [edges], alpha=0.8, max_edges=n_circle, energy_threshold=0.0, eta=0.0
    )
    unguided = sp.extract(stim, bank, alpha=0.8, max_edges=n_circle, energy_threshold=0.0)
    assert plain.to_json() == unguided.to_json(), "eta=0 must equal plain pursuit"
    assert guided.n_steps == n_circle

    print("smoke test: all assertions passed")


if __name__ == "__main__":
    main()
