#!/usr/bin/env python3
"""Smoke test for the phorc_py extension module.

Runs a miniature end-to-end experiment through the Python bindings: build a
swirl reservoir, modulate a bit stream, simulate, train the readout, quantize
it, retrain exploratively, evaluate under drift noise, and drive a tiny sweep.

The module is loaded from the cargo build output (``cargo build -p phorc-py``
runs automatically if no library is found), so no pip install is needed.
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def load_module():
    def built_libs():
        return sorted(
            ROOT.glob("target/*/libphorc_py.so"),
            key=lambda p: p.stat().st_mtime,
            reverse=True,
        )

    libs = built_libs()
    if not libs:
        subprocess.run(["cargo", "build", "-p", "phorc-py"], cwd=ROOT, check=True)
        libs = built_libs()
    if not libs:
        sys.exit("no libphorc_py.so under target/; build with: cargo build -p phorc-py")

    dest = Path(tempfile.mkdtemp(prefix="phorc_py_"))
    shutil.copy2(libs[0], dest / "phorc_py.so")
    sys.path.insert(0, str(dest))
    import phorc_py

    return phorc_py


def main():
    m = load_module()
    print(f"loaded phorc_py {m.__version__}")

    # Topology: build, round-trip through TOML.
    topo = m.SwirlTopology.build(rows=4, cols=4, delay_samples=10, waveguide_loss=0.1, seed=1)
    assert topo.n_nodes == 16 and topo.rows == 4 and topo.cols == 4
    assert m.SwirlTopology.from_toml(topo.to_toml()).n_edges == topo.n_edges

    # Signal, simulation, and a train/validation/test split over bits.
    spb = 20
    n_bits, n_train, n_val = 260, 160, 50
    bits = m.generate_bits(n_bits, seed=7)
    targets = m.header_target(bits, "1101")
    signal = m.modulate(bits, samples_per_bit=spb, smoothing_alpha=0.1)
    assert len(signal) == n_bits * spb
    states = m.simulate(topo, signal)
    assert states.n_steps == n_bits * spb and states.n_nodes == 16
    row0 = states.values()[5]
    assert len(row0) == 16 and isinstance(row0[0], complex)

    train_states = states.slice_bits(0, n_train)
    val_states = states.slice_bits(n_train, n_train + n_val)
    test_states = states.slice_bits(n_train + n_val, n_bits)
    train_bits = targets[:n_train]
    val_bits = targets[n_train : n_train + n_val]
    test_bits = targets[n_train + n_val :]

    # Training descends and beats the all-zeros predictor on held-out bits.
    samples = [float(t) for t in train_bits for _ in range(spb)]
    weights, loss_before, loss_after = m.train_readout(
        train_states, samples, epochs=400, l2_lambda=1e-4, seed=1
    )
    assert loss_after < loss_before
    assert math.isclose(m.loss(train_states, weights, samples, 1e-4), loss_after, rel_tol=1e-9)
    grad_a, grad_p = m.gradient(train_states, weights, samples, 1e-4)
    assert len(grad_a) == len(grad_p) == 16

    _, _, threshold = m.evaluate_ber(train_states, weights, train_bits)
    ber, mse, _ = m.evaluate_ber(test_states, weights, test_bits, threshold=threshold)
    print(f"full-precision test BER {ber:.4f} (mse {mse:.5f})")
    assert ber < 0.5 and mse >= 0.0

    # Quantization model.
    spec = m.QuantizationSpec(8, 8, 10.0, 0.0)
    assert spec.w_min == 0.1 and len(spec.amp_grid()) == 8 and len(spec.phase_grid()) == 8
    assert m.quantize_amplitude(0.0, spec) == spec.w_min
    assert m.quantize_phase(spec.phase_step * 1.4, spec) == spec.phase_step
    naive = m.direct_quantize(weights, spec)
    grid = spec.amp_grid()
    assert all(any(abs(a - g) < 1e-12 for g in grid) for a in naive.amplitudes)

    # Explorative retraining never ends worse than direct quantization on the
    # validation split it selects by.
    _, _, thr = m.evaluate_ber(train_states, naive, train_bits)
    naive_val_ber, _, _ = m.evaluate_ber(val_states, naive, val_bits, threshold=thr)
    retrained, val_ber, _ = m.explorative_retrain(
        weights,
        train_states,
        train_bits,
        val_states,
        val_bits,
        spec,
        retrain_epochs=20,
        n_partitions=3,
        n_iterations=2,
        seed=1,
    )
    print(f"validation BER: naive {naive_val_ber:.4f}, explorative {val_ber:.4f}")
    assert val_ber <= naive_val_ber + 1e-12
    assert all(any(abs(a - g) < 1e-12 for g in grid) for a in retrained.amplitudes)

    # Monte Carlo drift evaluation.
    noisy = m.QuantizationSpec(8, 8, 10.0, 0.1)
    ber_mean, ber_std, mse_mean = m.monte_carlo(
        retrained, noisy, train_states, train_bits, test_states, test_bits, mc_draws=5, seed=3
    )
    assert 0.0 <= ber_mean <= 0.5 and ber_std >= 0.0 and mse_mean >= 0.0

    # Error mapping.
    try:
        m.QuantizationSpec(1, 8, 10.0, 0.0)
        sys.exit("expected ValueError for amp_levels = 1")
    except ValueError:
        pass
    try:
        m.ReadoutWeights.read_csv(ROOT / "no-such-dir" / "w.csv")
        sys.exit("expected OSError for a missing weights file")
    except OSError:
        pass

    # Tiny sweep: all rows computed once, all skipped on rerun.
    out = Path(tempfile.mkdtemp(prefix="phorc_sweep_")) / "results.csv"
    config = """
task = "header"
n_train_bits = 120
n_val_bits = 60
n_test_bits = 60
amp_levels = 8
extinction_ratio = 10.0
noise_level = [0.0, 0.1]
mc_draws = 3
seeds = 1

[training]
epochs = 20
l2_lambda = 1e-4

[explorative]
n_partitions = 2
n_iterations = 1
retrain_epochs = 5
"""
    n_rows, n_computed, n_skipped = m.run_sweep(config, out)
    assert out.exists() and n_computed == n_rows and n_skipped == 0
    n_rows2, n_computed2, n_skipped2 = m.run_sweep(config, out)
    assert (n_rows2, n_computed2, n_skipped2) == (n_rows, 0, n_rows)
    print(f"sweep wrote {n_rows} rows, rerun skipped all of them")

    print("smoke test passed")


if __name__ == "__main__":
    main()
