"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also repeated in the terminal summary.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftcodec import layers as L
from liftcodec.cli import main
from liftcodec.codec import CodecConfig, Model, count_parameters, dequantize_latent, init_encoder, quantize_latent
from liftcodec.entropy import StreamHeader, pack_stream, unpack_stream
from liftcodec.lifting import WaveletCoeffs, lwt_adjoint, lwt_forward, lwt_forward_packed, lwt_inverse_packed
from liftcodec.metrics import evaluate_record
from liftcodec.signal_io import SynthConfig, segment_array, split_record, synthesize_bearing
from liftcodec.training import TrainConfig, train_model

from conftest import model_gradient_errors


def test_01_perfect_reconstruction(criterion):
    rng = np.random.default_rng(101)
    lengths = rng.integers(2, 65, size=10_000)
    worst = 0.0
    for n in np.unique(lengths):
        x = rng.normal(size=(int(np.sum(lengths == n)), int(n)))
        worst = max(worst, float(np.abs(lwt_inverse_packed(lwt_forward_packed(x)) - x).max()))
    criterion("1 LWT perfect reconstruction", worst <= 1e-12, f"max |err| = {worst:.2e} over 10^4 vectors, n in 2..64")


def test_02_affine_annihilation(criterion):
    # odd lengths: with symmetric extension an even-length ramp keeps its slope in the last detail
    rng = np.random.default_rng(102)
    worst = 0.0
    for a, b in rng.uniform(-1, 1, size=(100, 2)):
        for n in range(3, 65, 2):
            worst = max(worst, float(np.abs(lwt_forward(a * np.arange(n) + b).detail).max()))
    criterion("2 affine annihilation", worst <= 1e-14, f"max |detail| = {worst:.2e}, 100 (a,b), odd n in 3..63")


def test_03_adjoint_identity(criterion):
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 65))
        x, g = rng.normal(size=(2, n))
        lhs = lwt_forward_packed(x) @ g
        rhs = x @ lwt_adjoint(WaveletCoeffs.from_packed(g))
        worst = max(worst, abs(lhs - rhs))
    criterion("3 adjoint identity", worst <= 1e-12, f"max gap = {worst:.2e} over 10^3 pairs")


def test_04_gradient_checks(criterion, probe_model):
    model, batch = probe_model
    errors = model_gradient_errors(model, batch)
    name = max(errors, key=errors.get)

    # threshold surrogate: layer gradient is exactly sum(gy * (-beta * sign(x)) on survivors)
    rng = np.random.default_rng(104)
    p = L.AHTParams(rng.uniform(0.1, 0.5, 7), rng.uniform(0.5, 1.5, 7))
    x, gy = rng.normal(size=(2, 40, 7))
    declared = np.array([[-p.slopes[k] * np.sign(x[i, k]) if abs(x[i, k]) > p.thresholds[k] else 0.0
                          for k in range(7)] for i in range(40)])
    surrogate_ok = np.array_equal(L.threshold_surrogate(x, p), declared)
    _, grads = L.aht_backward(x, p, gy)
    surrogate_ok &= np.array_equal(grads["thresholds"], np.sum(gy * declared, axis=0))

    ok = errors[name] < 1e-5 and surrogate_ok
    criterion("4 gradient checks", ok,
              f"{len(errors)} arrays, worst {name} rel err {errors[name]:.2e}; surrogate exact: {surrogate_ok}")


def test_05_encoder_parameter_count(criterion):
    count = count_parameters(init_encoder(7, rng=0))
    criterion("5 encoder parameter count", count == 74, f"{count} at M=7")


def test_06_aht_piecewise_law(criterion):
    rng = np.random.default_rng(106)
    p = L.AHTParams(rng.uniform(0.01, 2.0, 7), rng.uniform(-2.0, 2.0, 7))
    offsets = np.concatenate([np.linspace(-1e-3, 1e-3, 2001), [0.0]])
    bad = 0
    for k in range(7):
        c = p.thresholds[k]
        for sign in (1.0, -1.0):
            grid = sign * (c + offsets)
            x = np.zeros((grid.size, 7))
            x[:, k] = grid
            out = L.aht_forward(x, p)[:, k]
            expected = np.array([0.0 if abs(v) <= c else p.slopes[k] * v for v in grid])
            bad += int(np.count_nonzero(out != expected))
    criterion("6 AHT piecewise law", bad == 0, f"{bad} mismatches on 7 x 2 x 2002 grid points")


def test_07_entropy_losslessness(criterion):
    rng = np.random.default_rng(107)
    streams = [np.zeros((9, 7), dtype=np.int64), np.full((9, 7), 3, dtype=np.int64), np.zeros((1, 7), dtype=np.int64)]
    for sparsity in np.linspace(0.0, 1.0, 10_000 - len(streams)):
        nseg = int(rng.integers(1, 30))
        q = rng.integers(-int(rng.integers(1, 300)), int(rng.integers(1, 300)) + 1, size=(nseg, 7))
        q[rng.random(q.shape) < sparsity] = 0
        streams.append(q)
    failures = 0
    for q in streams:
        pad = int(rng.integers(0, 7))
        header = StreamHeader(7, q.shape[0], q.size - pad, pad, 3, 4.0)
        h, out = unpack_stream(pack_stream(header, q))
        failures += int(h != header or not np.array_equal(out, q))
    criterion("7 entropy losslessness", failures == 0, f"{failures} failures over {len(streams)} streams")


def test_08_quantizer_bound(criterion):
    mu, alpha = 3, 4.0
    bound = alpha / (2 * 10**mu)
    z = np.random.default_rng(108).uniform(-5, 5, size=100_000)
    worst = float(np.abs(dequantize_latent(quantize_latent(z, mu, alpha), mu, alpha) - z).max())
    half = (np.arange(-50, 50) + 0.5) * alpha / 10**mu
    attained = np.abs(dequantize_latent(quantize_latent(half, mu, alpha), mu, alpha) - half)
    gap = float(np.abs(attained - bound).max())
    criterion("8 quantizer bound", worst <= bound and gap <= 1e-15,
              f"max err {worst:.6f} <= {bound}; half-step attainment gap {gap:.1e}")


@pytest.fixture(scope="module")
def desk_run():
    record = synthesize_bearing(SynthConfig(duration_s=10.0, sample_rate_hz=8000.0, seed=1))
    train, holdout = split_record(record, 0.2)
    model, log = train_model(segment_array(train.samples, 7), TrainConfig(epochs_max=200, seed=0))
    baseline = Model.initialize(CodecConfig(), seed=0)
    return log, evaluate_record(holdout, model)[0], evaluate_record(holdout, baseline)[0]


def test_09_end_to_end(criterion, desk_run):
    log, trained, random = desk_run
    print(f"      trained: CR {trained.cr:.2f}  PRD {trained.prd:.2f}  QS {trained.qs:.3f}  ({len(log.records)} epochs)")
    print(f"      random:  CR {random.cr:.2f}  PRD {random.prd:.2f}")
    print("      reference (real MFPT data, not enforced): CR 9.91  PRD 17.29  QS 0.57")
    ok = len(log.records) <= 200 and trained.prd < random.prd and trained.cr >= 5
    criterion("9 end-to-end desk run", ok,
              f"PRD {trained.prd:.2f} < {random.prd:.2f}, CR {trained.cr:.2f} >= 5 at B_in=32")


def test_10_kld_properties(criterion):
    lam, M = 0.05, 7

    @settings(max_examples=500, deadline=None)
    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=16), st.floats(0.01, 0.99))
    def nonnegative(z, lam_):
        assert L.kld_penalty(L.activity_softmax(np.array(z)), lam_) >= 0

    nonnegative()
    at_lambda = float(L.kld_penalty(np.full(M, lam), lam))
    uniform = float(L.kld_penalty(np.full(M, 1 / M), lam))
    a = 1 / M
    direct = M * (lam * np.log(lam / a) + (1 - lam) * np.log((1 - lam) / (1 - a)))
    ok = abs(at_lambda) <= 1e-12 and abs(uniform - 0.31656387) <= 1e-6 and abs(uniform - direct) <= 1e-12
    criterion("10 KLD properties", ok, f"KL at lambda {at_lambda:.1e}; uniform activity total {uniform:.8f}")


def test_11_determinism(criterion, tmp_path):
    record = tmp_path / "bearing.f32"
    assert main(["synth", "--out", str(record), "--duration", "1.0", "--seed", "5"]) == 0
    outputs = []
    for run in ("a", "b"):
        model, stream = tmp_path / f"{run}.json", tmp_path / f"{run}.aalw"
        assert main(["train", "--input", str(record), "--out-model", str(model), "--seed", "7", "--epochs", "20"]) == 0
        assert main(["compress", "--input", str(record), "--model", str(model), "--out", str(stream)]) == 0
        outputs.append((model.read_bytes(), stream.read_bytes()))
    same_model = outputs[0][0] == outputs[1][0]
    same_stream = outputs[0][1] == outputs[1][1]
    criterion("11 determinism", same_model and same_stream,
              f"model identical: {same_model}, bitstream identical: {same_stream}")
