import numpy as np
import pytest

from liftcodec.codec import CodecConfig, Model, encoder_forward
from liftcodec.layers import gradient_check
from liftcodec.training import loss_and_grads


def aht_margins(model, batch):
    """``|pre-activation| - C`` for every thresholding layer the batch passes through."""
    _, cache = encoder_forward(batch, model.encoder)
    pre = cache["left_pre"] + [cache["right_pre"]]
    return np.concatenate([(np.abs(x) - aht.thresholds).ravel() for x, aht in zip(pre, model.encoder.aht_layers())])


def model_gradient_errors(model, batch, lam=0.05, omega=10.0, eps=1e-5, skip=(".thresholds",)):
    """Max relative FD error of every parameter array's analytic gradient."""
    params = model.named_arrays()
    _, grads, _ = loss_and_grads(model, batch, lam, omega)
    margins = aht_margins(model, batch)
    errors = {}
    for name, arr in params.items():
        if name.endswith(skip):
            continue

        def f(theta, arr=arr):
            saved = arr.copy()
            arr[...] = theta
            value = loss_and_grads(model, batch, lam, omega)[0][0]
            arr[...] = saved
            return value

        errors[name] = gradient_check(f, grads[name], arr.copy(), eps=eps, aht_margins=margins)
    return errors


@pytest.fixture
def probe_model():
    """A small model whose thresholds sit well clear of the probe batch's pre-activations."""
    rng = np.random.default_rng(123)
    model = Model.initialize(CodecConfig(), seed=5)
    for aht in model.encoder.aht_layers():
        aht.thresholds[:] = rng.uniform(0.05, 0.2, size=aht.thresholds.size)
        aht.slopes[:] = rng.uniform(0.7, 1.3, size=aht.slopes.size)
    batch = rng.normal(scale=0.8, size=(6, 7))
    assert np.abs(aht_margins(model, batch)).min() > 1e-3
    return model, batch


_VERDICTS = []


@pytest.fixture
def criterion(request):
    """Record a named pass/fail verdict, print it, and fail the test if it did not pass."""

    def verdict(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return verdict


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
