import numpy as np
import pytest

from splitsentinel import nn
from splitsentinel.autoencoder import AEConfig, AEModel, new_model
from splitsentinel.schema import FeatureMatrix, FeatureSchema


def make_schema(m: int, prefix: str = "d") -> FeatureSchema:
    return FeatureSchema.from_names([f"{prefix}{i}" for i in range(m)])


def hand_model(w_enc, b_enc, w_dec, b_dec, alpha=0.2) -> AEModel:
    enc = nn.DenseLayer(w_enc, b_enc, nn.LeakyReLU(alpha))
    dec = nn.DenseLayer(w_dec, b_dec, nn.Identity())
    return AEModel(enc, dec, make_schema(enc.n_in), AEConfig(alpha=alpha))


def random_model(m: int, seed: int, ratio: float = 0.5, bias_scale: float = 0.5) -> AEModel:
    rng = np.random.default_rng(seed)
    model = new_model(make_schema(m), AEConfig(reduction_ratio=ratio, seed=seed))
    model.encoder.bias[:] = rng.normal(scale=bias_scale, size=model.n_hidden)
    model.decoder.bias[:] = rng.normal(scale=bias_scale, size=m)
    return model


def rank_one_data(n: int, m: int, seed: int, noise: float = 0.02) -> FeatureMatrix:
    rng = np.random.default_rng(seed)
    z = rng.uniform(size=(n, 1))
    w = rng.uniform(0.2, 1.0, size=(1, m))
    values = z @ w + noise * rng.normal(size=(n, m))
    return FeatureMatrix(make_schema(m), values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# (criterion, passed, detail) lines from test_acceptance.py, echoed after the run
ACCEPTANCE: list = []


def record(criterion: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE.append((criterion, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE, key=lambda t: t[0]):
        terminalreporter.write_line(line)
