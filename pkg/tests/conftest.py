import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repo", max_examples=60, deadline=None)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


SMALL_INI = """
[link]
N = 16
qam = 4
[channel]
taps = 4
[ce]
samples = 3000
val_samples = 500
train_snr_db = 15
[oampnet]
epochs = 3
batch_size = 20
dev_size = 40
[sweep]
receivers = dl-oamp,oamp,ls-mmse,mmse-cp,ml-cp-csi
snr_db = 5,15
target_errors = 100
frames_cap = 300
block_size = 50
figure =
"""


@pytest.fixture(scope="session")
def small_run(tmp_path_factory):
    """A small config with trained checkpoints written next to it."""
    from dloamp.config import load_config
    from dloamp.io import save_ce, save_oampnet
    from dloamp.pipeline import train_ce_net, train_oamp_net_from_config

    d = tmp_path_factory.mktemp("small")
    ini = d / "small.ini"
    ini.write_text(SMALL_INI)
    cfg = load_config(ini)
    ce = train_ce_net(cfg)
    net = train_oamp_net_from_config(cfg, ce).params
    save_ce(ce, d / "ce_net.json")
    save_oampnet(net, d / "oamp_net.json")
    return {"dir": d, "ini": ini, "cfg": cfg, "ce": ce, "net": net}


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
