import numpy as np
import pytest

from texplain import Raster
from texplain.synth import make_stripes


ECHO_SCORER = """\
import json
import struct
import sys

while True:
    header = sys.stdin.buffer.read(4)
    if len(header) < 4:
        break
    (length,) = struct.unpack(">I", header)
    payload = sys.stdin.buffer.read(length)
    if len(payload) < length:
        break
    reply = {"probs": [0.25, 0.75], "labels": ["A", "B"]}
    sys.stdout.write(json.dumps(reply) + "\\n")
    sys.stdout.flush()
"""

BAD_REPLY_SCORER = """\
import struct
import sys

header = sys.stdin.buffer.read(4)
(length,) = struct.unpack(">I", header)
sys.stdin.buffer.read(length)
sys.stdout.write("this is not json\\n")
sys.stdout.flush()
"""


@pytest.fixture(scope="session")
def echo_scorer_script(tmp_path_factory):
    path = tmp_path_factory.mktemp("scorers") / "echo_scorer.py"
    path.write_text(ECHO_SCORER)
    return path


@pytest.fixture(scope="session")
def bad_reply_script(tmp_path_factory):
    path = tmp_path_factory.mktemp("scorers") / "bad_reply.py"
    path.write_text(BAD_REPLY_SCORER)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240317)


@pytest.fixture
def random_image(rng):
    return Raster(rng.integers(0, 256, size=(24, 32, 3)).astype(np.uint8))


@pytest.fixture
def stripe_image():
    si = make_stripes(64, np.random.default_rng(7))
    return si.raster


@pytest.fixture
def stripe_with_mask():
    return make_stripes(64, np.random.default_rng(7))
