import numpy as np
import pytest

from conntest import pbm
from conntest.image import Image


def random_image(side, seed):
    gen = np.random.Generator(np.random.PCG64(seed))
    return Image(gen.random((side, side)) < 0.5)


@pytest.mark.parametrize("side", [1, 2, 7, 8, 9, 33])
@pytest.mark.parametrize("binary", [True, False])
def test_round_trip(side, binary):
    img = random_image(side, side * 2 + binary)
    assert pbm.loads(pbm.dumps(img, binary=binary)) == img


def test_file_round_trip(tmp_path):
    img = random_image(17, 5)
    path = tmp_path / "img.pbm"
    pbm.save(path, img)
    assert pbm.load(path) == img


def test_ascii_whitespace_and_comments():
    data = b"P1\n# a comment\n 3 3\n1 0 1\n0 1 0\n1\t0 1\n"
    img = pbm.loads(data)
    assert img.bits[0].tolist() == [True, False, True]
    assert img.bits[1].tolist() == [False, True, False]


def test_binary_rows_are_byte_padded():
    img = random_image(9, 3)
    data = pbm.dumps(img, binary=True)
    header_end = data.index(b"9 9\n") + 4
    assert len(data) - header_end == 9 * 2


@pytest.mark.parametrize("data", [
    b"P5\n3 3\n",
    b"P1\n3 4\n" + b"1 " * 12,
    b"P1\n3 3\n1 0 1 0 1",
    b"P1\n3 3\n1 0 1 0 1 0 1 0 2",
    b"P4\n3 3\n\x00",
    b"",
])
def test_malformed_inputs_rejected(data):
    with pytest.raises(pbm.PbmError):
        pbm.loads(data)
