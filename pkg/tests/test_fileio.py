import struct

import numpy as np
import pytest

from cwct.errors import FormatError
from cwct.fileio import (features_to_bytes, parse_features, read_features, read_labels, read_predictions,
                         write_features, write_labels, write_predictions)


def test_feature_roundtrip(tmp_path, rng):
    x = rng.standard_normal((7, 5)).astype(np.float32)
    path = tmp_path / "f.feat"
    write_features(path, x)
    raw = path.read_bytes()
    assert raw[:4] == b"FEAT" and struct.unpack("<III", raw[4:16]) == (1, 7, 5)
    back = read_features(path)
    assert np.array_equal(back, x)
    assert features_to_bytes(back) == raw


def test_empty_stream():
    assert parse_features(features_to_bytes(np.zeros((0, 3), np.float32))).shape == (0, 3)


@pytest.mark.parametrize("mutate,field", [
    (lambda b: b"FEAX" + b[4:], "magic"),
    (lambda b: b[:4] + struct.pack("<I", 9) + b[8:], "version"),
    (lambda b: b[:10], "T"),
    (lambda b: b[:-4], "payload"),
    (lambda b: b + b"\0", "payload"),
])
def test_feature_errors_name_field(mutate, field):
    data = features_to_bytes(np.ones((2, 3), np.float32))
    with pytest.raises(FormatError) as info:
        parse_features(mutate(data))
    assert info.value.field == field
    assert "offset" in str(info.value)


def test_labels_roundtrip(tmp_path):
    path = tmp_path / "l.csv"
    write_labels(path, [0, 3, 3, 1])
    assert path.read_text() == "0,0\n1,3\n2,3\n3,1\n"
    assert read_labels(path).tolist() == [0, 3, 3, 1]


@pytest.mark.parametrize("text", ["0,1\n2,1\n", "0,x\n", "0,1,2\n"])
def test_label_errors(tmp_path, text):
    path = tmp_path / "l.csv"
    path.write_text(text)
    with pytest.raises(FormatError):
        read_labels(path)


def test_predictions_format(tmp_path):
    path = tmp_path / "p.csv"
    write_predictions(path, np.array([[0.1, 0.9], [1 / 3, 2 / 3]], np.float32))
    lines = path.read_text().splitlines()
    assert lines[0] == "0,0.100000001,0.899999976"
    assert lines[1].startswith("1,0.333333343,")
    assert read_predictions(path).shape == (2, 2)


def test_prediction_errors(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("0,0.5,0.5\n1,1.0\n")
    with pytest.raises(FormatError, match="classes"):
        read_predictions(path)
