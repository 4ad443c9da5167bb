import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polar.encoder import DEFAULT_ENCODER, EncoderConfig, cosine, encode, encode_batch, fnv1a_64
from polar.errors import EncoderUnavailable, RejectedInput
from polar.graph import THETA_DEDUP


def test_fnv1a_reference_vectors():
    # published FNV-1a 64-bit test vectors
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_fnv1a_seed_changes_hash():
    assert fnv1a_64(b"abc", seed=1) != fnv1a_64(b"abc")


def test_encode_unit_norm_and_shape():
    v = encode("find my red mug")
    assert v.shape == (256,)
    assert math.isclose(float(np.linalg.norm(v)), 1.0, abs_tol=1e-12)


def test_encode_deterministic_and_case_insensitive():
    a = encode("Find My Red MUG")
    b = encode("find my red mug")
    assert np.array_equal(a, b)
    assert np.array_equal(encode("find my red mug"), b)


def test_encode_empty_is_zero_vector():
    v = encode("")
    assert not v.any()
    assert cosine(v, encode("anything")) == 0.0


def test_encode_short_text_still_unit():
    v = encode("ab", EncoderConfig(ngram=3))
    assert math.isclose(float(np.linalg.norm(v)), 1.0, abs_tol=1e-12)


def test_encode_respects_dim():
    assert encode("hello world", EncoderConfig(dim=64)).shape == (64,)


def test_similar_texts_score_higher_than_unrelated():
    mug = encode("red mug")
    mug_desk = encode("red mug on the desk")
    vase = encode("blue vase")
    assert cosine(mug, mug_desk) > cosine(mug, vase)


def test_statement_margins_around_dedup_threshold():
    # the whole memory design leans on these: same fact about a different
    # object id dedups; a changed value keeps its own node
    a = "user: color = crimson refers to mug mug_01"
    b = "user: color = crimson refers to mug mug_02"
    c = "user: color = teal refers to mug mug_01"
    assert cosine(encode(a), encode(b)) >= THETA_DEDUP
    assert cosine(encode(a), encode(c)) < THETA_DEDUP


def test_cosine_basics():
    e0 = np.array([1.0, 0.0, 0.0])
    e1 = np.array([0.0, 1.0, 0.0])
    assert cosine(e0, e0) == 1.0
    assert cosine(e0, e1) == 0.0
    assert cosine(e0, -e0) == -1.0
    assert cosine(e0, np.zeros(3)) == 0.0


def test_cosine_shape_mismatch_rejected():
    with pytest.raises(RejectedInput):
        cosine(np.ones(3), np.ones(4))


def test_config_validation():
    with pytest.raises(RejectedInput):
        EncoderConfig(mode="quantum")
    with pytest.raises(RejectedInput):
        EncoderConfig(dim=8)
    with pytest.raises(RejectedInput):
        EncoderConfig(ngram=1)
    with pytest.raises(RejectedInput):
        EncoderConfig(mode="remote")  # endpoint missing


class _Resp:
    def __init__(self, status_code=200, payload=None):
        self.status_code = status_code
        self._payload = payload

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


def test_remote_encode_happy_path(monkeypatch):
    cfg = EncoderConfig(mode="remote", dim=16, endpoint="http://enc.local/embed")
    rows = [[1.0] + [0.0] * 15, [0.0, 1.0] + [0.0] * 14]
    seen = {}

    def fake_post(url, json=None, timeout=None):
        seen.update(url=url, json=json, timeout=timeout)
        return _Resp(payload={"embeddings": rows})

    monkeypatch.setattr("polar.encoder.requests.post", fake_post)
    out = encode_batch(["a", "b"], cfg)
    assert seen["url"] == "http://enc.local/embed"
    assert seen["json"] == {"texts": ["a", "b"]}
    assert np.array_equal(out[0], np.array(rows[0]))
    assert np.array_equal(out[1], np.array(rows[1]))


@pytest.mark.parametrize(
    "resp",
    [
        _Resp(status_code=500, payload={"embeddings": []}),
        _Resp(payload=None),  # non-JSON body
        _Resp(payload={"wrong": []}),
        _Resp(payload={"embeddings": [[1.0] * 16]}),  # 1 row for 2 texts
        _Resp(payload={"embeddings": [[1.0] * 4, [1.0] * 4]}),  # wrong dim
    ],
)
def test_remote_encode_bad_responses(monkeypatch, resp):
    cfg = EncoderConfig(mode="remote", dim=16, endpoint="http://enc.local/embed")
    monkeypatch.setattr("polar.encoder.requests.post", lambda *a, **k: resp)
    with pytest.raises(EncoderUnavailable):
        encode_batch(["a", "b"], cfg)


def test_remote_encode_connection_error(monkeypatch):
    import requests

    def boom(*a, **k):
        raise requests.ConnectionError("refused")

    monkeypatch.setattr("polar.encoder.requests.post", boom)
    cfg = EncoderConfig(mode="remote", dim=16, endpoint="http://enc.local/embed")
    with pytest.raises(EncoderUnavailable):
        encode("a", cfg)


@settings(max_examples=50, derandomize=True)
@given(st.text(min_size=1, max_size=40))
def test_encode_always_unit_norm(text):
    v = encode(text, DEFAULT_ENCODER)
    assert math.isclose(float(np.linalg.norm(v)), 1.0, abs_tol=1e-9)


@settings(max_examples=50, derandomize=True)
@given(st.text(max_size=40), st.text(max_size=40))
def test_cosine_symmetric_and_bounded(a, b):
    va, vb = encode(a), encode(b)
    s = cosine(va, vb)
    assert -1.0 <= s <= 1.0
    assert math.isclose(s, cosine(vb, va), abs_tol=1e-12)
