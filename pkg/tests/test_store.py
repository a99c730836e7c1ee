from __future__ import annotations

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provenact.errors import NotFound
from provenact.store import ArtifactStore, ContentHash

from .conftest import GOLDEN

EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
# from `sha256sum tests/golden/payload.bin`
PAYLOAD_SHA256 = "7fe905c64e0a54604b7b621942339ce071a337782b62610d4f29402814bc0112"


def test_empty_payload_hash(store):
    h = store.put(b"")
    assert h.hex == EMPTY_SHA256
    assert h.algorithm == "sha-256"
    assert store.path_for(h) == store.root / "objects" / "e3" / EMPTY_SHA256


def test_put_is_idempotent(store):
    assert store.put(b"abc") == store.put(b"abc")
    assert len(store) == 1


def test_distinct_payloads_distinct_hashes(store):
    assert store.put(b"payload-1") != store.put(b"payload-2")


def test_get_unknown_raises(store):
    with pytest.raises(NotFound):
        store.get(ContentHash.of(b"never stored"))


def test_golden_fixture(store):
    payload = (GOLDEN / "payload.bin").read_bytes()
    h = store.put(payload)
    assert h.hex == PAYLOAD_SHA256
    assert store.get(ContentHash.from_hex(PAYLOAD_SHA256)) == payload


def test_objects_hold_raw_bytes(store):
    h = store.put(b"raw")
    assert store.path_for(h).read_bytes() == b"raw"


def test_audit_detects_tampering(store):
    h1 = store.put(b"one")
    h2 = store.put(b"two")
    assert store.audit() == []
    store.path_for(h2).write_bytes(b"tampered")
    assert store.audit() == [h2]
    assert h1 not in store.audit()


def test_content_hash_validation():
    with pytest.raises(ValueError):
        ContentHash(b"short")
    with pytest.raises(ValueError):
        ContentHash.from_hex(EMPTY_SHA256.upper())


def test_concurrent_puts(store):
    payloads = [bytes([i % 7]) * 100 for i in range(40)]
    threads = [threading.Thread(target=store.put, args=(p,)) for p in payloads]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(store) == 7
    assert store.audit() == []


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=2048))
def test_get_put_identity(tmp_path_factory, payload):
    store = ArtifactStore(tmp_path_factory.mktemp("s"))
    assert store.get(store.put(payload)) == payload
