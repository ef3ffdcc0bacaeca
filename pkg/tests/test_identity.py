"""Credentials, privacy transform, zk-identity derivation and registries."""
import hashlib

import pytest
from hypothesis import given, strategies as st

from flacsim.errors import DuplicateIdentity, EmptyInput, InvalidCredentials, SaltReuse
from flacsim.identity import (
    AttributeVector,
    Credentials,
    Registry,
    derive_chain_hash,
    derive_zk_identity,
    privacy_transform,
)

from conftest import make_credentials


def test_privacy_transform_hides_identifiers_and_is_deterministic():
    c = make_credentials("alice-the-nurse", trust_level=0.5, data_sensitivity=0.5)
    p = privacy_transform(c)
    assert b"nurse" not in p
    assert b"alice-the-nurse" not in p
    assert privacy_transform(c) == p


def test_privacy_transform_distinguishes_numeric_fields():
    a = privacy_transform(make_credentials(trust_level=0.5))
    b = privacy_transform(make_credentials(trust_level=0.6))
    assert a != b
    assert hashlib.sha256(a).digest() != hashlib.sha256(b).digest()


def test_out_of_range_attribute_rejected():
    with pytest.raises(InvalidCredentials):
        privacy_transform(make_credentials(trust_level=1.3))


def test_empty_subject_attrs_not_registrable():
    with pytest.raises(InvalidCredentials):
        make_credentials(subject_attrs={}).validate()


def test_chain_hash_matches_reference_vector():
    # FIPS 180-2 test vector for "abc"
    expected = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    assert derive_chain_hash(b"abc").hex() == expected
    assert derive_chain_hash(b"abc") == derive_chain_hash(b"abc")


def test_chain_hash_of_empty_input():
    with pytest.raises(EmptyInput):
        derive_chain_hash(b"")


def test_zero_chain_hash_and_salt():
    zk = derive_zk_identity(bytes(32), bytes(16))
    assert zk.value == hashlib.sha256(bytes(32)).digest()


def test_distinct_salts_give_distinct_identities():
    h = derive_chain_hash(b"credentials")
    a = derive_zk_identity(h, b"\x01" * 16)
    b = derive_zk_identity(h, b"\x02" * 16)
    assert a.value != b.value


def test_salt_reuse_in_registry():
    reg = Registry("user")
    h = derive_chain_hash(b"x")
    derive_zk_identity(h, b"\x07" * 16, reg)
    with pytest.raises(SaltReuse):
        derive_zk_identity(derive_chain_hash(b"y"), b"\x07" * 16, reg)


def test_registry_insert_and_duplicate():
    reg = Registry("service")
    zk = derive_zk_identity(derive_chain_hash(b"svc"), b"\x00" * 15 + b"\x01")
    reg.insert(zk, b"r" * 32)
    assert len(reg) == 1
    with pytest.raises(DuplicateIdentity):
        reg.insert(zk, b"s" * 32)


def test_registry_hundred_inserts_all_retrievable():
    reg = Registry("user")
    inserted = {}
    for i in range(100):
        zk = derive_zk_identity(derive_chain_hash(f"user-{i}".encode()), i.to_bytes(16, "big"), reg)
        rh = hashlib.sha256(zk.value).digest()
        reg.insert(zk, rh)
        inserted[zk.value] = rh
    assert len(reg) == 100
    for key, rh in inserted.items():
        assert reg.get(key) == rh


attr_text = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=4, max_size=12)
unit = st.floats(0.0, 1.0)


@given(
    ident=attr_text,
    role=attr_text,
    obj=attr_text,
    tl=unit,
    s1=st.binary(min_size=16, max_size=16),
    s2=st.binary(min_size=16, max_size=16),
)
def test_unlinkability_and_leakage(ident, role, obj, tl, s1, s2):
    c = Credentials(ident, "user", AttributeVector({"role": role}, {"record": obj}, trust_level=tl))
    p = privacy_transform(c)
    h = derive_chain_hash(p)
    a = derive_zk_identity(h, s1)
    for raw in (role.encode(), obj.encode(), ident.encode()):
        assert raw not in p
        assert raw not in a.value
    assert a.value != h
    if s1 != s2:
        assert derive_zk_identity(h, s2).value != a.value


@given(st.lists(st.binary(min_size=1, max_size=8), max_size=30))
def test_registry_is_append_only(blobs):
    reg = Registry("user")
    seen = {}
    for i, blob in enumerate(blobs):
        key = hashlib.sha256(blob).digest()
        before = dict(reg.entries)
        try:
            reg.insert(key, i.to_bytes(32, "big"))
            seen[key] = i.to_bytes(32, "big")
        except DuplicateIdentity:
            pass
        assert all(reg.entries[k] == v for k, v in before.items())
    assert reg.entries == seen
