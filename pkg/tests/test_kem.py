import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mkem import gf2, kem
from mkem.gf2 import BitMatrix, BitVector, FormatError, OpCounter
from mkem.kem import ParamError, ParamSet

TOY = ParamSet(4, 1, 2, 0.1)


def test_param_validation():
    assert TOY.n == 12
    for bad in [(4, 4, 1), (4, -1, 1), (4, 1, 0), (4, 1, 3), (4, 1, 2, 0.0), (4, 1, 2, 1.0)]:
        with pytest.raises(ParamError):
            ParamSet(*bad)


def test_presets():
    assert {k: (v.d, v.p, v.m) for k, v in kem.PRESETS.items()} == {
        "sec258": (205, 80, 10), "sec388": (300, 118, 10),
        "sec524": (400, 155, 10), "sec1000": (750, 302, 10)}


def test_key_structure_toy():
    km = kem.build_key_material(TOY, np.random.default_rng(0))
    assert km.P.shape == (14, 4)
    AB = km.A @ km.B
    n, m = TOY.n, TOY.m
    want = gf2.block([[BitMatrix.identity(n), BitMatrix.zeros(n, m)],
                      [BitMatrix.zeros(m, n), km.E]])
    assert AB == want
    assert km.P == km.B @ km.G
    G1 = km.G1.to_bits()
    assert (G1.sum(axis=1) == 1).all() and (G1.sum(axis=0) == 3).all()


def test_key_structure_many_seeds():
    prm = ParamSet(12, 3, 3, 0.2)
    for seed in range(25):
        km = kem.build_key_material(prm, np.random.default_rng(seed))
        assert km.P == km.B @ km.G
        assert (km.A @ km.B).to_bits()[:prm.n, :prm.n].tolist() == np.eye(prm.n, dtype=int).tolist()
        assert gf2.rank(km.Q) == prm.m


def test_pubkey_size_preset():
    pk, _ = kem.keygen(kem.PRESETS["sec258"], np.random.default_rng(1))
    assert pk.P.rows * pk.P.cols == 128_125
    data = kem.serialize(pk)
    assert len(data) == kem._HEADER.size + 13 + 625 * 26
    assert len(data) == kem.serialized_size(kem.KIND_PK, pk.params)


def test_seeded_determinism():
    def run():
        rng = np.random.default_rng(42)
        pk, sk = kem.keygen(TOY, rng)
        enc = kem.encapsulate(pk, rng)
        return kem.serialize(pk), kem.serialize(sk), kem.serialize(enc.ciphertext), enc.shared_key.hex(), \
            kem.decapsulate(sk, enc.ciphertext).hex()

    a, b = run(), run()
    assert a == b
    assert a[3] == a[4]


def test_planted_zero_encapsulation():
    rng = np.random.default_rng(2)
    pk, sk = kem.keygen(TOY, rng)
    enc = kem.encapsulate(pk, rng, discard=[2], data=BitVector.zeros(3), error=BitVector.zeros(12))
    assert enc.ciphertext.c.weight() == 0
    assert enc.shared_key.bits.weight() == 0
    assert kem.decapsulate(sk, enc.ciphertext).bits.weight() == 0


def test_tail_is_noise_free_and_zero_padding():
    rng = np.random.default_rng(3)
    prm = ParamSet(20, 5, 3, 0.2)
    pk, sk = kem.keygen(prm, rng)
    for _ in range(30):
        enc = kem.encapsulate(pk, rng)
        d_hat = BitVector.from_bits(np.delete(enc.shared_key.bits.to_bits(), enc.discard))
        clean = gf2.mul_vec(gf2.remove_columns(pk.P, enc.discard), d_hat)
        assert enc.ciphertext.c.to_bits()[prm.n:].tolist() == clean.to_bits()[prm.n:].tolist()
        assert all(enc.shared_key.bits[i] == 0 for i in enc.discard)
        # column removal equals multiplying by the zero-extended vector
        assert clean == gf2.mul_vec(pk.P, enc.shared_key.bits)


def test_p_zero_key_is_data():
    rng = np.random.default_rng(4)
    prm = ParamSet(6, 0, 2, 0.3)
    pk, _ = kem.keygen(prm, rng)
    data = BitVector.random(6, rng)
    enc = kem.encapsulate(pk, rng, data=data)
    assert enc.shared_key.bits == data and enc.discard == ()


def test_single_flip_in_a_one_block_is_corrected():
    rng = np.random.default_rng(5)
    pk, sk = kem.keygen(TOY, rng)
    data = BitVector.from_bits([1, 1, 1])
    base = kem.encapsulate(pk, rng, discard=[0], data=data, error=BitVector.zeros(12))
    want = base.shared_key
    # decoding works on y = c_head + S c_tail; flip one bit of y in each block
    y = (BitVector.from_bits(base.ciphertext.c.to_bits()[:12])
         + gf2.mul_vec(sk.S, BitVector.from_bits(base.ciphertext.c.to_bits()[12:]))).to_bits()
    for blk in range(4):
        for off in range(3):
            bits = base.ciphertext.c.to_bits().copy()
            bits[3 * blk + off] ^= 1
            if y[3 * blk:3 * blk + 3].sum() == 3:
                got = kem.decapsulate(sk, kem.Ciphertext(TOY, BitVector.from_bits(bits)))
                assert got.bits == want.bits


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 40), st.data())
def test_roundtrip_property(d, data):
    m = data.draw(st.integers(1, max(1, d // 3)))
    p = data.draw(st.integers(0, d - m - 1))
    mu = data.draw(st.floats(0.01, 0.99))
    seed = data.draw(st.integers(0, 2**32 - 1))
    prm = ParamSet(d, p, m, mu)
    rng = np.random.default_rng(seed)
    pk, sk = kem.keygen(prm, rng)
    enc = kem.encapsulate(pk, rng)
    assert kem.decapsulate(sk, enc.ciphertext).bits == enc.shared_key.bits


def test_roundtrip_preset_row1():
    rng = np.random.default_rng(6)
    prm = kem.PRESETS["sec258"]
    for _ in range(20):
        pk, sk = kem.keygen(prm, rng)
        enc = kem.encapsulate(pk, rng)
        assert kem.decapsulate(sk, enc.ciphertext).hex() == enc.shared_key.hex()


def test_mac_counter():
    rng = np.random.default_rng(7)
    pk, _ = kem.keygen(kem.PRESETS["sec258"], rng)
    ctr = OpCounter()
    kem.encapsulate(pk, rng, counter=ctr)
    assert ctr.macs == 625 * 125


def test_session_key_derivation():
    key = kem.SharedKey(BitVector.from_bits([1, 0, 0, 0, 0, 0, 0, 1, 1]))
    assert kem.derive_session_key(key) == bytes([0x81, 0x80])
    assert key.hex() == "8180"
    assert kem.derive_session_key(key, kem.sha256_kdf) == kem.derive_session_key(key, kem.sha256_kdf)
    assert len(kem.derive_session_key(key, kem.sha256_kdf)) == 32


def test_serialization_roundtrip():
    rng = np.random.default_rng(8)
    pk, sk = kem.keygen(TOY, rng)
    ct = kem.encapsulate(pk, rng).ciphertext
    for obj, kind in ((pk, kem.KIND_PK), (sk, kem.KIND_SK), (ct, kem.KIND_CT)):
        data = kem.serialize(obj)
        assert len(data) == kem.serialized_size(kind, TOY)
        back = kem.deserialize(data, expect=kind)
        assert kem.serialize(back) == data
    back = kem.deserialize(kem.serialize(sk))
    assert np.array_equal(back.sigma, sk.sigma) and back.S == sk.S


def test_serialization_errors():
    rng = np.random.default_rng(9)
    pk, sk = kem.keygen(TOY, rng)
    data = kem.serialize(pk)
    bad = bytearray(data)
    bad[0] ^= 1
    with pytest.raises(FormatError, match="magic"):
        kem.deserialize(bytes(bad))
    bad = bytearray(data)
    bad[4] = 9
    with pytest.raises(FormatError, match="version"):
        kem.deserialize(bytes(bad))
    with pytest.raises(FormatError, match="expected kind"):
        kem.deserialize(data, expect=kem.KIND_SK)
    with pytest.raises(FormatError, match="trailing"):
        kem.deserialize(data + b"\0")
    with pytest.raises(FormatError):
        kem.deserialize(data[:-3])
    # header claims larger d than the matrix carries
    other = ParamSet(5, 1, 2, 0.1)
    forged = kem._header(kem.KIND_PK, other) + pk.P.to_bytes()
    with pytest.raises(FormatError, match="parameters require") as e:
        kem.deserialize(forged)
    assert e.value.offset == kem._HEADER.size
    # sigma that is not a permutation
    raw = bytearray(kem.serialize(sk))
    raw[-4:] = raw[-8:-4]
    with pytest.raises(FormatError, match="permutation"):
        kem.deserialize(bytes(raw))


def test_decap_rejects_mismatched_params():
    rng = np.random.default_rng(10)
    _, sk = kem.keygen(TOY, rng)
    pk2, _ = kem.keygen(ParamSet(5, 1, 2, 0.1), rng)
    ct = kem.encapsulate(pk2, rng).ciphertext
    with pytest.raises(ParamError):
        kem.decapsulate(sk, ct)
