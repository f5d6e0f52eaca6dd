"""Hybrid encryption for the three envelope forms.

Downlink (operator to bots): AES-256-CBC under the shared botnet key,
optionally signed with the operator's RSA key.  Uplink (bot to
operator): AES-256-CBC under the per-bot key.  Registration: a single
RSA-OAEP block under the operator's public key.

The RSA arithmetic is implemented here rather than borrowed because the
simulator must be bit-reproducible: key generation and OAEP seeding
draw every random byte from a caller-supplied seeded RNG, which
off-the-shelf RSA layers do not allow.  AES-CBC and PKCS7 padding are
deterministic given the IV, so those come from the cryptography
package.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass
from random import Random

import gmpy2
from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

RSA_BITS = 2048
RSA_BYTES = RSA_BITS // 8          # 256
RSA_EXPONENT = 65537
OAEP_HASH = hashlib.sha1
OAEP_HASH_LEN = 20
MAX_OAEP_PAYLOAD = RSA_BYTES - 2 * OAEP_HASH_LEN - 2   # 214
SYMMETRIC_KEY_LEN = 32
BLOCK_LEN = 16

# ASN.1 DigestInfo header for a SHA-256 hash, used by the v1.5 signature
_SHA256_DIGEST_INFO = bytes.fromhex(
    "3031300d060960864801650304020105000420")


class EnvelopeError(Exception):
    """Base class for envelope failures."""


class BadSignature(EnvelopeError):
    """Signature missing, malformed, or not by the expected key."""


class BadPadding(EnvelopeError):
    """Symmetric decryption produced invalid padding (wrong key or tamper)."""


class PayloadTooLarge(EnvelopeError):
    """Plaintext exceeds what the envelope form can carry."""


class DecryptFailure(EnvelopeError):
    """Asymmetric block did not decrypt to a valid payload."""


class MalformedEnvelope(EnvelopeError):
    """Wire bytes do not parse as the claimed envelope form."""


# ---------------------------------------------------------------------------
# symmetric keys


@dataclass(frozen=True)
class SymmetricKey:
    data: bytes

    def __post_init__(self):
        if len(self.data) != SYMMETRIC_KEY_LEN:
            raise ValueError("symmetric key must be 32 bytes")

    def hex(self) -> str:
        return self.data.hex()

    @classmethod
    def from_hex(cls, text: str):
        return cls(bytes.fromhex(text))

    @classmethod
    def generate(cls, rng: Random):
        return cls(rng.getrandbits(8 * SYMMETRIC_KEY_LEN)
                   .to_bytes(SYMMETRIC_KEY_LEN, "big"))


class BotnetKey(SymmetricKey):
    """Downlink key shared by every bot."""


class BotKey(SymmetricKey):
    """Per-bot uplink key, revealed to the operator at registration."""


# ---------------------------------------------------------------------------
# RSA primitives (deterministic, seeded)


def _mgf1(seed: bytes, length: int) -> bytes:
    out = bytearray()
    for counter in range(math.ceil(length / OAEP_HASH_LEN)):
        out += OAEP_HASH(seed + counter.to_bytes(4, "big")).digest()
    return bytes(out[:length])


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


_L_HASH = OAEP_HASH(b"").digest()


@dataclass(frozen=True)
class RsaPublicKey:
    n: int
    e: int

    @property
    def byte_length(self) -> int:
        return (self.n.bit_length() + 7) // 8

    def encrypt_oaep(self, payload: bytes, rng: Random) -> bytes:
        k = self.byte_length
        if len(payload) > k - 2 * OAEP_HASH_LEN - 2:
            raise PayloadTooLarge(
                f"{len(payload)} bytes exceeds the {k - 2 * OAEP_HASH_LEN - 2}-byte capacity")
        ps = b"\x00" * (k - len(payload) - 2 * OAEP_HASH_LEN - 2)
        db = _L_HASH + ps + b"\x01" + payload
        seed = rng.getrandbits(8 * OAEP_HASH_LEN).to_bytes(OAEP_HASH_LEN, "big")
        masked_db = _xor(db, _mgf1(seed, k - OAEP_HASH_LEN - 1))
        masked_seed = _xor(seed, _mgf1(masked_db, OAEP_HASH_LEN))
        em = b"\x00" + masked_seed + masked_db
        c = pow(int.from_bytes(em, "big"), self.e, self.n)
        return c.to_bytes(k, "big")

    def verify(self, data: bytes, signature: bytes) -> bool:
        k = self.byte_length
        if len(signature) != k:
            return False
        s = int.from_bytes(signature, "big")
        if s >= self.n:
            return False
        em = pow(s, self.e, self.n).to_bytes(k, "big")
        return em == _emsa_encode(data, k)

    def to_config(self) -> dict[str, str]:
        return {"rsa_n": f"{self.n:x}", "rsa_e": f"{self.e:x}"}

    @classmethod
    def from_config(cls, fields: dict[str, str]):
        return cls(n=int(fields["rsa_n"], 16), e=int(fields["rsa_e"], 16))


@dataclass(frozen=True)
class RsaPrivateKey:
    n: int
    e: int
    d: int
    p: int
    q: int

    @property
    def byte_length(self) -> int:
        return (self.n.bit_length() + 7) // 8

    def _power_crt(self, c: int) -> int:
        # standard CRT speedup, about 4x over pow(c, d, n)
        m1 = pow(c, self.d % (self.p - 1), self.p)
        m2 = pow(c, self.d % (self.q - 1), self.q)
        h = (pow(self.q, -1, self.p) * (m1 - m2)) % self.p
        return m2 + h * self.q

    def decrypt_oaep(self, block: bytes) -> bytes:
        k = self.byte_length
        if len(block) != k:
            raise DecryptFailure("ciphertext block has the wrong length")
        c = int.from_bytes(block, "big")
        if c >= self.n:
            raise DecryptFailure("ciphertext out of range")
        em = self._power_crt(c).to_bytes(k, "big")
        if em[0] != 0:
            raise DecryptFailure("bad block structure")
        masked_seed = em[1:1 + OAEP_HASH_LEN]
        masked_db = em[1 + OAEP_HASH_LEN:]
        seed = _xor(masked_seed, _mgf1(masked_db, OAEP_HASH_LEN))
        db = _xor(masked_db, _mgf1(seed, k - OAEP_HASH_LEN - 1))
        if db[:OAEP_HASH_LEN] != _L_HASH:
            raise DecryptFailure("label hash mismatch")
        sep = db.find(b"\x01", OAEP_HASH_LEN)
        if sep < 0 or any(db[OAEP_HASH_LEN:sep]):
            raise DecryptFailure("bad payload framing")
        return db[sep + 1:]

    def sign(self, data: bytes) -> bytes:
        k = self.byte_length
        em = int.from_bytes(_emsa_encode(data, k), "big")
        return self._power_crt(em).to_bytes(k, "big")

    @property
    def public(self) -> RsaPublicKey:
        return RsaPublicKey(self.n, self.e)

    def to_config(self) -> dict[str, str]:
        return {"rsa_n": f"{self.n:x}", "rsa_e": f"{self.e:x}",
                "rsa_d": f"{self.d:x}", "rsa_p": f"{self.p:x}",
                "rsa_q": f"{self.q:x}"}

    @classmethod
    def from_config(cls, fields: dict[str, str]):
        return cls(n=int(fields["rsa_n"], 16), e=int(fields["rsa_e"], 16),
                   d=int(fields["rsa_d"], 16), p=int(fields["rsa_p"], 16),
                   q=int(fields["rsa_q"], 16))


def _emsa_encode(data: bytes, k: int) -> bytes:
    t = _SHA256_DIGEST_INFO + hashlib.sha256(data).digest()
    ps = b"\xff" * (k - len(t) - 3)
    return b"\x00\x01" + ps + b"\x00" + t


def _random_prime(rng: Random, bits: int) -> int:
    while True:
        # top two bits forced so p*q always reaches the full width
        candidate = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        p = int(gmpy2.next_prime(candidate))
        if p.bit_length() == bits:
            return p


def generate_rsa_key(rng: Random, bits: int = RSA_BITS) -> RsaPrivateKey:
    """Deterministic keypair from a seeded RNG."""
    half = bits // 2
    while True:
        p = _random_prime(rng, half)
        q = _random_prime(rng, half)
        if p == q:
            continue
        n = p * q
        if n.bit_length() != bits:
            continue
        lam = math.lcm(p - 1, q - 1)
        if math.gcd(RSA_EXPONENT, lam) != 1:
            continue
        d = pow(RSA_EXPONENT, -1, lam)
        return RsaPrivateKey(n=n, e=RSA_EXPONENT, d=d, p=p, q=q)


@dataclass(frozen=True)
class BotmasterKeys:
    private: RsaPrivateKey

    @property
    def public(self) -> RsaPublicKey:
        return self.private.public

    @classmethod
    def generate(cls, rng: Random):
        return cls(private=generate_rsa_key(rng))


# ---------------------------------------------------------------------------
# symmetric primitive


def symmetric_seal(plaintext: bytes, key: SymmetricKey, iv: bytes) -> bytes:
    padder = padding.PKCS7(8 * BLOCK_LEN).padder()
    padded = padder.update(plaintext) + padder.finalize()
    enc = Cipher(algorithms.AES(key.data), modes.CBC(iv)).encryptor()
    return enc.update(padded) + enc.finalize()


def symmetric_open(body: bytes, key: SymmetricKey, iv: bytes) -> bytes:
    if not body or len(body) % BLOCK_LEN:
        raise BadPadding("ciphertext is not a whole number of blocks")
    dec = Cipher(algorithms.AES(key.data), modes.CBC(iv)).decryptor()
    padded = dec.update(body) + dec.finalize()
    unpadder = padding.PKCS7(8 * BLOCK_LEN).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError as exc:
        raise BadPadding(str(exc)) from exc


def _fresh_iv(rng: Random) -> bytes:
    return rng.getrandbits(8 * BLOCK_LEN).to_bytes(BLOCK_LEN, "big")


# ---------------------------------------------------------------------------
# envelopes


class EnvelopeForm(enum.Enum):
    DOWNLINK = "downlink"
    UPLINK = "uplink"
    REGISTRATION = "registration"


@dataclass(frozen=True)
class Envelope:
    form: EnvelopeForm
    body: bytes
    iv: bytes | None = None          # absent for registration
    signature: bytes | None = None   # downlink only

    def wire(self) -> bytes:
        """Carrier bytes: iv, ciphertext, then signature when present."""
        if self.form is EnvelopeForm.REGISTRATION:
            return self.body
        return self.iv + self.body + (self.signature or b"")


def sealed_body_size(plaintext_len: int) -> int:
    """Ciphertext length after pad-to-next-block padding."""
    return BLOCK_LEN * (plaintext_len // BLOCK_LEN + 1)


def sealed_wire_size(plaintext_len: int, signed: bool = False) -> int:
    """Carrier bytes for a symmetric envelope of the given plaintext."""
    return BLOCK_LEN + sealed_body_size(plaintext_len) + (RSA_BYTES if signed else 0)


def downlink_seal(plaintext: bytes, botnet_key: BotnetKey,
                  keys: BotmasterKeys, rng: Random,
                  sign: bool = True) -> Envelope:
    if not plaintext:
        raise EnvelopeError("empty plaintext")
    iv = _fresh_iv(rng)
    body = symmetric_seal(plaintext, botnet_key, iv)
    signature = keys.private.sign(iv + body) if sign else None
    return Envelope(EnvelopeForm.DOWNLINK, body, iv=iv, signature=signature)


def downlink_open(env: Envelope, botnet_key: BotnetKey,
                  botmaster_public: RsaPublicKey,
                  require_signature: bool = True) -> bytes:
    if env.form is not EnvelopeForm.DOWNLINK:
        raise MalformedEnvelope("not a downlink envelope")
    if env.signature is not None:
        if not botmaster_public.verify(env.iv + env.body, env.signature):
            raise BadSignature("downlink signature does not verify")
    elif require_signature:
        raise BadSignature("downlink envelope is unsigned")
    return symmetric_open(env.body, botnet_key, env.iv)


def uplink_seal(plaintext: bytes, bot_key: BotKey, rng: Random) -> Envelope:
    if not plaintext:
        raise EnvelopeError("empty plaintext")
    iv = _fresh_iv(rng)
    return Envelope(EnvelopeForm.UPLINK,
                    symmetric_seal(plaintext, bot_key, iv), iv=iv)


def uplink_open(env: Envelope, bot_key: BotKey) -> bytes:
    if env.form is not EnvelopeForm.UPLINK:
        raise MalformedEnvelope("not an uplink envelope")
    return symmetric_open(env.body, bot_key, env.iv)


def registration_seal(address: bytes, bot_key: BotKey,
                      botmaster_public: RsaPublicKey, rng: Random) -> Envelope:
    payload = address + bot_key.data
    body = botmaster_public.encrypt_oaep(payload, rng)
    return Envelope(EnvelopeForm.REGISTRATION, body)


def registration_open(env: Envelope, keys: BotmasterKeys) -> tuple[str, BotKey]:
    if env.form is not EnvelopeForm.REGISTRATION:
        raise MalformedEnvelope("not a registration envelope")
    payload = keys.private.decrypt_oaep(env.body)
    if len(payload) < SYMMETRIC_KEY_LEN + 1:
        raise DecryptFailure("registration payload too short")
    address, key = payload[:-SYMMETRIC_KEY_LEN], payload[-SYMMETRIC_KEY_LEN:]
    try:
        return address.decode("ascii"), BotKey(key)
    except UnicodeDecodeError as exc:
        raise DecryptFailure("registration address is not text") from exc


def parse_symmetric_wire(data: bytes, form: EnvelopeForm,
                         signed: bool = False) -> Envelope:
    """Split carrier bytes back into an envelope of a known form."""
    if form is EnvelopeForm.REGISTRATION:
        if len(data) != RSA_BYTES:
            raise MalformedEnvelope("registration envelope must be one RSA block")
        return Envelope(form, data)
    tail = RSA_BYTES if signed else 0
    body_len = len(data) - BLOCK_LEN - tail
    if body_len <= 0 or body_len % BLOCK_LEN:
        raise MalformedEnvelope("ciphertext is not a whole number of blocks")
    iv = data[:BLOCK_LEN]
    body = data[BLOCK_LEN:BLOCK_LEN + body_len]
    signature = data[BLOCK_LEN + body_len:] if signed else None
    return Envelope(form, body, iv=iv, signature=signature)
