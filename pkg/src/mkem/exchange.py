"""Two-party key exchange demo over TCP.

Alice listens, generates a key pair and sends the public key; Bob connects,
encapsulates and returns the ciphertext.  Both then swap 8-byte fingerprints
of the derived session key (Alice first).  Matching fingerprints are a
demo-grade confirmation only: nothing here is authenticated.

Frame layout: ``b"MKEX"`` | version u8 | type u8 | length u32-LE | payload.
"""

from __future__ import annotations

import logging
import socket
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gf2 import FormatError
from .kem import (KIND_CT, KIND_PK, Ciphertext, Kdf, ParamSet, PublicKey, decapsulate,
                  derive_session_key, deserialize, encapsulate, keygen, serialize, sha256_kdf)

log = logging.getLogger(__name__)

MAGIC = b"MKEX"
VERSION = 1
MSG_PUBLIC_KEY = 1
MSG_CIPHERTEXT = 2
MSG_FINGERPRINT = 3
MSG_TYPES = (MSG_PUBLIC_KEY, MSG_CIPHERTEXT, MSG_FINGERPRINT)
MAX_PAYLOAD = 64 << 20
FINGERPRINT_LEN = 8
DEFAULT_TIMEOUT = 30.0

_HEADER = struct.Struct("<4sBBI")


class ExchangeError(Exception):
    exit_code = 1


class TransportError(ExchangeError):
    exit_code = 4


class ProtocolError(ExchangeError):
    exit_code = 5


class FingerprintMismatch(ExchangeError):
    exit_code = 6


@dataclass(frozen=True)
class Frame:
    msg_type: int
    payload: bytes

    def encode(self) -> bytes:
        if self.msg_type not in MSG_TYPES:
            raise ProtocolError(f"unknown message type {self.msg_type}")
        return _HEADER.pack(MAGIC, VERSION, self.msg_type, len(self.payload)) + self.payload


def decode_header(header: bytes) -> tuple[int, int]:
    if len(header) < _HEADER.size:
        raise ProtocolError("truncated frame header")
    magic, version, msg_type, length = _HEADER.unpack(header[:_HEADER.size])
    if magic != MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported frame version {version}")
    if msg_type not in MSG_TYPES:
        raise ProtocolError(f"unknown message type {msg_type}")
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"frame length {length} exceeds limit")
    return msg_type, length


def decode_frame(data: bytes) -> Frame:
    msg_type, length = decode_header(data)
    body = data[_HEADER.size:]
    if len(body) != length:
        raise ProtocolError(f"frame declares {length} payload bytes, got {len(body)}")
    return Frame(msg_type, bytes(body))


def _recv_exact(sock: socket.socket, size: int) -> bytes:
    buf = bytearray()
    while len(buf) < size:
        try:
            chunk = sock.recv(size - len(buf))
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not chunk:
            raise ProtocolError(f"truncated frame: peer closed after {len(buf)} of {size} bytes")
        buf += chunk
    return bytes(buf)


def send_frame(sock: socket.socket, msg_type: int, payload: bytes):
    try:
        sock.sendall(Frame(msg_type, payload).encode())
    except OSError as exc:
        raise TransportError(f"send failed: {exc}") from exc


def recv_frame(sock: socket.socket, expect: int) -> bytes:
    msg_type, length = decode_header(_recv_exact(sock, _HEADER.size))
    payload = _recv_exact(sock, length)
    if msg_type != expect:
        raise ProtocolError(f"expected message type {expect}, got {msg_type}")
    return payload


@dataclass
class SessionResult:
    role: str
    local_fingerprint: bytes
    peer_fingerprint: bytes

    @property
    def match(self) -> bool:
        return self.local_fingerprint == self.peer_fingerprint

    def to_text(self) -> str:
        return (f"role={self.role}\nfingerprint={self.local_fingerprint.hex()}\n"
                f"peer_fingerprint={self.peer_fingerprint.hex()}\n"
                f"match={'yes' if self.match else 'no'}\n")


def _fingerprint(key, kdf) -> bytes:
    return derive_session_key(key, kdf)[:FINGERPRINT_LEN]


def _recv_fingerprint(sock) -> bytes:
    fp = recv_frame(sock, MSG_FINGERPRINT)
    if len(fp) != FINGERPRINT_LEN:
        raise ProtocolError(f"fingerprint must be {FINGERPRINT_LEN} bytes, got {len(fp)}")
    return fp


def alice_session(sock: socket.socket, params: ParamSet, rng: np.random.Generator,
                  kdf: Kdf | None = sha256_kdf) -> SessionResult:
    pk, sk = keygen(params, rng)
    send_frame(sock, MSG_PUBLIC_KEY, serialize(pk))
    try:
        ct = deserialize(recv_frame(sock, MSG_CIPHERTEXT), expect=KIND_CT)
    except FormatError as exc:
        raise ProtocolError(f"bad ciphertext: {exc}") from exc
    if ct.params != params:
        raise ProtocolError("ciphertext parameters differ from the session's")
    fp = _fingerprint(decapsulate(sk, ct), kdf)
    send_frame(sock, MSG_FINGERPRINT, fp)
    return SessionResult("alice", fp, _recv_fingerprint(sock))


def bob_session(sock: socket.socket, rng: np.random.Generator, kdf: Kdf | None = sha256_kdf,
                *, expect_params: ParamSet | None = None,
                tamper_bit: int | None = None) -> SessionResult:
    """``tamper_bit`` flips that ciphertext bit before sending (fault injection;
    negative values count from the end)."""
    try:
        pk = deserialize(recv_frame(sock, MSG_PUBLIC_KEY), expect=KIND_PK)
    except FormatError as exc:
        raise ProtocolError(f"bad public key: {exc}") from exc
    if expect_params is not None and pk.params != expect_params:
        raise ProtocolError(f"public key parameters {pk.params} differ from expected {expect_params}")
    enc = encapsulate(pk, rng)
    ct = enc.ciphertext
    if tamper_bit is not None:
        bits = ct.c.to_bits().copy()
        bits[tamper_bit] ^= 1
        ct = Ciphertext(ct.params, type(ct.c).from_bits(bits))
    send_frame(sock, MSG_CIPHERTEXT, serialize(ct))
    peer = _recv_fingerprint(sock)
    fp = _fingerprint(enc.shared_key, kdf)
    send_frame(sock, MSG_FINGERPRINT, fp)
    return SessionResult("bob", fp, peer)


def parse_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {address!r}")
    return host or "127.0.0.1", int(port)


def serve(params: ParamSet, address: str, rng: np.random.Generator, *,
          kdf: Kdf | None = sha256_kdf, timeout: float = DEFAULT_TIMEOUT,
          on_listening: Callable[[tuple[str, int]], None] | None = None) -> SessionResult:
    """Run one Alice session on the first incoming connection."""
    host, port = parse_address(address)
    try:
        srv = socket.create_server((host, port))
    except OSError as exc:
        raise TransportError(f"cannot listen on {address}: {exc}") from exc
    with srv:
        srv.settimeout(timeout)
        bound = srv.getsockname()[:2]
        log.info("listening on %s:%d", *bound)
        if on_listening:
            on_listening(bound)
        try:
            conn, peer = srv.accept()
        except OSError as exc:
            raise TransportError(f"accept failed: {exc}") from exc
        with conn:
            conn.settimeout(timeout)
            log.info("session with %s:%d", *peer[:2])
            return alice_session(conn, params, rng, kdf)


def connect(address: str, rng: np.random.Generator, *, kdf: Kdf | None = sha256_kdf,
            timeout: float = DEFAULT_TIMEOUT, expect_params: ParamSet | None = None,
            tamper_bit: int | None = None) -> SessionResult:
    host, port = parse_address(address)
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"cannot connect to {address}: {exc}") from exc
    with sock:
        return bob_session(sock, rng, kdf, expect_params=expect_params, tamper_bit=tamper_bit)
