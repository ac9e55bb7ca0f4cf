"""Wire records exchanged between bridges, distributors and users.

Records serialize to tagged JSON objects.  Field elements travel as 8-byte
big-endian integers written in hex; digests and nonces as plain hex.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, fields
from typing import Any


def fe_to_wire(v: int) -> str:
    return int(v).to_bytes(8, "big").hex()


def fe_from_wire(s: str) -> int:
    raw = bytes.fromhex(s)
    if len(raw) != 8:
        raise ValueError("field elements are 8 bytes on the wire")
    return int.from_bytes(raw, "big")


@dataclass(frozen=True)
class RegisterShare:
    secret_id: int
    index: int
    value: int


@dataclass(frozen=True)
class AssignBroadcast:
    user: Any
    indices: tuple


@dataclass(frozen=True)
class ShareDelivery:
    user: Any
    secret_id: int
    index: int
    value: int


@dataclass(frozen=True)
class DrgCommit:
    index: int
    digest: bytes


@dataclass(frozen=True)
class DrgReveal:
    index: int
    value: int
    nonce: bytes


@dataclass(frozen=True)
class AgreeMsg:
    phase: str
    payload: Any


RECORDS = {cls.__name__: cls for cls in (RegisterShare, AssignBroadcast, ShareDelivery, DrgCommit, DrgReveal, AgreeMsg)}
_FIELD_ELEMENTS = {"value"}
_BYTES = {"digest", "nonce"}


def _enc_payload(v):
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, int):
        return {"fe": fe_to_wire(v)}
    if isinstance(v, bytes):
        return {"hex": v.hex()}
    if isinstance(v, (tuple, list)):
        return [_enc_payload(x) for x in v]
    raise TypeError(f"cannot put {type(v).__name__} on the wire")


def _dec_payload(v):
    if isinstance(v, dict):
        if "fe" in v:
            return fe_from_wire(v["fe"])
        return bytes.fromhex(v["hex"])
    if isinstance(v, list):
        return tuple(_dec_payload(x) for x in v)
    return v


def _enc_user(u):
    return list(u) if isinstance(u, tuple) else u


def _dec_user(u):
    return tuple(u) if isinstance(u, list) else u


def to_record(msg) -> dict:
    out = {"tag": type(msg).__name__}
    for f in fields(msg):
        v = getattr(msg, f.name)
        if f.name in _FIELD_ELEMENTS:
            v = fe_to_wire(v)
        elif f.name in _BYTES:
            v = v.hex()
        elif f.name == "payload":
            v = _enc_payload(v)
        elif f.name == "user":
            v = _enc_user(v)
        elif f.name == "indices":
            v = list(v)
        out[f.name] = v
    return out


def from_record(rec: dict):
    rec = dict(rec)
    try:
        cls = RECORDS[rec.pop("tag")]
    except KeyError as exc:
        raise ValueError(f"unknown or missing record tag: {exc}") from None
    kw = {}
    for f in fields(cls):
        v = rec[f.name]
        if f.name in _FIELD_ELEMENTS:
            v = fe_from_wire(v)
        elif f.name in _BYTES:
            v = bytes.fromhex(v)
        elif f.name == "payload":
            v = _dec_payload(v)
        elif f.name == "user":
            v = _dec_user(v)
        elif f.name == "indices":
            v = tuple(v)
        kw[f.name] = v
    return cls(**kw)


def encode(records) -> bytes:
    """Serialize one message (a list of records) for the wire."""
    return json.dumps([to_record(r) for r in records], separators=(",", ":")).encode()


def decode(data: bytes) -> list:
    return [from_record(r) for r in json.loads(data)]


class Network:
    """Synchronous message layer with per-party send/receive counters.

    A *message* is one envelope from one party to another and may carry a
    list of records.  With ``wire=True`` every envelope is round-tripped
    through :func:`encode`/:func:`decode`.
    """

    def __init__(self, wire: bool = False):
        self.wire = wire
        self.sent: Counter = Counter()
        self.received: Counter = Counter()

    def send(self, src, dst, records) -> list:
        records = list(records)
        if self.wire:
            records = decode(encode(records))
        self.sent[src] += 1
        self.received[dst] += 1
        return records

    def total(self, party) -> int:
        return self.sent[party] + self.received[party]

    def reset(self):
        self.sent.clear()
        self.received.clear()
