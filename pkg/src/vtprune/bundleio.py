"""Single-file tensor container: text header + raw little-endian f32 payload.

Layout (byte-exact; see FORMATS.md):

    line 1   ``VTBUNDLE <version>\\n``         ASCII magic + format version
    line 2   ``<header_bytes>\\n``             decimal length of the header
    header   canonical JSON, UTF-8            meta, checksum, tensor table
    ``\\n``  one separator byte
    payload  concatenated raw ``<f4`` tensors, row-major

The header's tensor table carries {name, dtype, shape, offset, length} per
tensor, offsets relative to the payload start, plus a 64-bit BLAKE2b
checksum of the whole payload.  Saving canonicalizes (sorted JSON keys,
fixed tensor order), so save -> load -> save reproduces files bit for bit.

Two container kinds share this layout: activation bundles ("bundle") and
pruned token sets ("tokens", the ``prune`` subcommand's result files).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass

import numpy as np

from .types import ActivationBundle, BundleMeta, TokenSet, validate_bundle

FORMAT_VERSION = 1
_MAGIC_PREFIX = "VTBUNDLE"
_KEY_TENSOR = re.compile(r"^key_vectors_l(\d+)$")
_TEXT_TENSOR = re.compile(r"^text_attention_l(\d+)$")


@dataclass
class TensorEntry:
    name: str
    dtype: str
    shape: tuple[int, ...]
    offset: int
    length: int


@dataclass
class BundleManifest:
    """Parsed container header: the tensor table plus meta key-values."""

    format_version: int
    kind: str
    meta: dict
    checksum: str
    tensors: list[TensorEntry]

    def as_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "kind": self.kind,
            "meta": dict(self.meta),
            "checksum": self.checksum,
            "tensors": [
                {
                    "name": t.name,
                    "dtype": t.dtype,
                    "shape": list(t.shape),
                    "offset": t.offset,
                    "length": t.length,
                }
                for t in self.tensors
            ],
        }


def read_manifest(path: str) -> BundleManifest:
    """Parse and verify a container, returning its manifest only."""
    header, _ = _read_container(path)
    return BundleManifest(
        format_version=FORMAT_VERSION,
        kind=str(header.get("kind", "")),
        meta=dict(header.get("meta", {})),
        checksum=str(header.get("checksum", "")),
        tensors=[
            TensorEntry(
                name=t["name"],
                dtype=t["dtype"],
                shape=tuple(int(s) for s in t["shape"]),
                offset=int(t["offset"]),
                length=int(t["length"]),
            )
            for t in header.get("tensors", [])
        ],
    )


class BundleFormatError(Exception):
    """Container-format failure with a machine-checkable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def _payload_checksum(payload: bytes) -> str:
    return hashlib.blake2b(payload, digest_size=8).hexdigest()


def _write_container(path: str, kind: str, meta: dict, tensors: list[tuple[str, np.ndarray]]) -> None:
    table = []
    chunks = []
    offset = 0
    for name, arr in tensors:
        arr = np.ascontiguousarray(np.asarray(arr), dtype="<f4")
        raw = arr.tobytes()
        table.append(
            {
                "name": name,
                "dtype": "f32",
                "shape": list(arr.shape),
                "offset": offset,
                "length": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "kind": kind,
        "meta": meta,
        "checksum": _payload_checksum(payload),
        "tensors": table,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(f"{_MAGIC_PREFIX} {FORMAT_VERSION}\n".encode("ascii"))
        fh.write(f"{len(header_bytes)}\n".encode("ascii"))
        fh.write(header_bytes)
        fh.write(b"\n")
        fh.write(payload)
    os.replace(tmp, path)


def _read_container(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()

    nl1 = data.find(b"\n")
    if nl1 < 0 or not data[:nl1].startswith(_MAGIC_PREFIX.encode("ascii")):
        raise BundleFormatError("bad_magic", f"{path} is not a {_MAGIC_PREFIX} container")
    magic_fields = data[:nl1].decode("ascii", errors="replace").split()
    if len(magic_fields) != 2 or not magic_fields[1].isdigit():
        raise BundleFormatError("bad_magic", "malformed magic line")
    version = int(magic_fields[1])
    if version != FORMAT_VERSION:
        raise BundleFormatError(
            "version_mismatch", f"format version {version}, engine supports {FORMAT_VERSION}"
        )

    nl2 = data.find(b"\n", nl1 + 1)
    if nl2 < 0:
        raise BundleFormatError("header_parse", "missing header length line")
    try:
        header_len = int(data[nl1 + 1 : nl2])
    except ValueError as exc:
        raise BundleFormatError("header_parse", "bad header length") from exc

    header_start = nl2 + 1
    header_end = header_start + header_len
    if header_end + 1 > len(data):
        raise BundleFormatError("header_parse", "header runs past end of file")
    try:
        header = json.loads(data[header_start:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleFormatError("header_parse", str(exc)) from exc
    if data[header_end : header_end + 1] != b"\n":
        raise BundleFormatError("header_parse", "missing header/payload separator")

    payload = data[header_end + 1 :]
    table = header.get("tensors", [])
    total = 0
    spans: list[tuple[int, int, str]] = []
    for entry in table:
        if entry.get("dtype") != "f32":
            raise BundleFormatError(
                "dtype_unsupported", f"{entry.get('name')}: dtype {entry.get('dtype')!r}"
            )
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if count * 4 != int(entry["length"]):
            raise BundleFormatError(
                "shape_mismatch",
                f"{entry['name']}: shape {list(shape)} needs {count * 4} bytes, "
                f"manifest says {entry['length']}",
            )
        spans.append((int(entry["offset"]), int(entry["length"]), entry["name"]))
        total += int(entry["length"])

    spans.sort()
    end = 0
    for off, length, name in spans:
        if off < end:
            raise BundleFormatError("offset_overlap", f"{name} overlaps the previous tensor")
        end = off + length
    if end != len(payload) or total != len(payload):
        raise BundleFormatError(
            "payload_length_mismatch",
            f"manifest declares {end} payload bytes, file has {len(payload)}",
        )

    if header.get("checksum") != _payload_checksum(payload):
        raise BundleFormatError("checksum_mismatch", "payload checksum does not match manifest")

    arrays = {}
    for entry in table:
        shape = tuple(int(s) for s in entry["shape"])
        off, length = int(entry["offset"]), int(entry["length"])
        arrays[entry["name"]] = (
            np.frombuffer(payload[off : off + length], dtype="<f4").reshape(shape).copy()
        )
    return header, arrays


def save_bundle(bundle: ActivationBundle, path: str) -> None:
    """Write a validated bundle; payloads are stored as float32."""
    violations = validate_bundle(bundle)
    if violations:
        raise ValueError("refusing to save invalid bundle: " + "; ".join(violations))
    tensors: list[tuple[str, np.ndarray]] = [
        ("token_features", bundle.token_features),
        ("token_positions", bundle.token_positions),
        ("cls_attention", bundle.cls_attention),
    ]
    for layer in sorted(bundle.key_vectors):
        tensors.append((f"key_vectors_l{layer}", bundle.key_vectors[layer]))
    for layer in sorted(bundle.text_attention):
        tensors.append((f"text_attention_l{layer}", bundle.text_attention[layer]))
    _write_container(path, "bundle", bundle.meta.as_dict(), tensors)


def load_bundle(path: str, validate: bool = True) -> ActivationBundle:
    """Read a bundle container; raises BundleFormatError on any defect."""
    header, arrays = _read_container(path)
    if header.get("kind") != "bundle":
        raise BundleFormatError("bad_kind", f"container kind {header.get('kind')!r}")
    meta = BundleMeta.from_dict(header["meta"])

    required = ["token_features", "token_positions", "cls_attention"] + [
        f"key_vectors_l{layer}" for layer in meta.layers
    ]
    for name in required:
        if name not in arrays:
            raise BundleFormatError("missing_tensor", name)

    key_vectors = {}
    text_attention = {}
    for name, arr in arrays.items():
        km = _KEY_TENSOR.match(name)
        tm = _TEXT_TENSOR.match(name)
        if km:
            key_vectors[int(km.group(1))] = arr
        elif tm:
            text_attention[int(tm.group(1))] = arr

    bundle = ActivationBundle(
        token_features=arrays["token_features"],
        token_positions=arrays["token_positions"],
        cls_attention=arrays["cls_attention"],
        key_vectors=key_vectors,
        meta=meta,
        text_attention=text_attention,
    )
    if validate:
        violations = validate_bundle(bundle)
        if violations:
            raise BundleFormatError("invalid_bundle", "; ".join(violations))
    return bundle


def save_token_set(tokens: TokenSet, path: str, run_meta: dict | None = None) -> None:
    """Write a pruned token set as a result container."""
    meta = dict(run_meta or {})
    meta["kinds"] = list(tokens.kind)
    meta["origins"] = [list(o) for o in tokens.origin]
    _write_container(
        path,
        "tokens",
        meta,
        [("features", tokens.features), ("positions", tokens.positions)],
    )


def load_token_set(path: str) -> tuple[TokenSet, dict]:
    """Read a result container back into a TokenSet plus its run metadata."""
    header, arrays = _read_container(path)
    if header.get("kind") != "tokens":
        raise BundleFormatError("bad_kind", f"container kind {header.get('kind')!r}")
    meta = dict(header["meta"])
    origins = [tuple(int(i) for i in o) for o in meta.pop("origins")]
    kinds = [str(k) for k in meta.pop("kinds")]
    tokens = TokenSet(
        features=arrays["features"].astype(np.float64),
        positions=arrays["positions"].astype(np.float64),
        origin=origins,
        kind=kinds,
    )
    return tokens, meta
