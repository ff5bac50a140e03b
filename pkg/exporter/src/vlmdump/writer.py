"""Bundle container writer, implemented against FORMATS.md.

This is deliberately a from-scratch implementation of the engine's
container layout (magic line, header-length line, canonical JSON header,
newline, packed little-endian float32 payload with a 64-bit BLAKE2b
checksum).  Interoperability is the file format, not shared code; the
conformance tests check this writer's bytes against a hand-written fixture
and against the engine's loader.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

FORMAT_VERSION = 1


def write_bundle(
    path: str,
    meta: dict,
    token_features: np.ndarray,
    token_positions: np.ndarray,
    cls_attention: np.ndarray,
    key_vectors: dict[int, np.ndarray],
) -> None:
    """Write one activation bundle.

    Tensor order is the canonical one (features, positions, cls attention,
    key tensors by ascending layer) so identical content produces identical
    bytes regardless of producer.
    """
    tensors: list[tuple[str, np.ndarray]] = [
        ("token_features", token_features),
        ("token_positions", token_positions),
        ("cls_attention", cls_attention),
    ]
    for layer in sorted(key_vectors):
        tensors.append((f"key_vectors_l{layer}", key_vectors[layer]))

    table = []
    chunks = []
    offset = 0
    for name, arr in tensors:
        raw = np.ascontiguousarray(np.asarray(arr), dtype="<f4").tobytes()
        table.append(
            {
                "name": name,
                "dtype": "f32",
                "shape": list(np.asarray(arr).shape),
                "offset": offset,
                "length": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)

    header = {
        "kind": "bundle",
        "meta": meta,
        "checksum": hashlib.blake2b(payload, digest_size=8).hexdigest(),
        "tensors": table,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(f"VTBUNDLE {FORMAT_VERSION}\n".encode("ascii"))
        fh.write(f"{len(blob)}\n".encode("ascii"))
        fh.write(blob)
        fh.write(b"\n")
        fh.write(payload)
    os.replace(tmp, path)
