"""Versioned binary checkpoints with a bit-exact round trip.

Layout:

    offset  size    field
    0       5       magic "TPGEN"
    5       3       format version bytes (currently 0, 0, 1)
    8       4       header length, little-endian uint32
    12      L       header, UTF-8 text (see below)
    12+L    N       payload: tensors as little-endian float64, C order,
                    concatenated in header table order
    12+L+N  4       CRC-32 (zlib) of the payload, little-endian uint32

The header is ``key = value`` lines followed by a ``[tensors]`` section
listing name and shape of every tensor in payload order:

    seed = 1234
    widths = 784,1000,100
    activations_f = softplus,sigmoid
    activations_g = sigmoid,softplus
    prior = true
    [tensors]
    W_f_1 1000 784
    b_f_1 1000
    ...
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .model import GaussianPrior, LayerMap, LayerPair, NetworkParams

MAGIC = b"TPGEN"
VERSION = (0, 0, 1)


class CheckpointError(Exception):
    """Malformed or corrupt checkpoint file."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written by an incompatible format version."""


def _tensor_table(params: NetworkParams):
    """Named tensors in declaration order: per layer f then g, then the prior."""
    table = []
    for lp in params.layers:
        k = lp.index
        table.append((f"W_f_{k}", lp.f.weight))
        table.append((f"b_f_{k}", lp.f.bias))
        table.append((f"W_g_{k}", lp.g.weight))
        table.append((f"b_g_{k}", lp.g.bias))
    if params.prior is not None:
        table.append(("prior_mean", params.prior.mean))
        table.append(("prior_var", params.prior.variance))
    return table


def save_checkpoint(params: NetworkParams, path) -> None:
    widths = ",".join(str(w) for w in params.widths)
    acts_f = ",".join(lp.f.activation for lp in params.layers)
    acts_g = ",".join(lp.g.activation for lp in params.layers)
    table = _tensor_table(params)
    lines = [
        f"seed = {params.seed}",
        f"widths = {widths}",
        f"activations_f = {acts_f}",
        f"activations_g = {acts_g}",
        f"prior = {'true' if params.prior is not None else 'false'}",
        "[tensors]",
    ]
    for name, arr in table:
        lines.append(name + " " + " ".join(str(d) for d in arr.shape))
    header = ("\n".join(lines) + "\n").encode("utf-8")
    payload = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in table)
    with open(path, "wb") as fh:
        fh.write(MAGIC + bytes(VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint: expected {n} bytes for {what}, got {len(data)}")
    return data


def _parse_header(text: str):
    fields = {}
    shapes = []  # (name, dims) in payload order
    in_tensors = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "[tensors]":
            in_tensors = True
            continue
        if not in_tensors:
            if "=" not in line:
                raise CheckpointError(f"header line {lineno} is not 'key = value': {line!r}")
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
        else:
            parts = line.split()
            name, dims = parts[0], parts[1:]
            if not dims or not all(p.isdigit() for p in dims):
                raise CheckpointError(f"bad shape entry for tensor {name!r}: {line!r}")
            shapes.append((name, tuple(int(p) for p in dims)))
    for required in ("seed", "widths", "activations_f", "activations_g", "prior"):
        if required not in fields:
            raise CheckpointError(f"header missing field {required!r}")
    if not shapes:
        raise CheckpointError("header missing the [tensors] shape table")
    return fields, shapes


def load_checkpoint(path) -> NetworkParams:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 5, "magic")
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}: not a tpgen checkpoint")
        version = tuple(_read_exact(fh, 3, "version"))
        if version != VERSION:
            raise CheckpointVersionError(
                f"unsupported checkpoint version {version}, expected {VERSION}"
            )
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        try:
            header = _read_exact(fh, header_len, "header").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError(f"header is not valid UTF-8: {exc}") from None
        fields, shapes = _parse_header(header)

        tensors = {}
        payload_crc = 0
        for name, dims in shapes:
            n_bytes = 8 * int(np.prod(dims))
            raw = _read_exact(fh, n_bytes, f"tensor {name!r}")
            payload_crc = zlib.crc32(raw, payload_crc)
            tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
        (stored_crc,) = struct.unpack("<I", _read_exact(fh, 4, "payload CRC"))
        if stored_crc != (payload_crc & 0xFFFFFFFF):
            raise CheckpointError(
                f"payload CRC mismatch: stored {stored_crc:#010x}, computed {payload_crc & 0xFFFFFFFF:#010x}"
            )

    try:
        seed = int(fields["seed"])
        widths = [int(w) for w in fields["widths"].split(",")]
    except ValueError as exc:
        raise CheckpointError(f"bad numeric header field: {exc}") from None
    acts_f = [a.strip() for a in fields["activations_f"].split(",")]
    acts_g = [a.strip() for a in fields["activations_g"].split(",")]
    n_layers = len(widths) - 1
    if len(acts_f) != n_layers or len(acts_g) != n_layers:
        raise CheckpointError(
            f"activation lists have lengths {len(acts_f)}/{len(acts_g)}, "
            f"expected {n_layers} from field 'widths'"
        )

    def take(name, expected_shape):
        if name not in tensors:
            raise CheckpointError(f"shape table missing tensor {name!r}")
        arr = tensors[name]
        if arr.shape != expected_shape:
            raise CheckpointError(
                f"tensor {name!r} has shape {arr.shape}, expected {expected_shape}"
            )
        return arr

    layers = []
    for k in range(1, n_layers + 1):
        lo, hi = widths[k - 1], widths[k]
        layers.append(
            LayerPair(
                index=k,
                f=LayerMap(take(f"W_f_{k}", (hi, lo)), take(f"b_f_{k}", (hi,)), acts_f[k - 1]),
                g=LayerMap(take(f"W_g_{k}", (lo, hi)), take(f"b_g_{k}", (lo,)), acts_g[k - 1]),
            )
        )
    prior = None
    if fields["prior"] == "true":
        d = widths[-1]
        prior = GaussianPrior(take("prior_mean", (d,)), take("prior_var", (d,)))
    elif fields["prior"] != "false":
        raise CheckpointError(f"field 'prior' must be true/false, got {fields['prior']!r}")
    return NetworkParams(layers=layers, prior=prior, seed=seed)
