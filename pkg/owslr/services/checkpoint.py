"""
Checkpoint files.

Layout, little-endian throughout:

    b'OWSLR1\\n'
    u32 config length, UTF-8 ``key = value`` block (run config, epoch, adam.t, rng.*)
    u32 record count
    per record: u32 key length, key, u32 ndim, ndim x u32 dims, float32 payload

Parameters are keyed by their path (``backbone.head.weight``, ``owd.win.3.tl``,
``owd.mlp.0.bias``); Adam moments are stored as ``adam.m.<key>`` / ``adam.v.<key>``.
"""

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from owslr.network import SuperResolver
from owslr.numerics import AdamState

from .runconfig import RunConfig, cast_value, parse_text, validate

logger = logging.getLogger(__name__)

MAGIC_PREFIX = b'OWSLR'
FORMAT_VERSION = b'1'
MAGIC = MAGIC_PREFIX + FORMAT_VERSION + b'\n'

META_KEYS = ('epoch', 'adam.t', 'rng.bit_generator', 'rng.state', 'rng.inc', 'rng.has_uint32', 'rng.uinteger')


class CheckpointError(Exception):
    pass


@dataclass
class Checkpoint:
    config: RunConfig
    tensors: Dict[str, np.ndarray]
    adam_m: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_t: int = 0
    epoch: int = 0
    rng_state: Optional[dict] = None

    def build_model(self) -> SuperResolver:
        model = SuperResolver.create(self.config.backbone_config(), self.config.decoder_config(), self.config.seed)
        apply_checkpoint(self, model)
        return model

    def build_rng(self) -> np.random.Generator:
        rng = np.random.default_rng(self.config.seed)
        if self.rng_state is not None:
            rng.bit_generator.state = self.rng_state
        return rng


def _rng_lines(rng: Optional[np.random.Generator]) -> list:
    if rng is None:
        return []
    state = rng.bit_generator.state
    if state.get('bit_generator') != 'PCG64':
        raise CheckpointError(f'unsupported bit generator {state.get("bit_generator")}')
    return [
        'rng.bit_generator = PCG64',
        f'rng.state = {state["state"]["state"]}',
        f'rng.inc = {state["state"]["inc"]}',
        f'rng.has_uint32 = {state["has_uint32"]}',
        f'rng.uinteger = {state["uinteger"]}',
    ]


def _pack_record(key: str, array: np.ndarray) -> bytes:
    encoded = key.encode('utf-8')
    header = struct.pack('<I', len(encoded)) + encoded + struct.pack('<I', array.ndim)
    header += struct.pack(f'<{array.ndim}I', *array.shape)
    return header + np.ascontiguousarray(array, dtype='<f4').tobytes()


def save_checkpoint(path, model: SuperResolver, config: RunConfig, opt_state: Optional[AdamState] = None,
                    epoch: int = 0, rng: Optional[np.random.Generator] = None) -> Path:
    path = Path(path)
    params = model.named_parameters()
    records = [_pack_record(key, t.data) for key, t in params.items()]
    adam_t = 0
    if opt_state is not None and opt_state.m:
        adam_t = opt_state.t
        for (key, _), m, v in zip(params.items(), opt_state.m, opt_state.v):
            records.append(_pack_record(f'adam.m.{key}', m))
            records.append(_pack_record(f'adam.v.{key}', v))

    meta = [f'epoch = {epoch}', f'adam.t = {adam_t}', *_rng_lines(rng)]
    block = (config.to_text() + '\n'.join(meta) + '\n').encode('utf-8')

    payload = b''.join([MAGIC, struct.pack('<I', len(block)), block,
                        struct.pack('<I', len(records)), *records])
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + '.tmp')
    try:
        tmp.write_bytes(payload)
        tmp.replace(path)
    except OSError as e:
        raise CheckpointError(f'cannot write checkpoint {path}: {e}') from e
    logger.info('saved checkpoint %s (%d records, epoch %d)', path, len(records), epoch)
    return path


class _Reader:
    def __init__(self, data: bytes, name: str):
        self.data, self.name, self.pos = data, name, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f'{self.name}: truncated at byte {self.pos} (wanted {n} more)')
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack('<I', self.take(4))[0]


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f'cannot read checkpoint {path}: {e}') from e

    if not data.startswith(MAGIC_PREFIX):
        raise CheckpointError(f'{path.name}: not an OWSLR checkpoint (bad magic bytes)')
    if not data.startswith(MAGIC):
        version = data[len(MAGIC_PREFIX):data.find(b'\n')] if b'\n' in data[:16] else b'?'
        raise CheckpointError(
            f'{path.name}: unsupported checkpoint version {version.decode("ascii", "replace")}, '
            f'expected {FORMAT_VERSION.decode()}'
        )

    reader = _Reader(data, path.name)
    reader.take(len(MAGIC))
    raw_block = reader.take(reader.u32())
    try:
        pairs = parse_text(raw_block.decode('utf-8'))
        meta = {key: pairs.pop(key) for key in META_KEYS if key in pairs}
        config = validate(RunConfig(**{key: cast_value(key, raw) for key, raw in pairs.items()}))
        adam_t, epoch = int(meta.get('adam.t') or 0), int(meta.get('epoch') or 0)
        rng_state = None
        if 'rng.state' in meta:
            rng_state = {
                'bit_generator': meta['rng.bit_generator'],
                'state': {'state': int(meta['rng.state']), 'inc': int(meta['rng.inc'])},
                'has_uint32': int(meta['rng.has_uint32']),
                'uinteger': int(meta['rng.uinteger']),
            }
    except (UnicodeDecodeError, ValueError, TypeError, KeyError) as e:
        logger.error('corrupt config block in %s: %s', path, e)
        raise CheckpointError(f'{path.name}: corrupt config block ({e})') from e

    tensors, adam_m, adam_v = {}, {}, {}
    for _ in range(reader.u32()):
        try:
            key = reader.take(reader.u32()).decode('utf-8')
        except UnicodeDecodeError as e:
            raise CheckpointError(f'{path.name}: corrupt record key') from e
        ndim = reader.u32()
        shape = struct.unpack(f'<{ndim}I', reader.take(4 * ndim))
        count = int(np.prod(shape, dtype=np.int64))
        array = np.frombuffer(reader.take(4 * count), dtype='<f4').reshape(shape).astype(np.float32)
        if key.startswith('adam.m.'):
            adam_m[key[len('adam.m.'):]] = array
        elif key.startswith('adam.v.'):
            adam_v[key[len('adam.v.'):]] = array
        else:
            tensors[key] = array
    if reader.pos != len(data):
        raise CheckpointError(f'{path.name}: {len(data) - reader.pos} trailing byte(s)')
    checkpoint = Checkpoint(
        config=config, tensors=tensors, adam_m=adam_m, adam_v=adam_v,
        adam_t=adam_t, epoch=epoch, rng_state=rng_state,
    )
    logger.info('loaded checkpoint %s (%d tensors, epoch %d)', path, len(tensors), checkpoint.epoch)
    return checkpoint


def apply_checkpoint(checkpoint: Checkpoint, model: SuperResolver,
                     opt_state: Optional[AdamState] = None) -> None:
    """Copy stored tensors into ``model`` (and Adam moments into ``opt_state``)."""
    params = model.named_parameters()
    unknown = sorted(set(checkpoint.tensors) - set(params))
    if unknown:
        raise CheckpointError(f'unknown parameter key {unknown[0]!r} in checkpoint')
    missing = sorted(set(params) - set(checkpoint.tensors))
    if missing:
        raise CheckpointError(f'checkpoint lacks parameter {missing[0]!r}')
    for key, tensor in params.items():
        stored = checkpoint.tensors[key]
        if stored.shape != tensor.shape:
            raise CheckpointError(f'shape mismatch for {key}: checkpoint {stored.shape}, model {tensor.shape}')
    for key, tensor in params.items():
        tensor.data = checkpoint.tensors[key].astype(tensor.dtype, copy=True)
        tensor.grad = None

    if opt_state is not None and checkpoint.adam_m:
        opt_state.m = [checkpoint.adam_m[key].astype(params[key].dtype, copy=True) for key in params]
        opt_state.v = [checkpoint.adam_v[key].astype(params[key].dtype, copy=True) for key in params]
        opt_state.t = checkpoint.adam_t
