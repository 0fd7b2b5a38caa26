"""Parameter-vector-backed level generators.

Five architectures share one genome representation (a flat float vector plus
a descriptor fixing how it reshapes into layers):

- NCA / AuxNCA: a 3-layer convolutional update rule (3x3, 1x1, 1x1, 32 hidden
  channels, ReLU/sigmoid) applied iteratively to a one-hot level state. The
  AuxNCA variant carries 3 extra continuous channels as external memory.
- Decoder: transposed strided convolutions mapping a tiled 16-d latent (plus
  coordinate planes) from a 4x4 grid to the level in one pass.
- SinCPPN / GenSinCPPN: per-cell MLPs with two sine-activated hidden layers
  over normalized coordinates, optionally concatenated with a tiled 16-d
  latent.

All forward passes run in float32 and are deterministic functions of
(params, input). Tile logits are decoded by channel-wise argmax with
lowest-index tie-breaking; the final sigmoid on tile channels is omitted
because it is strictly monotone and cannot change the argmax. For plain NCAs
over binary alphabets the whole update rule is precomputed into a
512-entry neighborhood-pattern table (the rule is a pure function of each
cell's 3x3 neighborhood), which makes long episode rollouts cheap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import LatentSeed, Level, NcaState, SeedKind, decode_argmax, encode_onehot

GENOME_MAGIC = "LEVELQD-GENOME 1"
SIREN_OMEGA = 30.0
LATENT_DIM = 16
DECODER_BASE = 4  # spatial size the tiled latent starts from


class ArchitectureKind(str, Enum):
    NCA = "nca"
    AUX_NCA = "auxnca"
    DECODER = "decoder"
    SIN_CPPN = "sincppn"
    GEN_SIN_CPPN = "gensincppn"


_NCA_KINDS = (ArchitectureKind.NCA, ArchitectureKind.AUX_NCA)
_CPPN_KINDS = (ArchitectureKind.SIN_CPPN, ArchitectureKind.GEN_SIN_CPPN)
_LATENT_KINDS = (ArchitectureKind.DECODER, ArchitectureKind.GEN_SIN_CPPN)


@dataclass(frozen=True)
class ArchitectureDescriptor:
    """Everything needed to reshape a flat parameter vector into a network."""

    kind: ArchitectureKind
    tile_count: int
    height: int
    width: int
    hidden_channels: int = 32
    aux_channels: int = 0
    latent_dim: int = 0

    def __post_init__(self):
        if self.kind is ArchitectureKind.AUX_NCA and self.aux_channels != 3:
            raise ValueError("AuxNCA uses exactly 3 auxiliary channels")
        if self.kind not in _NCA_KINDS and self.aux_channels != 0:
            raise ValueError("only NCA-family architectures carry aux channels")
        if self.kind in _LATENT_KINDS and self.latent_dim != LATENT_DIM:
            raise ValueError(f"{self.kind.value} requires a latent of size {LATENT_DIM}")

    @property
    def layer_shapes(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        n, hid = self.tile_count, self.hidden_channels
        if self.kind in _NCA_KINDS:
            c = n + self.aux_channels
            return (
                ("conv3x3.weight", (hid, c, 3, 3)),
                ("conv3x3.bias", (hid,)),
                ("mix.weight", (hid, hid)),
                ("mix.bias", (hid,)),
                ("head.weight", (c, hid)),
                ("head.bias", (c,)),
            )
        if self.kind is ArchitectureKind.DECODER:
            shapes: list[tuple[str, tuple[int, ...]]] = []
            stages = _decoder_stage_count(self.height, self.width)
            cin = self.latent_dim + 2
            for i in range(stages):
                cout = n if i == stages - 1 else hid
                k = 2 if i == 0 else 4
                shapes.append((f"up{i + 1}.weight", (cin, cout, k, k)))
                shapes.append((f"up{i + 1}.bias", (cout,)))
                cin = cout
            return tuple(shapes)
        cin = 2 + self.latent_dim
        return (
            ("fc1.weight", (hid, cin)),
            ("fc1.bias", (hid,)),
            ("fc2.weight", (hid, hid)),
            ("fc2.bias", (hid,)),
            ("out.weight", (n, hid)),
            ("out.bias", (n,)),
        )

    @property
    def total_params(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layer_shapes)

    @property
    def weight_multipliers(self) -> tuple[float, ...]:
        """Per-entry scale applied when materializing forward weights.

        CPPN layers fold the sine-network initialization scaling into the
        genome space so the optimizer samples around zero with one global
        step size: the first layer scales by 1/fan_in and later layers by
        sqrt(6/fan_in)/omega. Other architectures use raw parameters.
        """
        if self.kind not in _CPPN_KINDS:
            return tuple(1.0 for _ in self.layer_shapes)
        first = 1.0 / (2 + self.latent_dim)
        later = math.sqrt(6.0 / self.hidden_channels) / SIREN_OMEGA
        return tuple(first if name.startswith("fc1") else later for name, _ in self.layer_shapes)


def _decoder_stage_count(height: int, width: int) -> int:
    target = max(height, width)
    stages = 1
    size = DECODER_BASE * 2
    while size < target:
        size *= 2
        stages += 1
    return stages


def make_descriptor(kind: ArchitectureKind | str, tile_count: int, height: int, width: int) -> ArchitectureDescriptor:
    kind = ArchitectureKind(kind)
    aux = 3 if kind is ArchitectureKind.AUX_NCA else 0
    latent = LATENT_DIM if kind in _LATENT_KINDS else 0
    return ArchitectureDescriptor(kind, tile_count, height, width, aux_channels=aux, latent_dim=latent)


def param_count(descriptor: ArchitectureDescriptor) -> int:
    return descriptor.total_params


@dataclass
class GeneratorGenome:
    descriptor: ArchitectureDescriptor
    params: np.ndarray

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64).ravel()
        expected = self.descriptor.total_params
        if self.params.size != expected:
            raise ValueError(f"genome length {self.params.size} != descriptor total {expected}")


def zero_genome(descriptor: ArchitectureDescriptor) -> GeneratorGenome:
    return GeneratorGenome(descriptor, np.zeros(descriptor.total_params))


def unpack(genome: GeneratorGenome) -> dict[str, np.ndarray]:
    """Split the flat vector into named layer tensors (row-major weights, then bias)."""
    out = {}
    offset = 0
    for name, shape in genome.descriptor.layer_shapes:
        size = int(np.prod(shape))
        out[name] = genome.params[offset : offset + size].reshape(shape)
        offset += size
    return out


def pack(descriptor: ArchitectureDescriptor, tensors: dict[str, np.ndarray]) -> np.ndarray:
    parts = []
    for name, shape in descriptor.layer_shapes:
        arr = np.asarray(tensors[name], dtype=np.float64)
        if arr.shape != shape:
            raise ValueError(f"layer {name}: expected shape {shape}, got {arr.shape}")
        parts.append(arr.ravel())
    return np.concatenate(parts)


def save_genome(genome: GeneratorGenome, path) -> None:
    """Write the genome file: text header plus little-endian float32 block."""
    d = genome.descriptor
    header = {
        "kind": d.kind.value,
        "tile_count": d.tile_count,
        "height": d.height,
        "width": d.width,
        "hidden_channels": d.hidden_channels,
        "aux_channels": d.aux_channels,
        "latent_dim": d.latent_dim,
        "param_count": d.total_params,
    }
    blob = genome.params.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write((GENOME_MAGIC + "\n").encode())
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(blob)


def load_genome(path) -> GeneratorGenome:
    data = Path(path).read_bytes()
    nl1 = data.index(b"\n")
    if data[:nl1].decode() != GENOME_MAGIC:
        raise ValueError(f"{path}: not a genome file (bad magic)")
    nl2 = data.index(b"\n", nl1 + 1)
    header = json.loads(data[nl1 + 1 : nl2])
    descriptor = ArchitectureDescriptor(
        kind=ArchitectureKind(header["kind"]),
        tile_count=header["tile_count"],
        height=header["height"],
        width=header["width"],
        hidden_channels=header["hidden_channels"],
        aux_channels=header["aux_channels"],
        latent_dim=header["latent_dim"],
    )
    params = np.frombuffer(data[nl2 + 1 :], dtype="<f4").astype(np.float64)
    return GeneratorGenome(descriptor, params)


# ---------------------------------------------------------------------------
# Materialized forward weights


class _Materialized:
    """Float32 layer tensors with init multipliers applied, plus fast-path data."""

    def __init__(self, genome: GeneratorGenome):
        d = genome.descriptor
        self.descriptor = d
        mults = d.weight_multipliers
        tensors = unpack(genome)
        self.layers = {
            name: (tensors[name] * mult).astype(np.float32)
            for (name, _), mult in zip(d.layer_shapes, mults)
        }
        self.table: np.ndarray | None = None
        if d.kind is ArchitectureKind.NCA and d.tile_count == 2 and d.aux_channels == 0 and d.width <= 62:
            self.table = _build_pattern_table(self)


def _nca_logits(mat: _Materialized, patches: np.ndarray) -> np.ndarray:
    """Shared 3-layer forward over flattened 3x3 patches of shape (..., C*9)."""
    w1 = mat.layers["conv3x3.weight"]
    c9 = w1.shape[1] * 9
    z = patches @ w1.reshape(w1.shape[0], c9).T + mat.layers["conv3x3.bias"]
    np.maximum(z, 0.0, out=z)
    z = z @ mat.layers["mix.weight"].T + mat.layers["mix.bias"]
    np.maximum(z, 0.0, out=z)
    return z @ mat.layers["head.weight"].T + mat.layers["head.bias"]


class _BorderLayout:
    """Border-class bookkeeping for pattern-table NCA steps.

    Zero padding makes a cell's update depend not only on its neighbors'
    tiles but also on which neighbors fall outside the grid (those contribute
    an all-zero one-hot vector, distinct from any tile). Cells are grouped
    into border classes (interior, each edge, each corner); the lookup table
    holds one 512-pattern block per class, and the per-cell offset map turns
    (class, neighborhood pattern) into a flat table index.
    """

    _cache: dict[tuple[int, int], "_BorderLayout"] = {}

    def __init__(self, height: int, width: int):
        ys, xs = np.indices((height, width))
        flags = (
            (ys == 0).astype(np.int32) * 8
            + (ys == height - 1) * 4
            + (xs == 0) * 2
            + (xs == width - 1) * 1
        )
        classes = np.unique(flags)
        rank = {int(c): i for i, c in enumerate(classes)}
        self.offsets = np.vectorize(lambda f: rank[int(f)] * 512)(flags).astype(np.int32)
        valid = np.ones((len(classes), 9), dtype=bool)
        for flag, i in rank.items():
            for k in range(9):
                dy, dx = divmod(k, 3)
                if (flag & 8 and dy == 0) or (flag & 4 and dy == 2) or (flag & 2 and dx == 0) or (flag & 1 and dx == 2):
                    valid[i, k] = False
        self.valid = valid

    @classmethod
    def get(cls, height: int, width: int) -> "_BorderLayout":
        key = (height, width)
        if key not in cls._cache:
            cls._cache[key] = cls(height, width)
        return cls._cache[key]


def _build_pattern_table(mat: _Materialized) -> np.ndarray:
    """Next-tile lookup over all binary 3x3 neighborhood patterns, per border class."""
    d = mat.descriptor
    layout = _BorderLayout.get(d.height, d.width)
    bits = ((np.arange(512)[:, None] >> np.arange(9)) & 1).astype(np.float32)  # (512, 9)
    blocks = []
    for valid in layout.valid:
        v = valid.astype(np.float32)
        blocks.append(np.concatenate([(1.0 - bits) * v, bits * v], axis=1))
    patches = np.concatenate(blocks, axis=0)  # (classes * 512, 18), channel 0 then 1
    logits = _nca_logits(mat, patches)
    return logits.argmax(axis=1).astype(np.int8)


def _extract_patches(levels: np.ndarray, aux: np.ndarray | None, tile_count: int) -> np.ndarray:
    """(B, h*w, C*9) float32 patches from padded one-hot (+aux) planes."""
    b, h, w = levels.shape
    a = 0 if aux is None else aux.shape[1]
    c = tile_count + a
    planes = np.zeros((b, c, h + 2, w + 2), dtype=np.float32)
    for t in range(tile_count):
        planes[:, t, 1 : h + 1, 1 : w + 1] = levels == t
    if aux is not None:
        planes[:, tile_count:, 1 : h + 1, 1 : w + 1] = aux
    windows = np.lib.stride_tricks.sliding_window_view(planes, (3, 3), axis=(2, 3))
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(b, h * w, c * 9)


try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _table_episode_kernel(levels, table, offsets, max_steps, early_stop):  # pragma: no cover
        """Roll out binary-alphabet episodes on row bitmasks, in place.

        Each level row is packed into an int64 bitmask (bit x = tile at
        column x), so a cell's 3x3 neighborhood pattern is three shift/mask
        operations; the next tile is a table lookup. Returns per-level step
        counts and convergence flags.
        """
        b, h, w = levels.shape
        steps = np.zeros(b, np.int64)
        converged = np.zeros(b, np.uint8)
        rows = np.zeros(h + 2, np.int64)
        new_rows = np.zeros(h + 2, np.int64)
        for i in range(b):
            for y in range(h):
                m = 0
                for x in range(w):
                    if levels[i, y, x]:
                        m |= 1 << x
                rows[y + 1] = m
            for step in range(1, max_steps + 1):
                changed = False
                for y in range(h):
                    above = rows[y]
                    mid = rows[y + 1]
                    below = rows[y + 2]
                    newm = 0
                    for x in range(w):
                        if x == 0:
                            p = ((above << 1) & 7) | (((mid << 1) & 7) << 3) | (((below << 1) & 7) << 6)
                        else:
                            sh = x - 1
                            p = ((above >> sh) & 7) | (((mid >> sh) & 7) << 3) | (((below >> sh) & 7) << 6)
                        if table[offsets[y, x] + p]:
                            newm |= 1 << x
                    new_rows[y + 1] = newm
                    if newm != rows[y + 1]:
                        changed = True
                for y in range(h):
                    rows[y + 1] = new_rows[y + 1]
                steps[i] = step
                if not changed:
                    converged[i] = 1
                    if early_stop:
                        break
                else:
                    converged[i] = 0
            for y in range(h):
                m = rows[y + 1]
                for x in range(w):
                    levels[i, y, x] = (m >> x) & 1
        return steps, converged


_PATTERN_WEIGHTS = (1 << np.arange(9)).astype(np.int32).reshape(3, 3)


def _pattern_indices(levels: np.ndarray) -> np.ndarray:
    b, h, w = levels.shape
    padded = np.zeros((b, h + 2, w + 2), dtype=np.int32)
    padded[:, 1 : h + 1, 1 : w + 1] = levels
    idx = np.zeros((b, h, w), dtype=np.int32)
    for dy in range(3):
        for dx in range(3):
            idx += int(_PATTERN_WEIGHTS[dy, dx]) * padded[:, dy : dy + h, dx : dx + w]
    return idx


def _nca_batch_step(mat: _Materialized, levels: np.ndarray, aux: np.ndarray | None):
    """One update of a batch of levels; returns (new_levels, new_aux)."""
    d = mat.descriptor
    if mat.table is not None:
        layout = _BorderLayout.get(d.height, d.width)
        return mat.table[layout.offsets[None] + _pattern_indices(levels)], None
    b, h, w = levels.shape
    n = d.tile_count
    patches = _extract_patches(levels, aux, n)
    logits = _nca_logits(mat, patches)
    new_levels = logits[..., :n].argmax(axis=2).astype(np.int8).reshape(b, h, w)
    new_aux = None
    if d.aux_channels:
        raw = logits[..., n:].reshape(b, h, w, d.aux_channels)
        new_aux = _sigmoid(raw).transpose(0, 3, 1, 2)
    return new_levels, new_aux


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def nca_step(genome: GeneratorGenome, state: NcaState) -> NcaState:
    """Apply the update rule once to a one-hot (+aux) state."""
    d = genome.descriptor
    if d.kind not in _NCA_KINDS:
        raise ValueError(f"nca_step requires an NCA-family genome, got {d.kind}")
    if state.tile_count != d.tile_count or state.aux_channels != d.aux_channels:
        raise ValueError("state channel counts do not match the descriptor")
    mat = _Materialized(genome)
    levels = state.onehot.argmax(axis=0).astype(np.int8)[None]
    aux = state.aux[None].astype(np.float32) if d.aux_channels else None
    new_levels, new_aux = _nca_batch_step(mat, levels, aux)
    out = encode_onehot(Level(new_levels[0]), d.tile_count, d.aux_channels)
    if new_aux is not None:
        out.aux = new_aux[0]
    return out


def run_episode_batch(
    genome: GeneratorGenome, initial_levels: np.ndarray, max_steps: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Roll out the NCA on a batch of initial levels.

    Plain NCAs stop a level early once a step leaves it unchanged (a true
    fixed point of the deterministic update); AuxNCAs always run all steps
    because the auxiliary memory keeps evolving invisibly. Returns
    (final levels, steps taken, converged flags).
    """
    d = genome.descriptor
    if d.kind not in _NCA_KINDS:
        raise ValueError(f"episodes require an NCA-family genome, got {d.kind}")
    mat = _Materialized(genome)
    levels = np.array(initial_levels, dtype=np.int8)
    b = levels.shape[0]
    early_stop = d.aux_channels == 0
    if mat.table is not None and _HAVE_NUMBA:
        layout = _BorderLayout.get(d.height, d.width)
        steps, converged = _table_episode_kernel(levels, mat.table, layout.offsets, max_steps, early_stop)
        return levels, steps, converged.astype(bool)
    aux = None if early_stop else np.zeros((b, d.aux_channels, d.height, d.width), dtype=np.float32)
    steps = np.zeros(b, dtype=np.int64)
    converged = np.zeros(b, dtype=bool)
    active = np.arange(b)
    for step in range(1, max_steps + 1):
        if early_stop:
            sub = levels[active]
            new_sub, _ = _nca_batch_step(mat, sub, None)
            steps[active] = step
            same = (new_sub == sub).reshape(len(active), -1).all(axis=1)
            levels[active] = new_sub
            converged[active[same]] = True
            active = active[~same]
            if active.size == 0:
                break
        else:
            new_levels, aux = _nca_batch_step(mat, levels, aux)
            steps[:] = step
            if step == max_steps:
                converged = (new_levels == levels).reshape(b, -1).all(axis=1)
            levels = new_levels
    return levels, steps, converged


def generate_episode(
    genome: GeneratorGenome, seed: LatentSeed, max_steps: int
) -> tuple[Level, int, bool]:
    """Run one generation episode from a random-level seed."""
    if seed.kind is not SeedKind.RANDOM_LEVEL:
        raise ValueError("NCA episodes start from random-level seeds")
    level0 = _seed_level(genome.descriptor, seed.rng_seed)
    finals, steps, converged = run_episode_batch(genome, level0.cells[None], max_steps)
    return Level(finals[0]), int(steps[0]), bool(converged[0])


@lru_cache(maxsize=4096)
def _seed_cells(tile_count: int, height: int, width: int, rng_seed: int) -> np.ndarray:
    # Matches grid.sample_random_level for a spec with the same dims/alphabet.
    rng = np.random.default_rng(rng_seed)
    return rng.integers(0, tile_count, size=(height, width), dtype=np.int8)


def _seed_level(descriptor: ArchitectureDescriptor, rng_seed: int) -> Level:
    return Level(_seed_cells(descriptor.tile_count, descriptor.height, descriptor.width, rng_seed))


# ---------------------------------------------------------------------------
# Decoder


def _conv_transpose2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int, pad: int) -> np.ndarray:
    b, cin, h, w = x.shape
    _, cout, k, _ = weight.shape
    full_h = (h - 1) * stride + k
    full_w = (w - 1) * stride + k
    out = np.zeros((b, cout, full_h, full_w), dtype=np.float32)
    for di in range(k):
        for dj in range(k):
            contrib = np.einsum("bchw,co->bohw", x, weight[:, :, di, dj], optimize=True)
            out[:, :, di : di + stride * h : stride, dj : dj + stride * w : stride] += contrib
    out = out[:, :, pad : full_h - pad, pad : full_w - pad]
    return out + bias[None, :, None, None]


def _coord_planes(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    xs = np.linspace(-1.0, 1.0, width, dtype=np.float32) if width > 1 else np.zeros(width, dtype=np.float32)
    ys = np.linspace(-1.0, 1.0, height, dtype=np.float32) if height > 1 else np.zeros(height, dtype=np.float32)
    return np.broadcast_to(xs, (height, width)), np.broadcast_to(ys[:, None], (height, width))


def _decoder_levels(mat: _Materialized, latents: np.ndarray) -> np.ndarray:
    d = mat.descriptor
    b = latents.shape[0]
    xp, yp = _coord_planes(DECODER_BASE, DECODER_BASE)
    z = np.empty((b, d.latent_dim + 2, DECODER_BASE, DECODER_BASE), dtype=np.float32)
    z[:, : d.latent_dim] = latents.astype(np.float32)[:, :, None, None]
    z[:, d.latent_dim] = xp
    z[:, d.latent_dim + 1] = yp
    stages = _decoder_stage_count(d.height, d.width)
    for i in range(stages):
        k = 2 if i == 0 else 4
        pad = 0 if k == 2 else 1
        z = _conv_transpose2d(z, mat.layers[f"up{i + 1}.weight"], mat.layers[f"up{i + 1}.bias"], 2, pad)
        if i < stages - 1:
            np.maximum(z, 0.0, out=z)
    size_h, size_w = z.shape[2], z.shape[3]
    top = (size_h - d.height) // 2
    left = (size_w - d.width) // 2
    z = z[:, :, top : top + d.height, left : left + d.width]
    return z.argmax(axis=1).astype(np.int8)


def decoder_forward(
    genome: GeneratorGenome, latent: np.ndarray | None = None, rng_seed: int | None = None
) -> Level:
    """Single-pass decode of a 16-d latent (given directly or drawn from rng_seed)."""
    d = genome.descriptor
    if d.kind is not ArchitectureKind.DECODER:
        raise ValueError(f"decoder_forward requires a decoder genome, got {d.kind}")
    if latent is None:
        if rng_seed is None:
            raise ValueError("provide either a latent vector or an rng_seed")
        latent = LatentSeed(SeedKind.GAUSSIAN_VECTOR, rng_seed, d.latent_dim).vector()
    latent = np.asarray(latent, dtype=np.float64).reshape(1, d.latent_dim)
    return Level(_decoder_levels(_Materialized(genome), latent)[0])


# ---------------------------------------------------------------------------
# Sine CPPNs


def _cell_coordinates(descriptor: ArchitectureDescriptor) -> np.ndarray:
    xp, yp = _coord_planes(descriptor.height, descriptor.width)
    return np.stack([xp.ravel(), yp.ravel()], axis=1)  # (h*w, 2), x then y


def _cppn_logits(mat: _Materialized, inputs: np.ndarray) -> np.ndarray:
    # Both sine layers scale their pre-activation by omega, as in the SIREN
    # forward pass; the init multipliers divide omega back out of the weights.
    z = np.sin(SIREN_OMEGA * (inputs @ mat.layers["fc1.weight"].T + mat.layers["fc1.bias"]))
    z = np.sin(SIREN_OMEGA * (z @ mat.layers["fc2.weight"].T + mat.layers["fc2.bias"]))
    return z @ mat.layers["out.weight"].T + mat.layers["out.bias"]


def _cppn_levels(mat: _Materialized, latents: np.ndarray | None, batch: int) -> np.ndarray:
    d = mat.descriptor
    coords = _cell_coordinates(d).astype(np.float32)
    hw = coords.shape[0]
    if d.kind is ArchitectureKind.SIN_CPPN:
        logits = _cppn_logits(mat, coords)
        level = logits.argmax(axis=1).astype(np.int8).reshape(d.height, d.width)
        return np.repeat(level[None], batch, axis=0)
    inputs = np.empty((latents.shape[0], hw, 2 + d.latent_dim), dtype=np.float32)
    inputs[:, :, :2] = coords
    inputs[:, :, 2:] = latents.astype(np.float32)[:, None, :]
    logits = _cppn_logits(mat, inputs)
    return logits.argmax(axis=2).astype(np.int8).reshape(-1, d.height, d.width)


def cppn_forward(
    genome: GeneratorGenome, latent: np.ndarray | None, cell: tuple[int, int]
) -> np.ndarray:
    """Raw tile scores for one cell; `cell` is (x, y)."""
    d = genome.descriptor
    if d.kind not in _CPPN_KINDS:
        raise ValueError(f"cppn_forward requires a CPPN genome, got {d.kind}")
    if (latent is not None) != (d.kind is ArchitectureKind.GEN_SIN_CPPN):
        raise ValueError("latent must be given exactly when the genome is generative")
    x, y = cell
    coords = _cell_coordinates(d).reshape(d.height, d.width, 2)[y, x]
    if latent is None:
        inputs = coords[None].astype(np.float32)
    else:
        latent = np.asarray(latent, dtype=np.float32).reshape(d.latent_dim)
        inputs = np.concatenate([coords.astype(np.float32), latent])[None]
    return _cppn_logits(_Materialized(genome), inputs)[0].astype(np.float64)


def cppn_level(genome: GeneratorGenome, latent: np.ndarray | None = None) -> Level:
    """Evaluate every cell and decode the argmax level."""
    d = genome.descriptor
    if d.kind not in _CPPN_KINDS:
        raise ValueError(f"cppn_level requires a CPPN genome, got {d.kind}")
    mat = _Materialized(genome)
    if d.kind is ArchitectureKind.SIN_CPPN:
        return Level(_cppn_levels(mat, None, 1)[0])
    latent = np.asarray(latent, dtype=np.float64).reshape(1, d.latent_dim)
    return Level(_cppn_levels(mat, latent, 1)[0])


# ---------------------------------------------------------------------------
# Unified batch generation


def seed_kind_for(kind: ArchitectureKind) -> SeedKind:
    return SeedKind.RANDOM_LEVEL if kind in _NCA_KINDS else SeedKind.GAUSSIAN_VECTOR


def generate_levels(genome: GeneratorGenome, seeds: Sequence[LatentSeed], max_steps: int) -> np.ndarray:
    """Produce one level per latent seed as a (batch, h, w) tile-index array."""
    d = genome.descriptor
    if d.kind in _NCA_KINDS:
        initial = np.stack([_seed_level(d, s.rng_seed).cells for s in seeds])
        finals, _, _ = run_episode_batch(genome, initial, max_steps)
        return finals
    mat = _Materialized(genome)
    if d.kind is ArchitectureKind.DECODER:
        latents = np.stack([s.vector() for s in seeds])
        return _decoder_levels(mat, latents)
    if d.kind is ArchitectureKind.GEN_SIN_CPPN:
        latents = np.stack([s.vector() for s in seeds])
        return _cppn_levels(mat, latents, len(seeds))
    return _cppn_levels(mat, None, len(seeds))
