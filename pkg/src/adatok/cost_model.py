"""Analytic compute-cost and bandwidth models.

Prefilling cost is quadratic in sequence length, so compressing |X1| tokens to
r*|X1| at decoder layer k changes the proportional cost from (L-1)*|X1|^2 to
(k-1)*|X1|^2 + (L-k)*(r*|X1|)^2. Costs are reported normalized by |X1|^2; an
optional per-unit constant turns them into labeled FLOP estimates.

Bandwidth accounting prices raw images at 3 bytes/pixel (uint8 RGB) and tokens
at dtype size per element, with KB = 1024 bytes and MB = 1024 KB.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidArgument

KB = 1024
MB = 1024 * 1024

_DTYPE_SIZES = {"f16": 2, "f32": 4}


@dataclass(frozen=True)
class DecoderConfig:
    num_layers: int  # L
    compress_at_layer: int = 1  # k, 1 <= k <= L
    pre_tokens: int = 576  # |X1|

    def __post_init__(self):
        if self.num_layers < 1:
            raise InvalidArgument(f"num_layers must be >= 1, got {self.num_layers}")
        if not 1 <= self.compress_at_layer <= self.num_layers:
            raise InvalidArgument(
                f"compress_at_layer must be in [1, {self.num_layers}], got {self.compress_at_layer}"
            )
        if self.pre_tokens < 1:
            raise InvalidArgument(f"pre_tokens must be >= 1, got {self.pre_tokens}")


@dataclass(frozen=True)
class CostReport:
    """Proportional prefill costs (normalized by |X1|^2) and the compression benefit."""

    cost_uncompressed: float
    cost_compressed: float
    benefit: float
    ratio: float


@dataclass(frozen=True)
class BandwidthEntry:
    payload_bytes: int
    display_value: float
    display_unit: str  # "KB/s" or "MB/s"

    @property
    def display(self) -> str:
        if self.display_unit == "MB/s":
            return f"{self.display_value:.2f}"
        if self.display_value == int(self.display_value):
            return str(int(self.display_value))
        return f"{self.display_value:.2f}"


def compute_cost(cfg: DecoderConfig, r: float, flops_per_unit: float | None = None) -> CostReport:
    """Evaluate the quadratic prefill cost model at compression ratio r.

    With flops_per_unit set, costs are multiplied by flops_per_unit * |X1|^2 and
    become estimates in absolute units; otherwise they are in |X1|^2 units.
    """
    if not 0.0 < r <= 1.0:
        raise InvalidArgument(f"ratio must be in (0, 1], got {r}")
    L, k = cfg.num_layers, cfg.compress_at_layer
    cost_compressed = (k - 1) + (L - k) * r * r
    cost_uncompressed = float(L - 1)
    benefit = (L - k) * (1.0 - r * r)
    scale = 1.0 if flops_per_unit is None else flops_per_unit * cfg.pre_tokens**2
    return CostReport(
        cost_uncompressed=cost_uncompressed * scale,
        cost_compressed=cost_compressed * scale,
        benefit=benefit * scale,
        ratio=r,
    )


def verify_benefit_identity(cfg: DecoderConfig, r: float, rel_tol: float = 1e-9) -> bool:
    """Check (cost at r=1 minus cost at r) equals (L-k)(1-r^2) in |X1|^2 units."""
    report = compute_cost(cfg, r)
    two_sided = report.cost_uncompressed - report.cost_compressed
    closed_form = (cfg.num_layers - cfg.compress_at_layer) * (1.0 - r * r)
    return abs(two_sided - closed_form) <= rel_tol * max(1.0, abs(closed_form))


def image_bytes(height: int, width: int) -> int:
    """Raw uint8 RGB transfer size: height * width * 3."""
    if height < 1 or width < 1:
        raise InvalidArgument(f"image dims must be positive, got {height}x{width}")
    return height * width * 3


def token_bytes(count: int, dim: int, dtype: str = "f16") -> int:
    """Token-stream transfer size: count * dim * dtype size."""
    if count < 1 or dim < 1:
        raise InvalidArgument(f"count and dim must be positive, got {count}, {dim}")
    if dtype not in _DTYPE_SIZES:
        raise InvalidArgument(f"dtype must be one of {sorted(_DTYPE_SIZES)}, got {dtype!r}")
    return count * dim * _DTYPE_SIZES[dtype]


def reduction_factor(image_h: int, image_w: int, count: int, dim: int, dtype: str = "f16") -> float:
    """How many times smaller the token stream is than the raw image."""
    return image_bytes(image_h, image_w) / token_bytes(count, dim, dtype)


def bytes_to_entry(payload: int) -> BandwidthEntry:
    """Display convention: MB (2 decimals) at >= 1 MiB, else KB (integer or 2 decimals)."""
    if payload >= MB:
        return BandwidthEntry(payload, round(payload / MB, 2), "MB/s")
    value = payload / KB
    return BandwidthEntry(payload, value if value != int(value) else int(value), "KB/s")


TABLE5_RESOLUTIONS = (224, 336, 480, 512, 640, 768, 1024)
TABLE5_TOKEN_COUNTS = (8, 12, 16, 32, 64, 128, 192)
TABLE5_TOKEN_DIM = 1024


def bandwidth_table() -> list[tuple[str, BandwidthEntry]]:
    """The 14 canonical rows: square-image resolutions then token counts at dim 1024 f16."""
    rows: list[tuple[str, BandwidthEntry]] = []
    for res in TABLE5_RESOLUTIONS:
        rows.append((f"{res}^2", bytes_to_entry(image_bytes(res, res))))
    for count in TABLE5_TOKEN_COUNTS:
        rows.append((str(count), bytes_to_entry(token_bytes(count, TABLE5_TOKEN_DIM, "f16"))))
    return rows
