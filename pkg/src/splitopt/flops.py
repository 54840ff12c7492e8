"""Device-side computational cost of a configuration.

Only convolution multiply-adds and the latent projection are counted; batch
norm, activations, biases and the server-side blocks are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config_space import ArchPolicy, Configuration

INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class LayerShape:
    k: int
    f_in: int
    f_out: int
    h: int
    w: int

    def __post_init__(self) -> None:
        for name in ("k", "f_in", "f_out", "h", "w"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"LayerShape.{name} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class FlopsBreakdown:
    per_layer: tuple[int, ...]
    latent: int
    total: int

    def to_dict(self) -> dict[str, object]:
        return {"per_layer": list(self.per_layer), "latent": self.latent, "total": self.total}


def _checked(value: int, what: str) -> int:
    if value > INT64_MAX:
        raise OverflowError(f"{what} FLOPs {value} exceed the signed 64-bit range")
    return value


def conv_layer_flops(s: LayerShape) -> int:
    """``2 * k^2 * f_in * f_out * h * w``."""
    return _checked(2 * s.k * s.k * s.f_in * s.f_out * s.h * s.w, "convolution")


def latent_flops(f_out_m: int, h_m: int, w_m: int, l_s: int) -> int:
    """Dense projection of the last device feature map onto ``l_s`` outputs."""
    for name, v in (("f_out_m", f_out_m), ("h_m", h_m), ("w_m", w_m), ("l_s", l_s)):
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")
    return _checked(2 * f_out_m * h_m * w_m * l_s, "latent")


def layer_shapes(c: Configuration, policy: ArchPolicy) -> list[LayerShape]:
    return [LayerShape(c.k, d.f_in, d.f_out, d.h, d.w)
            for d in policy.layer_dims(c.f, c.m)]


def device_flops(c: Configuration, policy: ArchPolicy) -> FlopsBreakdown:
    shapes = layer_shapes(c, policy)
    per_layer = tuple(conv_layer_flops(s) for s in shapes)
    last = shapes[-1]
    latent = latent_flops(last.f_out, last.h, last.w, c.l_s)
    return FlopsBreakdown(per_layer, latent, _checked(sum(per_layer) + latent, "total"))


def total_flops(c: Configuration, policy: ArchPolicy) -> int:
    return device_flops(c, policy).total
