"""Accelerator description: chiplet grid, NoP mesh, DRAM dies, cost coefficients.

The per-access energy numbers below are placeholders of plausible magnitude
for a ~12nm node; every figure is a config input and can be overridden when
calibrated values are available.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

MIB = 1024 * 1024


class HardwareError(ValueError):
    pass


class Dataflow(str, Enum):
    WS = "WS"  # weight-stationary PE array
    OS = "OS"  # output-stationary PE array


@dataclass(frozen=True)
class ChipletSpec:
    """One compute chiplet: PE array, global buffer, vector unit."""

    dataflow: Dataflow = Dataflow.WS
    mac_count: int = 1024
    array_rows: int = 32
    array_cols: int = 32
    glb_bytes: int = 2 * MIB
    freq_hz: float = 1.0e9
    vector_ops_per_cycle: int = 64

    def __post_init__(self) -> None:
        if self.array_rows * self.array_cols != self.mac_count:
            raise HardwareError(
                f"array {self.array_rows}x{self.array_cols} does not match "
                f"{self.mac_count} MACs"
            )
        if self.glb_bytes <= 0 or self.freq_hz <= 0 or self.vector_ops_per_cycle <= 0:
            raise HardwareError("chiplet parameters must be positive")


@dataclass(frozen=True)
class EnergyCoefficients:
    """Per-access energy costs in joules."""

    e_mac: float = 1.0e-12      # per MAC
    e_glb: float = 1.0e-12      # per GLB byte
    e_dram: float = 30.0e-12    # per DRAM byte
    e_nop_hop: float = 4.0e-12  # per byte per mesh hop
    e_vector: float = 0.5e-12   # per vector-unit op


def _default_io_positions(grid_w: int, grid_h: int, dies: int) -> tuple[tuple[int, int], ...]:
    """Attach DRAM/IO dies alternately on the left/right mesh edges, spread over rows."""
    n_left = (dies + 1) // 2
    n_right = dies // 2
    positions = []
    for i in range(dies):
        on_left = i % 2 == 0
        n_side = n_left if on_left else n_right
        y = min(int((i // 2 + 0.5) * grid_h / n_side), grid_h - 1)
        positions.append((-1 if on_left else grid_w, y))
    return tuple(positions)


@dataclass(frozen=True)
class AcceleratorConfig:
    grid_w: int
    grid_h: int
    chiplets: tuple[ChipletSpec, ...]
    nop_link_bw: float = 128e9      # bytes/s per mesh link
    nop_hop_latency: int = 4        # cycles per hop
    dram_dies: int = 4
    dram_bw_per_die: float = 64e9   # bytes/s
    io_positions: tuple[tuple[int, int], ...] = ()  # off-grid (x, y) per DRAM die
    energy: EnergyCoefficients = field(default_factory=EnergyCoefficients)

    def __post_init__(self) -> None:
        if self.grid_w <= 0 or self.grid_h <= 0:
            raise HardwareError("mesh dimensions must be positive")
        if len(self.chiplets) != self.grid_w * self.grid_h:
            raise HardwareError(
                f"expected {self.grid_w * self.grid_h} chiplet specs, "
                f"got {len(self.chiplets)}"
            )
        if self.dram_dies < 1:
            raise HardwareError("need at least one DRAM die")
        if not self.io_positions:
            object.__setattr__(
                self,
                "io_positions",
                _default_io_positions(self.grid_w, self.grid_h, self.dram_dies),
            )
        if len(self.io_positions) != self.dram_dies:
            raise HardwareError("one IO attach position required per DRAM die")

    @property
    def num_chiplets(self) -> int:
        return self.grid_w * self.grid_h

    def coords(self, chip_id: int) -> tuple[int, int]:
        """Row-major id -> (x, y)."""
        if not 0 <= chip_id < self.num_chiplets:
            raise HardwareError(f"chiplet id {chip_id} out of range")
        return chip_id % self.grid_w, chip_id // self.grid_w


def hop_count(src: int, dst: int, cfg: AcceleratorConfig) -> int:
    """Mesh hops between two chiplets under XY routing (Manhattan distance)."""
    sx, sy = cfg.coords(src)
    dx, dy = cfg.coords(dst)
    return abs(sx - dx) + abs(sy - dy)


def dram_die_of(node, cfg: AcceleratorConfig) -> tuple[int, int]:
    """Resolve a layer's (input, output) DRAM die ids.

    A pinned id on the node wins; unpinned layers round-robin by layer id.
    """
    default = node.layer_id % cfg.dram_dies
    dies = []
    for pinned in (node.dram_in_id, node.dram_out_id):
        if pinned is None:
            dies.append(default)
        elif 0 <= pinned < cfg.dram_dies:
            dies.append(pinned)
        else:
            raise HardwareError(f"DRAM die id {pinned} out of range")
    return dies[0], dies[1]


def dram_hops(chip_id: int, die_id: int, cfg: AcceleratorConfig) -> int:
    """XY distance from a chiplet to the edge attach point of a DRAM die."""
    if not 0 <= die_id < cfg.dram_dies:
        raise HardwareError(f"DRAM die id {die_id} out of range")
    cx, cy = cfg.coords(chip_id)
    ix, iy = cfg.io_positions[die_id]
    return abs(cx - ix) + abs(cy - iy)


def uniform_accel(
    grid_w: int,
    grid_h: int,
    dataflow: Dataflow = Dataflow.WS,
    spec: ChipletSpec | None = None,
    **overrides,
) -> AcceleratorConfig:
    """Build a homogeneous accelerator; extra kwargs override AcceleratorConfig fields."""
    chip = spec if spec is not None else ChipletSpec(dataflow=dataflow)
    if spec is not None and spec.dataflow is not dataflow:
        chip = replace(spec, dataflow=dataflow)
    return AcceleratorConfig(grid_w, grid_h, (chip,) * (grid_w * grid_h), **overrides)


def presets() -> dict[str, AcceleratorConfig]:
    """The three reference 6x6 designs: all-WS, all-OS, and a half/half mix.

    HE places WS chiplets on mesh rows 0-2 and OS chiplets on rows 3-5.
    """
    ws = ChipletSpec(dataflow=Dataflow.WS)
    os_ = ChipletSpec(dataflow=Dataflow.OS)
    return {
        "WS": AcceleratorConfig(6, 6, (ws,) * 36),
        "OS": AcceleratorConfig(6, 6, (os_,) * 36),
        "HE": AcceleratorConfig(6, 6, (ws,) * 18 + (os_,) * 18),
    }
