import itertools

import pytest

from chipmap.hw import (
    AcceleratorConfig,
    ChipletSpec,
    Dataflow,
    HardwareError,
    dram_die_of,
    dram_hops,
    hop_count,
    presets,
    uniform_accel,
)
from chipmap.modelgraph import LayerNode, OpKind


def gemm_node(layer_id=0, dram_in=None, dram_out=None):
    return LayerNode(layer_id=layer_id, op_kind=OpKind.GEMM, m_rows=1, k=1, n=1,
                     dram_in_id=dram_in, dram_out_id=dram_out)


class TestHopCount:
    def test_self_is_zero(self):
        cfg = uniform_accel(6, 6)
        assert hop_count(17, 17, cfg) == 0

    def test_corner_to_corner(self):
        cfg = uniform_accel(6, 6)
        assert hop_count(0, 35, cfg) == 10

    def test_2x2_diagonal(self):
        cfg = uniform_accel(2, 2)
        assert hop_count(0, 3, cfg) == 2

    def test_out_of_range(self):
        with pytest.raises(HardwareError):
            hop_count(0, 4, uniform_accel(2, 2))

    def test_metric_properties_exhaustive_6x6(self):
        cfg = uniform_accel(6, 6)
        n = cfg.num_chiplets
        for a, b in itertools.product(range(n), repeat=2):
            d = hop_count(a, b, cfg)
            assert d == hop_count(b, a, cfg)
            assert (d == 0) == (a == b)
        for a, b, c in itertools.product(range(0, n, 5), range(n), range(0, n, 7)):
            assert hop_count(a, c, cfg) <= hop_count(a, b, cfg) + hop_count(b, c, cfg)


class TestDram:
    def test_pinned_die_passthrough(self):
        cfg = uniform_accel(6, 6)
        assert dram_die_of(gemm_node(dram_in=2, dram_out=2), cfg) == (2, 2)

    def test_unpinned_round_robin(self):
        cfg = uniform_accel(6, 6)
        assert dram_die_of(gemm_node(layer_id=5), cfg) == (1, 1)
        assert dram_die_of(gemm_node(layer_id=8), cfg) == (0, 0)

    def test_bad_die(self):
        cfg = uniform_accel(6, 6)
        with pytest.raises(HardwareError):
            dram_die_of(gemm_node(dram_in=7), cfg)

    def test_adjacent_edge_chiplet_is_one_hop(self):
        cfg = uniform_accel(6, 6)
        die = 0
        x, y = cfg.io_positions[die]
        assert x == -1
        chip = y * 6  # leftmost chiplet in the die's row
        assert dram_hops(chip, die, cfg) == 1

    def test_one_position_per_die(self):
        cfg = uniform_accel(6, 6)
        assert len(cfg.io_positions) == cfg.dram_dies


class TestPresets:
    def test_ws(self):
        cfg = presets()["WS"]
        assert cfg.num_chiplets == 36
        assert all(c.dataflow is Dataflow.WS for c in cfg.chiplets)
        assert all(c.glb_bytes == 2 * 1024 * 1024 for c in cfg.chiplets)
        assert all(c.mac_count == 1024 for c in cfg.chiplets)

    def test_he_split(self):
        cfg = presets()["HE"]
        flows = [c.dataflow for c in cfg.chiplets]
        assert flows.count(Dataflow.WS) == 18
        assert flows.count(Dataflow.OS) == 18
        # rows 0-2 are WS, rows 3-5 OS (row-major layout)
        assert all(f is Dataflow.WS for f in flows[:18])
        assert all(f is Dataflow.OS for f in flows[18:])

    def test_os_bandwidths(self):
        cfg = presets()["OS"]
        assert cfg.nop_link_bw == 128e9
        assert cfg.dram_bw_per_die == 64e9
        assert cfg.dram_dies == 4


class TestConfigInvariants:
    def test_spec_mismatch(self):
        with pytest.raises(HardwareError):
            ChipletSpec(mac_count=1024, array_rows=16, array_cols=16)

    def test_grid_mismatch(self):
        with pytest.raises(HardwareError):
            AcceleratorConfig(2, 2, (ChipletSpec(),) * 3)

    def test_coords_row_major(self):
        cfg = uniform_accel(3, 2)
        assert cfg.coords(0) == (0, 0)
        assert cfg.coords(4) == (1, 1)
