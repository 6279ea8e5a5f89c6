from fractions import Fraction

import pytest

from cwct.bench import (attention_macs, block_macs, mac_ratio, run_bench, slimming_macs, window_encode_macs,
                        window_encoder_macs_per_step)


def test_mac_ratio_is_window_count(default_cfg, small_cfg):
    assert mac_ratio(default_cfg) == Fraction(16)
    assert mac_ratio(small_cfg) == Fraction(small_cfg.num_windows)


def test_window_encode_macs_hand_count(small_cfg):
    # w=16 tokens of width 16, reductions 4 and 4
    stage0 = block_macs(16, 16, 4) + slimming_macs(16, 16, 32, 8, 4)
    stage1 = block_macs(4, 32, 4) + slimming_macs(4, 32, 64, 8, 1)
    assert window_encode_macs(small_cfg) == stage0 + stage1
    assert attention_macs(2, 3) == 2 * 9 + 2 * 2 * 9 + 2 * 2 * 2 * 3 + 2 * 9


def test_unknown_mode(small_cfg):
    with pytest.raises(ValueError):
        window_encoder_macs_per_step(small_cfg, "other")


def test_run_bench(small_cfg, small_store):
    rep = run_bench(small_cfg, small_store, steps=40)
    assert rep.modes["circular"].window_encodes_per_step == 1
    assert rep.modes["sliding"].window_encodes_per_step == small_cfg.num_windows
    assert rep.window_encode_ratio == small_cfg.num_windows
    assert rep.boundary_steps >= 2 and rep.boundaries_agree
    assert "MAC ratio" in rep.format()
    assert rep.to_dict()["mac_ratio"] == str(small_cfg.num_windows)
