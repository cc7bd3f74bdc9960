import dataclasses

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from chipletsim.sysconfig import (KNOB_TABLE, SECTIONS, UNIMPLEMENTED_KNOBS, CompileConfig,
                                  ConstraintViolation, KiB, PackagingConfig, TapeoutConfig,
                                  apply_overrides, check, load_raw, system_from_raw, system_to_dict,
                                  validate)


def reference_node(**compile_kw):
    return validate(TapeoutConfig(), PackagingConfig(dies_x=2, dies_y=2),
                    CompileConfig(grid_x=64, grid_y=64, **compile_kw))


def test_64x64_over_2x2_dies_is_valid():
    s = reference_node()
    assert s.num_tiles == 4096
    assert s.dies_in_grid == (2, 2)


def test_grid_larger_than_node_rejected():
    with pytest.raises(ConstraintViolation) as e:
        validate(TapeoutConfig(), PackagingConfig(), CompileConfig(grid_x=64, grid_y=64))
    assert any("grid exceeds node" in v.rule for v in e.value.violations)


def test_iq_capacity_below_two_rejected():
    with pytest.raises(ConstraintViolation) as e:
        validate(compile_=CompileConfig(iq_capacity=1))
    assert any(v.knob == "compile.iq_capacity" and "< 2" in v.rule for v in e.value.violations)


def test_all_violations_reported_together():
    vs = check(TapeoutConfig(noc_width=48, tiles_per_die_x=3), PackagingConfig(),
               CompileConfig(iq_capacity=1, pu_freq_used=2_000_000_000))
    knobs = {v.knob for v in vs}
    assert {"tapeout.noc_width", "tapeout.tiles_per_die_x", "compile.iq_capacity",
            "compile.pu_freq_used"} <= knobs


def test_tile_coords_examples():
    s = reference_node()
    assert s.tile_coords(0) == (0, 0, 0, 0)
    assert s.tile_coords(33) == (33, 0, 1, 0)
    with pytest.raises(IndexError):
        s.tile_coords(4096)


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 4095))
def test_tile_coords_round_trip(tid):
    s = reference_node()
    x, y, dx, dy = s.tile_coords(tid)
    assert s.tile_id(x, y) == tid
    assert (dx, dy) == (x // 32, y // 32)


def test_geometry_hand_values_against_arbitrary_precision():
    g = validate().geometry
    with mpmath.workdps(40):
        sram = mpmath.mpf(512 * 1024) / (mpmath.mpf("3.5") * 2 ** 20)
        tile = sram / mpmath.mpf("0.6")
        pitch = mpmath.sqrt(tile)
    assert g.sram_area == pytest.approx(float(sram), rel=1e-14)
    assert g.tile_area == pytest.approx(float(tile), rel=1e-14)
    assert g.tile_pitch == pytest.approx(float(pitch), rel=1e-14)
    assert round(g.sram_area, 4) == 0.1429
    assert round(g.tile_area, 4) == 0.2381
    assert abs(g.tile_pitch - 0.488) < 0.0005
    assert g.hop_length_tile_noc == 2 * g.tile_pitch


def test_quadruple_sram_doubles_pitch():
    a = validate().geometry.tile_pitch
    b = validate(TapeoutConfig(sram_per_tile=2048 * KiB)).geometry.tile_pitch
    assert b == pytest.approx(2 * a, rel=1e-15)


def test_die_area_within_2x_of_255mm2():
    area = validate().geometry.die_area
    assert 255 / 2 <= area <= 255 * 2


@given(st.integers(1, 1 << 24), st.integers(1, 1 << 24))
def test_pitch_monotone_in_sram(a, b):
    lo, hi = sorted((a, b))
    p1 = validate(TapeoutConfig(sram_per_tile=lo)).geometry.tile_pitch
    p2 = validate(TapeoutConfig(sram_per_tile=hi)).geometry.tile_pitch
    assert p1 <= p2


def test_edge_router_tiles_are_die_borders():
    s = validate(TapeoutConfig(tiles_per_die_x=4, tiles_per_die_y=4), PackagingConfig(dies_x=2),
                 CompileConfig(grid_x=8, grid_y=4))
    edges = s.geometry.edge_router_tiles
    for t in range(s.num_tiles):
        x, y, _, _ = s.tile_coords(t)
        assert (t in edges) == (x % 4 in (0, 3) or y % 4 in (0, 3))


_junk = st.one_of(st.none(), st.booleans(), st.integers(-5, 10 ** 10), st.floats(allow_nan=True),
                  st.text(max_size=4), st.lists(st.integers(-2, 20), max_size=4))


@settings(max_examples=300, deadline=None)
@given(st.dictionaries(st.sampled_from([f.name for f in dataclasses.fields(CompileConfig)]), _junk),
       st.dictionaries(st.sampled_from([f.name for f in dataclasses.fields(TapeoutConfig)]), _junk))
def test_validate_is_total(cfields, tfields):
    try:
        c = dataclasses.replace(CompileConfig(), **cfields)
        t = dataclasses.replace(TapeoutConfig(), **tfields)
    except Exception:
        return
    vs = check(t, PackagingConfig(), c)
    assert isinstance(vs, list)
    if not vs:
        validate(t, PackagingConfig(), c)
    else:
        with pytest.raises(ConstraintViolation):
            validate(t, PackagingConfig(), c)


def test_knob_table_maps_to_existing_fields_once():
    seen = []
    for section, _label, paths in KNOB_TABLE:
        assert section in SECTIONS
        for p in paths:
            sec, name = p.split(".")
            assert name in {f.name for f in dataclasses.fields(SECTIONS[sec])}
            seen.append(p)
    assert len(seen) == len(set(seen))
    assert len(KNOB_TABLE) + len(UNIMPLEMENTED_KNOBS) == 20


def test_overrides_and_round_trip(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("compile:\n  grid_x: 8\n  grid_y: 8\ntapeout:\n  tiles_per_die_x: 8\n  tiles_per_die_y: 8\n")
    raw = apply_overrides(load_raw(path), ["compile.topology_tile_noc=mesh", "compile.oq_capacity=[12, 24, 12]"])
    s = system_from_raw(raw)
    assert s.compile.topology_tile_noc == "mesh"
    assert s.compile.oq_capacity == (12, 24, 12)
    assert system_from_raw(system_to_dict(s)) == s
    with pytest.raises(ValueError):
        apply_overrides({}, ["grid_x=4"])
    with pytest.raises(ConstraintViolation):
        system_from_raw({"compile": {"no_such_knob": 1}})
