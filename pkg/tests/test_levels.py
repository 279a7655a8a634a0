import numpy as np
import pytest

from ersim.errors import InvalidConfigError, UnsupportedTransitionError
from ersim.levels import (M_VALUES, IsotopeComposition, StrengthModel, build_level_scheme, format_m,
                          index_to_m, m_to_index, oscillator_strength, scheme_to_config,
                          transition_table)


def test_index_mapping_covers_ladder():
    assert [m_to_index(m) for m in M_VALUES] == list(range(8))
    assert index_to_m(0) == -3.5 and index_to_m(7) == 3.5
    assert format_m(2.5) == "|+5/2>" and format_m(-3.5) == "|-7/2>"
    with pytest.raises(UnsupportedTransitionError):
        m_to_index(4.5)
    with pytest.raises(UnsupportedTransitionError):
        m_to_index(1.0)


def test_default_ground_splitting_matches_drive_difference(scheme):
    # 2150 MHz - 1155.3 MHz
    assert scheme.ground_splitting(-3.5, -2.5) == pytest.approx(2150e6 - 1155.3e6, rel=1e-12)


def test_zeeman_splitting():
    assert build_level_scheme(field=0.0).zeeman_splitting == 0.0
    assert build_level_scheme(field=7.0).zeeman_splitting == pytest.approx(1.498e12, rel=1e-12)


@pytest.mark.parametrize("bad", [
    {"ground_spacing": -1.0},
    {"excited_spacing": [1e9] * 6},
    {"ground_spacing": [1e9, 1e9, 0.0, 1e9, 1e9, 1e9, 1e9]},
    {"field": -1.0},
    {"colour": "red"},
])
def test_invalid_configs(bad):
    with pytest.raises(InvalidConfigError):
        build_level_scheme(bad)


def test_per_level_spacings_and_config_round_trip():
    spacings = [990e6, 991e6, 992e6, 993e6, 994e6, 995e6, 996e6]
    s = build_level_scheme(ground_spacing=spacings)
    np.testing.assert_array_equal(s.ground_spacings, spacings)
    again = build_level_scheme(scheme_to_config(s))
    np.testing.assert_array_equal(again.ground_energies, s.ground_energies)
    np.testing.assert_array_equal(again.excited_energies, s.excited_energies)


def test_scheme_arrays_are_read_only(scheme):
    with pytest.raises(ValueError):
        scheme.ground_energies[0] = 1.0


def test_oscillator_strength_examples():
    assert oscillator_strength(0, 1.5) == 1.0
    assert oscillator_strength(-1, -2.5) == pytest.approx(0.25, abs=1e-15)
    assert oscillator_strength(-1, 3.5) == pytest.approx(0.025, abs=1e-15)
    assert oscillator_strength(1, -3.5) == pytest.approx(0.31, abs=1e-15)
    assert oscillator_strength(1, 2.5) == pytest.approx(0.031, abs=1e-15)


def test_strength_trends_monotone_non_increasing():
    minus = [oscillator_strength(-1, m) for m in M_VALUES[1:]]
    plus = [oscillator_strength(1, m) for m in M_VALUES[:-1]]
    assert np.all(np.diff(minus) < 0) and np.all(np.diff(plus) < 0)
    # linear: constant step
    np.testing.assert_allclose(np.diff(minus), (0.025 - 0.25) / 6, rtol=1e-12)
    np.testing.assert_allclose(np.diff(plus), (0.031 - 0.31) / 6, rtol=1e-12)


def test_higher_order_needs_branching_extension():
    with pytest.raises(UnsupportedTransitionError):
        oscillator_strength(2, 0.5)
    s1 = oscillator_strength(1, 0.5)
    assert oscillator_strength(2, 0.5, branching=True) == pytest.approx(s1**2, rel=1e-15)
    assert oscillator_strength(-3, 0.5, branching=True) == pytest.approx(
        oscillator_strength(-1, 0.5) ** 3, rel=1e-15)
    with pytest.raises(UnsupportedTransitionError):
        oscillator_strength(1, 3.5)  # no excited |+9/2>


def test_strength_model_validation():
    with pytest.raises(InvalidConfigError):
        StrengthModel(minus_start=0.0)
    with pytest.raises(InvalidConfigError):
        IsotopeComposition(target_fraction=1.5)
    assert IsotopeComposition().impurity_fraction == pytest.approx(0.08)


def test_table_counts(scheme, table, full_table):
    assert len(table) == 22
    assert len(table.band(0)) == 8 and len(table.band(-1)) == 7 and len(table.band(1)) == 7
    assert len(full_table) == 22 + 6 + 6 + 5 + 5
    assert all(t.rel_strength == 1.0 for t in table.band(0))
    assert all(0 < t.rel_strength <= 1 for t in full_table)


def test_band_offset_about_one_ghz(table):
    offset = table.band_centroid(1) - table.band_centroid(0)
    # (ground + excited spacing) / 2
    assert offset == pytest.approx(997.35e6, rel=1e-12)
    assert offset == pytest.approx(1e9, rel=0.01)


def test_symmetric_offsets_with_equal_spacings():
    t = transition_table(build_level_scheme(ground_spacing=1e9, excited_spacing=1e9))
    c0 = t.band_centroid(0)
    assert t.band_centroid(1) - c0 == pytest.approx(c0 - t.band_centroid(-1), rel=1e-12)


def test_frequencies_are_level_differences(scheme, full_table):
    for t in full_table:
        assert t.frequency == scheme.excited_energies[t.excited_index] - scheme.ground_energies[t.ground_index]


def test_shared_excited_state_differences_equal_ground_differences(scheme, full_table):
    for e in range(8):
        lines = full_table.to_excited(e)
        for a in lines:
            for b in lines:
                assert a.frequency - b.frequency == pytest.approx(
                    scheme.ground_energies[b.ground_index] - scheme.ground_energies[a.ground_index],
                    abs=1e-6)


def test_table_rebuild_is_bit_identical(scheme):
    assert transition_table(scheme, True) == transition_table(scheme, True)


def test_strength_matrix_orientation(full_table):
    s = full_table.strength_matrix()
    t = full_table.find(-3.5, -2.5)
    assert s[t.excited_index, t.ground_index] == t.rel_strength
    assert t.delta_m == 1 and t.label == "|-7/2>->|-5/2>"
