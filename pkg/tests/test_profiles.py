import numpy as np
import pytest

from src.core.profiles import MAX_MULTIPLIER, PROFILE_KINDS, synth_profile

HOURS = np.linspace(0.0, 23.99, 480)


@pytest.mark.pure
@pytest.mark.parametrize("kind", PROFILE_KINDS)
def test_profiles_stay_in_range(kind):
    for day in (0, 5, 180):
        values = synth_profile(kind, HOURS, day)
        assert values.shape == HOURS.shape
        assert np.all(values >= 0.0) and np.all(values <= MAX_MULTIPLIER)


@pytest.mark.pure
def test_scalar_input_returns_float():
    assert isinstance(synth_profile("residential-nominal", 7.5), float)


@pytest.mark.pure
def test_solar_is_dark_at_night_and_peaks_at_noon():
    assert synth_profile("solar", 0.0, day=172) == pytest.approx(0.0, abs=1e-12)
    assert synth_profile("solar", 23.5, day=172) == pytest.approx(0.0, abs=1e-12)
    assert synth_profile("solar", 12.0, day=172) == pytest.approx(1.0)


@pytest.mark.pure
def test_evening_peak_exceeds_night():
    assert synth_profile("residential-nominal", 19.5) > synth_profile("residential-nominal", 3.0)


@pytest.mark.pure
def test_office_idles_on_weekends():
    assert synth_profile("office", 12.0, day=5) == pytest.approx(0.2)
    assert synth_profile("office", 12.0, day=2) > 0.8


@pytest.mark.pure
def test_unknown_kind():
    with pytest.raises(ValueError):
        synth_profile("stadium", 12.0)


@pytest.mark.pure
def test_residential_profile_is_bimodal():
    """Morning and evening peaks, counted around the clock at one-minute steps."""
    minutes = np.arange(24 * 60) / 60.0
    values = synth_profile("residential-nominal", minutes)
    peaks = np.flatnonzero((values > np.roll(values, 1)) & (values > np.roll(values, -1)))
    assert len(peaks) == 2
    assert minutes[peaks[0]] < 12.0 < minutes[peaks[1]]
