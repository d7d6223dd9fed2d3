import pytest

from blockpca import presets
from blockpca.model import snr

from conftest import FIG1_T, two_by_two_top


@pytest.mark.parametrize("target", presets.FIG1_SNRS)
def test_fig1_family_hits_exact_rationals(target):
    m, t = presets.model_for_snr("fig1", target)
    assert t == pytest.approx(FIG1_T[target], rel=1e-11)
    assert snr(m) == pytest.approx(target, abs=1e-12)


@pytest.mark.parametrize("name", ["fig2-left", "fig2-right"])
def test_fig2_families_cover_sweep(name):
    for target in presets.FIG2_SNRS:
        m, t = presets.model_for_snr(name, target)
        a, b, d = m.S[0, 0] / 2, m.S[0, 1] / 2, m.S[1, 1] / 2
        assert two_by_two_top(a, b, d) == pytest.approx(target, abs=1e-9)


def test_fig2_right_low_end_uses_tiny_coupling():
    m, t = presets.model_for_snr("fig2-right", 0.5)
    assert t <= 1e-8 and m.S[0, 1] == t


def test_unknown_family():
    with pytest.raises(KeyError):
        presets.family("fig3")
