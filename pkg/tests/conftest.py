import pytest

from detwave.model import p0
from detwave.profiles import classify_wave, compute_profile, find_weak_detonation_speed, rh_states


@pytest.fixture(scope="session")
def cfg():
    return p0()


@pytest.fixture(scope="session")
def strong_profile(cfg):
    st = rh_states(cfg, 0.2, 1.5)
    return compute_profile(cfg, classify_wave(cfg, st.strong, 0.2, 1.5))


@pytest.fixture(scope="session")
def cfg4():
    return p0(4.0)


@pytest.fixture(scope="session")
def s_hat4(cfg4):
    return find_weak_detonation_speed(cfg4, 0.2)


@pytest.fixture(scope="session")
def weak_profile(cfg4, s_hat4):
    st = rh_states(cfg4, 0.2, s_hat4)
    return compute_profile(cfg4, classify_wave(cfg4, st.weak, 0.2, s_hat4))


@pytest.fixture(scope="session")
def strong_report(strong_profile):
    from detwave.evans import stability_index
    return stability_index(strong_profile, winding=True)


@pytest.fixture(scope="session")
def weak_report(weak_profile):
    from detwave.evans import stability_index
    return stability_index(weak_profile, winding=True)
