import pytest

from modswitch.modem import SchemeId, build_scheme

REAL_SCHEME_IDS = [
    SchemeId.BPSK,
    SchemeId.QPSK,
    SchemeId.QAM8,
    SchemeId.QAM16,
    SchemeId.QAM32,
    SchemeId.QAM64,
]


@pytest.fixture(params=REAL_SCHEME_IDS, ids=lambda s: s.name.lower())
def scheme(request):
    """Each transmittable scheme, including the extended QAM8/QAM32 set."""
    return build_scheme(request.param)
