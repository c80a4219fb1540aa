import pytest

from streamrules import catalog
from streamrules.model import Stream


@pytest.fixture(scope="session")
def programs():
    return {name: catalog.load_program(name) for name in catalog.QUERY_NAMES}


@pytest.fixture(scope="session")
def program_sources():
    return {
        name: catalog.program_path(name).read_text() for name in catalog.QUERY_NAMES
    }


def stream_of(ticks: dict, tmin=None, tmax=None) -> Stream:
    """Build a stream from {tick: [atoms]} with an optional explicit span."""
    if not ticks and tmin is None:
        return Stream.empty()
    lo = min(ticks) if tmin is None else tmin
    hi = max(ticks) if tmax is None else tmax
    return Stream(lo, hi, ticks)
