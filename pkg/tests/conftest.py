import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # genprofiles / oracle helpers

from medforge.profile_xml import parse_profile
from medforge.template_engine import load_default_templates

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def figure4_xml() -> str:
    return (FIXTURES / "bp_profile.xml").read_text(encoding="utf-8")


@pytest.fixture()
def figure4_profile(figure4_xml):
    return parse_profile(figure4_xml)


@pytest.fixture(scope="session")
def templates():
    return load_default_templates()


@pytest.fixture()
def fixture_path():
    return FIXTURES
