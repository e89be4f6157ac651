import pytest

from liftr.exceptions import ParamsError
from liftr.settings import Settings, get_settings


def test_defaults():
    settings = Settings()
    assert settings.resolution_depth == 4
    assert settings.clause_length_bound is None
    assert settings.atom_budget == 40
    assert settings.workers == 0


def test_from_env():
    environ = {"LIFTR_RESOLUTION_DEPTH": "6", "LIFTR_CLAUSE_LENGTH_BOUND": "3", "LIFTR_WORKERS": " ", "HOME": "/root"}
    settings = Settings.from_env(environ)
    assert settings.resolution_depth == 6
    assert settings.clause_length_bound == 3
    assert settings.workers == 0
    with pytest.raises(ParamsError, match="LIFTR_ATOM_BUDGET"):
        Settings.from_env({"LIFTR_ATOM_BUDGET": "many"})


def test_replace_ignores_none():
    settings = Settings().replace(resolution_depth=None, atom_budget=12)
    assert settings.resolution_depth == 4
    assert settings.atom_budget == 12


@pytest.mark.parametrize("field,value", [("resolution_depth", 0), ("workers", -1), ("atom_budget", 1.5)])
def test_validation(field, value):
    with pytest.raises(ParamsError, match=field):
        Settings(**{field: value})
    assert Settings(rewrite_depth=0).rewrite_depth == 0


def test_get_settings_reads_environment(monkeypatch):
    get_settings.cache_clear()
    monkeypatch.setenv("LIFTR_SYMBOLIC_DOMAIN_SIZE", "5")
    try:
        assert get_settings().symbolic_domain_size == 5
        assert get_settings() is get_settings()
    finally:
        get_settings.cache_clear()
