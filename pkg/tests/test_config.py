import warnings

import pytest

from helidefect.config import DEFAULTS, config_hash, load_config, parse_config
from helidefect.errors import ConfigError


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    assert load_config(p) == DEFAULTS
    assert load_config() == DEFAULTS


def test_flag_overrides_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("ladder.rungs=6\n# comment line\nladder.kernel = gaussian  # trailing\n")
    opts = load_config(p, {"ladder.rungs": 4, "seed": None})
    assert opts["ladder.rungs"] == 4
    assert opts["ladder.kernel"] == "gaussian"
    assert opts["seed"] == DEFAULTS["seed"]


@pytest.mark.parametrize("bad", ["ladder.rungs==", "ladder.rungs", "=3", "ladder.rungs=", "ladder.rungs=abc"])
def test_malformed_lines_report_line_number(bad):
    with pytest.raises(ConfigError) as info:
        parse_config("seed=1\n\n" + bad + "\n")
    assert "line 3" in str(info.value)


def test_unknown_key_warns_but_is_not_fatal():
    with pytest.warns(UserWarning, match="unknown config key"):
        opts = parse_config("colour=blue\nseed=3\n")
    assert opts == {"seed": 3}


def test_typed_values():
    opts = parse_config("ladder.dealias=yes\nrecipe.A=2.5\ngrid.n=32\nrecipe=taylor_green\n")
    assert opts == {"ladder.dealias": True, "recipe.A": 2.5, "grid.n": 32, "recipe": "taylor_green"}


def test_config_hash_stable_and_sensitive():
    a = dict(DEFAULTS)
    b = dict(reversed(list(DEFAULTS.items())))
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 16
    b["seed"] = 1
    assert config_hash(a) != config_hash(b)


def test_unknown_override_rejected():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        with pytest.raises(ConfigError):
            load_config(None, {"nope": 1})
