import pytest

from nlop.config import ConfigError, load_config, parse_config

TEXT = """# leading comment
[kernel]
s = 0.25          # inline comment
density = cos2:0.5

[domain]
nodes = 64
radii = 0.1, 0.2 ,0.4
flag = yes
"""


def test_parse_values_and_lines():
    c = parse_config(TEXT, "demo.ini")
    assert c.get_float("kernel", "s") == 0.25
    assert c.get_str("kernel", "density") == "cos2:0.5"
    assert c.get_int("domain", "nodes") == 64
    assert c.get_floats("domain", "radii") == [0.1, 0.2, 0.4]
    assert c.get_bool("domain", "flag") is True
    assert c.get_float("domain", "missing", 3.0) == 3.0
    assert c.line("kernel", "density") == 4 and c.line("domain") == 6


def test_case_insensitive_sections_and_keys():
    c = parse_config("[Kernel]\nS = 0.5\n")
    assert c.get_float("kernel", "s") == 0.5


def test_bad_value_reports_line():
    c = parse_config(TEXT, "demo.ini")
    with pytest.raises(ConfigError, match=r"demo.ini:8: .*integer"):
        c.get_int("domain", "radii")
    with pytest.raises(ConfigError, match=r"demo.ini:3:"):
        c.get_bool("kernel", "s")


@pytest.mark.parametrize("text,line", [
    ("s = 0.5\n", 1),
    ("[kernel]\ns = 0.5\nthis line has no separator\n", 3),
    ("[kernel]\ns = 0.5\ns = 0.6\n", 3),
    ("[kernel]\ns = 0.5\n[kernel]\n", 3),
])
def test_syntax_errors_report_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "x.ini")
    assert info.value.line == line
    assert str(info.value).startswith(f"x.ini:{line}: ")


def test_unknown_section_and_key():
    c = parse_config(TEXT, "demo.ini")
    with pytest.raises(ConfigError, match=r"demo.ini:6: unknown section \[domain\]"):
        c.check_known({"kernel": {"s", "density"}})
    with pytest.raises(ConfigError, match=r"demo.ini:9: unknown key 'flag'"):
        c.check_known({"kernel": {"s", "density"}, "domain": {"nodes", "radii"}})
    c.check_known({"kernel": {"s", "density"}, "domain": {"nodes", "radii", "flag"}})


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")
    p = tmp_path / "ok.ini"
    p.write_text(TEXT)
    assert load_config(p).to_dict()["kernel"]["s"] == "0.25"
