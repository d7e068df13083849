import pytest

from app.config import env_threads, load_config, parse_config, parse_rows
from utils.cavity_solver import StressFree, WithContent
from utils.errors import ConfigError

REFERENCE = """
[energy]
dimension = 3
g.family = quadratic
g.coefficients = 1
h.family = log_entropy
h.coefficients = 1
"""


def test_minimal_config_gets_defaults():
    cfg = parse_config(REFERENCE)
    E = cfg.energy.build()
    assert E.d == 3
    assert E.H == pytest.approx(1.0, abs=1e-12)
    assert isinstance(cfg.boundary.build(), StressFree)
    tol = cfg.solver.tolerances()
    assert tol.rel_tol == 1e-10
    assert tol.s0_factor == 1e-3
    assert tol.gap_switch == 1e-2
    assert cfg.sweep.count == 20
    assert cfg.output.svg is True


def test_inline_comments_are_ignored():
    cfg = parse_config(REFERENCE + "\n[solver]\ngap_switch = 0.05   # enter the layer earlier\n")
    assert cfg.solver.tolerances().gap_switch == 0.05


def test_sweep_grids():
    cfg = parse_config(REFERENCE + "\n[sweep]\nphi0_min = 0.1\nphi0_max = 1\ncount = 4\nspacing = log\n")
    grid = cfg.sweep.grid()
    assert grid[0] == pytest.approx(0.1)
    assert grid[-1] == pytest.approx(1.0)
    assert grid[1] / grid[0] == pytest.approx(grid[2] / grid[1])
    single = parse_config(REFERENCE + "\n[sweep]\nphi0_min = 0.3\nphi0_max = 0.3\ncount = 1\n")
    assert single.sweep.grid() == [0.3]


def test_boundary_with_content():
    text = REFERENCE + "\n[boundary]\nkind = with_content\ncontent.form = affine\ncontent.c0 = 0.5\ncontent.c1 = 0.25\n"
    boundary = parse_config(text).boundary.build()
    assert isinstance(boundary, WithContent)
    assert boundary.content(0.0) == 0.5
    assert boundary.content(2.0) == 1.0


@pytest.mark.parametrize("c0", ["0", "-0.5"])
def test_constant_content_must_be_positive(c0):
    text = REFERENCE + f"\n[boundary]\nkind = with_content\ncontent.form = constant\ncontent.c0 = {c0}\n"
    with pytest.raises(ConfigError, match="content.c0 > 0"):
        parse_config(text)


def test_affine_content_may_start_at_zero():
    text = REFERENCE + "\n[boundary]\nkind = with_content\ncontent.form = affine\ncontent.c0 = 0\ncontent.c1 = 1\n"
    boundary = parse_config(text).boundary.build()
    assert boundary.content(0.5) == 0.5


def test_custom_rows():
    rows = parse_rows("custom", "quadratic: 1 ; power: 0.2, 1.5, 1")
    assert rows == [
        {"kind": "quadratic", "coefficient": 1.0},
        {"kind": "power", "coefficient": 0.2, "exponent": 1.5, "shift": 1.0},
    ]
    assert parse_rows("inverse_power_sum", "1, 1, 1") == [
        {"kind": "inverse_power", "coefficient": 1.0, "exponent": 1.0, "shift": 1.0}
    ]


@pytest.mark.parametrize(
    "family, text, message",
    [
        ("cubic", "1", "unknown family"),
        ("custom", "1, 2", "needs the form"),
        ("custom", "cubic: 1", "unknown term kind"),
        ("power_sum", "1, x", "non-numeric"),
        ("quadratic", "1, 2", "takes 1 to 1"),
    ],
)
def test_bad_rows(family, text, message):
    with pytest.raises(ConfigError, match=message):
        parse_rows(family, text)


def test_empty_coefficients_are_rejected():
    text = REFERENCE.replace("g.coefficients = 1", "g.coefficients =")
    with pytest.raises(ConfigError, match="empty"):
        parse_config(text)


def test_family_constraints_surface_as_config_errors():
    text = REFERENCE.replace("g.family = quadratic\ng.coefficients = 1", "g.family = power_sum\ng.coefficients = 1, 3")
    cfg = parse_config(text)
    with pytest.raises(ConfigError, match="exponent"):
        cfg.energy.build()


@pytest.mark.parametrize(
    "text, message",
    [
        ("[solver]\nrel_tol = 1e-8\n", "missing \\[energy\\]"),
        (REFERENCE + "\n[solver]\nrel_tol = -1\n", "rel_tol"),
        (REFERENCE.replace("dimension = 3", "dimension = 1"), "dimension"),
        (REFERENCE.replace("h.family = log_entropy\n", ""), "h.family"),
        (REFERENCE + "\n[sweep]\nphi0_min = 2\nphi0_max = 1\n", "exceeds"),
        ("not an ini file", "File contains no section headers"),
    ],
)
def test_invalid_configs(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="no configuration file"):
        load_config(None)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.ini")
    path = tmp_path / "run.ini"
    path.write_text(REFERENCE, encoding="utf-8")
    assert load_config(path).energy.dimension == 3


def test_env_threads(monkeypatch):
    monkeypatch.delenv("CAVITATION_THREADS", raising=False)
    assert env_threads(3) == 3
    monkeypatch.setenv("CAVITATION_THREADS", "0")
    assert env_threads() == 1
    monkeypatch.setenv("CAVITATION_THREADS", "many")
    with pytest.raises(ConfigError):
        env_threads()
