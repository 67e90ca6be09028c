import json

import pytest

from app.schemas import AtlasFile
from app.utils.cech_complex import AtlasSpec, build_based_lifting
from app.utils.errors import SpecError
from app.utils.kd_algebra import BasedChart
from app.utils.spec_loader import build_atlas, load_spec, parse_variables


def test_load_spec_dispatches_on_kind(specs_dir):
    chart = load_spec(specs_dir / "e2.json")
    assert isinstance(chart, BasedChart)
    assert chart.fiber_vars == ["x", "y"]
    atlas = load_spec(specs_dir / "atlas_linear3.json")
    assert isinstance(atlas, AtlasSpec)
    assert len(atlas.maps) == 3


def test_localized_chart_adjoins_a_variable(specs_dir):
    chart = load_spec(specs_dir / "e1_punctured.json")
    assert len(chart.fiber_vars) == 2
    assert len(chart.f) == 2


def test_error_carries_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(
        json.dumps({"label": "bad", "fiber_vars": ["x"], "base_vars": ["t"], "phi": ["x^2"], "f": ["t - y"]}),
        encoding="utf-8",
    )
    with pytest.raises(SpecError) as info:
        load_spec(bad)
    assert info.value.line == 1


def test_parse_variables():
    assert parse_variables("x, y") == ["x", "y"]
    with pytest.raises(SpecError):
        parse_variables(" , ")


def test_atlas_rings_follow_the_monomial_order(specs_dir):
    source = AtlasFile.model_validate(json.loads((specs_dir / "atlas_line2.json").read_text(encoding="utf-8")))
    atlas = build_atlas(source, order="lex")
    assert str(atlas.model_ring.order) == "lex"
    lifting = build_based_lifting(atlas)
    assert str(lifting.ctx((0, 1)).ring.order) == "lex"
    assert str(lifting.ctx((0,)).ring.order) == "lex"
