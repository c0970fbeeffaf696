import json
import re
from collections import Counter
from fractions import Fraction as F
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from hensym.cli import main
from hensym.core import COLD, HOT, HensInstance, IntervalProblem, Stream, TemperatureInterval, Utility, \
    ValidationError
from hensym.io import ParseError, emit_instance, format_number, load_instance, parse_instance
from hensym.pipeline import JSON, TEXT, RunConfig, render, run_pipeline

DATA = Path(__file__).resolve().parent.parent / "data"

PAIR = """
name = "pair"
[[stream]]
id = "H1"
kind = "hot"
fcp = 1
[[stream]]
id = "H2"
kind = "hot"
fcp = 1
[[stream]]
id = "C1"
kind = "cold"
fcp = 1
[[interval]]
index = 1
delta_t = 100
hot = { H1 = 100, H2 = 100 }
cold = { C1 = 100 }
"""


class TestParse:
    def test_table2(self):
        inst = load_instance(DATA / "table2.toml")
        assert len(inst.hot_streams) == 5 and len(inst.cold_streams) == 5
        assert len(inst.hot_utilities) == 2 and len(inst.cold_utilities) == 1

    def test_empty(self):
        with pytest.raises(ParseError):
            parse_instance("   \n")

    def test_hot_direction(self):
        with pytest.raises(ValidationError):
            parse_instance('[[stream]]\nid = "H1"\nkind = "hot"\nfcp = 1\nt_in = 300\nt_out = 400\n')

    def test_decimal_is_exact(self):
        inst = parse_instance('[[stream]]\nid = "H1"\nkind = "hot"\nfcp = 0.1\nt_in = 400\nt_out = "1001/3"\n')
        assert inst.streams[0].fcp == F(1, 10) and inst.streams[0].t_out == F(1001, 3)

    def test_unknown_field_located(self):
        with pytest.raises(ParseError) as e:
            parse_instance('name = "x"\n\n[[stream]]\nid = "H1"\nkind = "hot"\nfcpp = 1\n')
        assert e.value.line == 6 and e.value.field == "stream[0].fcpp"

    def test_missing_field(self):
        with pytest.raises(ParseError) as e:
            parse_instance('[[stream]]\nid = "H1"\nkind = "hot"\n')
        assert e.value.field == "stream[0].fcp"

    def test_bad_number(self):
        with pytest.raises(ParseError):
            parse_instance('[[stream]]\nid = "H1"\nkind = "hot"\nfcp = "abc"\n')

    def test_infinite_float(self):
        with pytest.raises(ParseError):
            parse_instance('[[stream]]\nid = "H1"\nkind = "hot"\nfcp = inf\n')

    def test_bad_toml(self):
        with pytest.raises(ParseError) as e:
            parse_instance('name = "x"\n[[stream]\n')
        assert e.value.line == 2

    def test_format_number(self):
        assert format_number(3) == "3" and format_number(F(7, 2)) == '"7/2"'


frac = st.fractions(min_value=0, max_value=500, max_denominator=12)


@st.composite
def instances(draw):
    n = draw(st.integers(1, 4))
    streams = []
    for k in range(n):
        kind = draw(st.sampled_from([HOT, COLD]))
        a = draw(st.fractions(min_value=0, max_value=400, max_denominator=4))
        b = a + draw(st.fractions(min_value=F(1, 4), max_value=100, max_denominator=4))
        streams.append(Stream(f"S{k}", kind, draw(frac), b if kind == HOT else a, a if kind == HOT else b))
    utils = [Utility("HU", HOT, draw(st.none() | frac), draw(st.none() | frac), draw(frac)),
             Utility("CU w", COLD, None, None)]
    explicit = None
    if draw(st.booleans()):
        hot = {s.id: draw(frac) for s in streams if s.kind == HOT}
        cold = {s.id: draw(frac) for s in streams if s.kind == COLD}
        fcp = {s.id: s.fcp for s in streams}
        explicit = [IntervalProblem(TemperatureInterval(1, None, None, draw(st.none() | st.just(F(5)))), hot, cold,
                                    fcp=fcp)]
    return HensInstance(draw(st.text("ab\"\\ c", max_size=5)), streams, utils, draw(frac), explicit)


@settings(max_examples=80, deadline=None)
@given(instances())
def test_round_trip(inst):
    text = emit_instance(inst)
    again = parse_instance(text)
    assert again == inst
    assert emit_instance(again) == text


def _numbers(text):
    text = re.sub(r"(?m)^(\s*)\[\d+\]:", r"\1", text)   # list positions exist only in the text layout
    return Counter(re.findall(r"-?\d+(?:/\d+)?(?:\.\d+)?", text))


def test_text_and_json_agree():
    report = run_pipeline(parse_instance(PAIR), RunConfig(sbc=True))
    text, js = render(report, TEXT), render(report, JSON)
    assert _numbers(text) == _numbers(js)
    assert json.loads(js)["models"][0]["enumerate"]["count"] == 2


def test_pipeline_examples():
    report = run_pipeline(parse_instance(PAIR), RunConfig(sbc=True))
    m = report["models"][0]
    assert m["solve"]["objective"] == 1 and m["enumerate"]["count"] == 2
    assert m["symmetry"]["by_load"]["order"] == 2 and m["symmetry"]["closed"]
    assert m["sbc"]["survivors"] == 1


def test_pipeline_balanced_one_by_one():
    inst = HensInstance("one", [Stream("H1", HOT, 1, 200, 100), Stream("C1", COLD, 1, 90, 190)],
                        [Utility("HU", HOT, 500), Utility("CU", COLD, 0)], 10)
    report = run_pipeline(inst, RunConfig())
    assert report["lp"]["duties"] == {"HU": "0", "CU": "0"}
    m = report["models"][0]
    assert m["solve"]["objective"] == 1 and m["symmetry"]["by_load"]["order"] == 1 and m["symmetry"]["closed"]


def test_deterministic():
    inst = load_instance(DATA / "table2_subnetwork3.toml")
    strip = re.compile(r'"(seconds|elapsed)[^"]*": "[^"]*"')
    a = strip.sub("", render(run_pipeline(inst, RunConfig(seed=5)), JSON))
    b = strip.sub("", render(run_pipeline(inst, RunConfig(seed=5)), JSON))
    assert a == b


class TestCli:
    def write(self, tmp_path, text, name="x.toml"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    def test_solve(self, tmp_path, capsys):
        assert main(["solve", self.write(tmp_path, PAIR), "--format", "json"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["models"][0]["solve"]["objective"] == 1

    def test_enumerate_to_file(self, tmp_path):
        dest = tmp_path / "r.txt"
        assert main(["enumerate", self.write(tmp_path, PAIR), "-o", str(dest)]) == 0
        assert "count: 2" in dest.read_text()

    def test_symmetry_and_pipeline(self, tmp_path, capsys):
        path = self.write(tmp_path, PAIR)
        assert main(["symmetry", path]) == 0
        assert main(["pipeline", path, "--format", "json"]) == 0

    def test_count(self, capsys):
        assert main(["count-configs", "3", "3", "--brute"]) == 0
        assert capsys.readouterr().out.split() == ["count:", "27", "brute_force:", "27"]

    def test_count_error(self):
        assert main(["count-configs", "0", "2"]) == 3

    def test_parse_error(self, tmp_path):
        assert main(["solve", self.write(tmp_path, "")]) == 3

    def test_validation_error(self, tmp_path):
        assert main(["solve", self.write(tmp_path, '[[stream]]\nid="H"\nkind="hot"\nfcp=1\nt_in=1\nt_out=2\n')]) == 3

    def test_infeasible(self, tmp_path):
        text = PAIR.replace("cold = { C1 = 100 }", "cold = { C1 = 300 }")
        assert main(["solve", self.write(tmp_path, text), "--slack", "none"]) == 2

    def test_limit(self, tmp_path):
        streams = "".join(f'[[stream]]\nid = "{k}"\nkind = "{kind}"\nfcp = 1\n'
                          for k, kind in (("H1", "hot"), ("H2", "hot"), ("H3", "hot"), ("H4", "hot"),
                                          ("C1", "cold"), ("C2", "cold")))
        text = streams + ('[[interval]]\nindex = 1\nhot = { H1 = 7, H2 = "9/2", H3 = "7/2", H4 = 4 }\n'
                          'cold = { C1 = 10, C2 = 9 }\n')
        assert main(["enumerate", self.write(tmp_path, text), "--node-limit", "3"]) == 4

    def test_dump_lp(self, tmp_path):
        out = tmp_path / "lp"
        assert main(["solve", self.write(tmp_path, PAIR), "--dump-lp", str(out)]) == 0
        assert (out / "interval1.lp").read_text().startswith("LP ")
