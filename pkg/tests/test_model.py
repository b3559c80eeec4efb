import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergmbayes.graph import Graph
from ergmbayes.model import (FormulaError, ModelSpec, SpecError, Term,
                             format_formula, parse_formula, validate)

from testutil import random_graph

LAW_FORMULA = ('edges + nodematch("Office") + nodematch("Practice") '
               '+ gwesp(0.5, fixed = TRUE)')

SCHOOL_FORMULA = (
    'edges + mutual + absdiff("grade") + nodefactor("race") + '
    'nodefactor("grade") + nodefactor("sex") + '
    'nodematch("race", diff = TRUE, levels = c("B","O","W")) + '
    'nodematch("grade", diff = TRUE) + nodematch("sex", diff = FALSE) + '
    'idegree(0:1) + odegree(0:1) + gwesp(0.1, fixed = TRUE)')


def law_graph() -> Graph:
    g = Graph.empty(36, directed=False)
    rng = np.random.default_rng(0)
    g.attributes = {
        "Office": np.repeat([1.0, 2.0, 3.0], [16, 12, 8]),
        "Practice": rng.integers(1, 3, 36).astype(np.float64),
    }
    return g


def school_graph() -> Graph:
    g = Graph.empty(248, directed=True)
    rng = np.random.default_rng(1)
    g.attributes = {
        "grade": rng.integers(7, 13, 248).astype(np.float64),
        "race": np.array(rng.choice(["B", "H", "O", "W"], 248), dtype=object),
        "sex": rng.integers(1, 3, 248).astype(np.float64),
    }
    return g


class TestParse:
    def test_law_formula_four_terms(self):
        spec = parse_formula(LAW_FORMULA)
        assert [t.kind for t in spec.terms] == ["edges", "nodematch",
                                                "nodematch", "gwesp"]
        assert validate(spec, law_graph()).d == 4

    def test_degree_ranges_expand(self):
        spec = parse_formula("edges + mutual + idegree(0:1) + odegree(0:1)")
        g = school_graph()
        assert validate(spec, g).d == 6

    def test_single_edges_rejected(self):
        with pytest.raises(FormulaError, match="dimension 1 < 2"):
            parse_formula("edges")

    def test_lhs_prefix_ignored(self):
        spec = parse_formula("net ~ edges + mutual")
        assert [t.kind for t in spec.terms] == ["edges", "mutual"]

    def test_unknown_term(self):
        with pytest.raises(FormulaError, match="unknown term 'triangles'"):
            parse_formula("edges + triangles")

    def test_unknown_argument_key(self):
        with pytest.raises(FormulaError, match="unknown argument 'decay'"):
            parse_formula('edges + nodematch("x", decay = 1)')

    def test_syntax_error_has_position(self):
        with pytest.raises(FormulaError, match="position"):
            parse_formula("edges + + mutual")

    def test_gwesp_requires_fixed(self):
        with pytest.raises(FormulaError, match="fixed = TRUE"):
            parse_formula("edges + gwesp(0.5)")
        with pytest.raises(FormulaError, match="fixed = TRUE"):
            parse_formula("edges + gwesp(0.5, fixed = FALSE)")

    def test_degree_vector_argument(self):
        spec = parse_formula("edges + degree(c(0, 2, 5))")
        assert spec.terms[1].degrees == (0, 2, 5)

    def test_offset_wrapping(self):
        spec = parse_formula("edges + offset(mutual)")
        assert spec.terms[1].offset and spec.terms[1].kind == "mutual"


class TestValidate:
    def test_school_model_dimension_27(self):
        spec = validate(parse_formula(SCHOOL_FORMULA), school_graph())
        assert spec.d == 27
        expected = (["edges", "mutual", "absdiff.grade"]
                    + [f"nodefactor.race.{v}" for v in ("H", "O", "W")]
                    + [f"nodefactor.grade.{v}" for v in ("8", "9", "10", "11", "12")]
                    + ["nodefactor.sex.2"]
                    + [f"nodematch.race.{v}" for v in ("B", "O", "W")]
                    + [f"nodematch.grade.{v}" for v in ("7", "8", "9", "10", "11", "12")]
                    + ["nodematch.sex", "idegree0", "idegree1", "odegree0",
                       "odegree1", "gwesp.fixed.0.1"])
        assert spec.coord_names == expected

    def test_school_model_without_mutual_gwesp_is_25(self):
        text = SCHOOL_FORMULA.replace("edges + mutual", "edges").replace(
            " + gwesp(0.1, fixed = TRUE)", "")
        assert validate(parse_formula(text), school_graph()).d == 25

    def test_mutual_needs_directed(self):
        with pytest.raises(SpecError, match="directed"):
            validate(parse_formula("edges + mutual"), law_graph())

    def test_degree_needs_undirected(self):
        with pytest.raises(SpecError, match="undirected"):
            validate(parse_formula("edges + degree(0:1)"), school_graph())

    def test_missing_attribute(self):
        with pytest.raises(SpecError, match="'Gender'"):
            validate(parse_formula('edges + nodematch("Gender")'), law_graph())

    def test_absdiff_needs_numeric(self):
        with pytest.raises(SpecError, match="numeric"):
            validate(parse_formula('edges + absdiff("race")'), school_graph())

    def test_unobserved_level_rejected(self):
        with pytest.raises(SpecError, match="not observed"):
            validate(parse_formula(
                'edges + nodematch("race", diff = TRUE, levels = c("Z"))'),
                school_graph())

    def test_nodefactor_drops_first_sorted_level(self):
        g = school_graph()
        spec = validate(parse_formula('edges + nodefactor("race")'), g)
        assert spec.coord_names == ["edges", "nodefactor.race.H",
                                    "nodefactor.race.O", "nodefactor.race.W"]

    def test_numeric_levels_sort_numerically(self):
        g = school_graph()
        spec = validate(parse_formula('edges + nodefactor("grade")'), g)
        # baseline grade 7 dropped, not the lexically-smallest "10"
        assert spec.coord_names[1] == "nodefactor.grade.8"

    def test_offset_coefficients_required_and_finite(self):
        g = school_graph()
        spec = parse_formula("edges + offset(mutual)")
        with pytest.raises(SpecError, match="offset"):
            validate(spec, g)
        with pytest.raises(SpecError, match="finite"):
            validate(spec, g, offset_coef=[np.inf])
        v = validate(spec, g, offset_coef=[-100.0])
        assert v.offset_values.tolist() == [-100.0]
        with pytest.raises(SpecError, match="offset"):
            validate(spec, g, offset_coef=[1.0, 2.0])

    def test_full_theta_embedding(self):
        g = school_graph()
        spec = validate(parse_formula("edges + offset(mutual) + idegree(0:1)"),
                        g, offset_coef=[-100.0])
        full = spec.full_theta(np.array([1.0, 2.0, 3.0]))
        assert full.tolist() == [1.0, -100.0, 2.0, 3.0]

    def test_programmatic_single_term_allowed(self):
        # estimation requires d >= 2 but lower layers accept d = 1 specs
        spec = validate(ModelSpec([Term("edges")]), law_graph())
        assert spec.d == 1


class TestRoundTrip:
    CASES = [
        LAW_FORMULA,
        SCHOOL_FORMULA,
        "edges + offset(mutual) + idegree(0:1)",
        "edges + degree(c(0, 2, 5)) + absdiff(\"Practice\")",
    ]

    @pytest.mark.parametrize("text", CASES)
    def test_parse_print_parse_idempotent(self, text):
        spec1 = parse_formula(text)
        printed = format_formula(spec1)
        spec2 = parse_formula(printed)
        assert spec1.terms == spec2.terms
        assert format_formula(spec2) == printed

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_random_formulas_round_trip(self, data):
        terms = []
        n_terms = data.draw(st.integers(2, 5))
        for _ in range(n_terms):
            kind = data.draw(st.sampled_from(
                ["edges", "mutual", "nodematch", "nodefactor", "absdiff",
                 "gwesp", "idegree", "degree"]))
            if kind in ("edges", "mutual"):
                terms.append(kind)
            elif kind == "gwesp":
                decay = data.draw(st.floats(0, 3, allow_nan=False))
                terms.append(f"gwesp({decay!r}, fixed = TRUE)")
            elif kind in ("idegree", "degree"):
                lo = data.draw(st.integers(0, 3))
                hi = data.draw(st.integers(lo, lo + 3))
                terms.append(f"{kind}({lo}:{hi})")
            elif kind == "absdiff":
                terms.append('absdiff("score")')
            else:
                diff = data.draw(st.booleans())
                extra = ", diff = TRUE" if (diff and kind == "nodematch") else ""
                terms.append(f'{kind}("color"{extra})')
        text = " + ".join(terms)
        spec1 = parse_formula(text)
        spec2 = parse_formula(format_formula(spec1))
        assert spec1.terms == spec2.terms


class TestCoordinateOrder:
    def test_order_is_term_then_sorted_level(self):
        rng = np.random.default_rng(5)
        g = random_graph(rng, 8, directed=False)
        spec = validate(parse_formula(
            'edges + nodematch("color", diff = TRUE) + degree(1:2)'), g)
        assert spec.coord_names == ["edges", "nodematch.color.b",
                                    "nodematch.color.g", "nodematch.color.r",
                                    "degree1", "degree2"]
