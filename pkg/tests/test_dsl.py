import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from egren.dsl import DSLSyntaxError, compile_expr, coordinate_symbols, parse_kernel_dsl

x1, x2 = coordinate_symbols(2)


def test_power_law_node():
    e = parse_kernel_dsl("pow(abs(x1), -0.5)")
    assert sp.simplify(e - sp.Abs(x1) ** sp.Rational(-1, 2)) == 0


def test_two_variable_log():
    e = parse_kernel_dsl("log(abs(x1 - x2))")
    assert e.free_symbols == {x1, x2}


def test_unterminated_call_reports_position():
    with pytest.raises(DSLSyntaxError) as info:
        parse_kernel_dsl("pow(x1,")
    assert info.value.line == 1
    assert info.value.column == 8


def test_multiline_position():
    with pytest.raises(DSLSyntaxError) as info:
        parse_kernel_dsl("x1 +\n  * x2")
    assert info.value.line == 2


@pytest.mark.parametrize("text", ["", "   ", "x1 +", "foo(x1)", "pow(x1)", "x1 $ 2", "(x1"])
def test_malformed_inputs(text):
    with pytest.raises(DSLSyntaxError):
        parse_kernel_dsl(text)


def test_dimension_check():
    with pytest.raises(DSLSyntaxError):
        parse_kernel_dsl("x3", dim=2)


def test_decimal_literals_stay_exact():
    assert parse_kernel_dsl("pow(x1, 0.1)").exp == sp.Rational(1, 10)


def test_symbolic_derivative():
    e = parse_kernel_dsl("log(x1^2 + x2^2)")
    assert sp.simplify(sp.diff(e, x1) - 2 * x1 / (x1**2 + x2**2)) == 0


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(1, 4))
def test_compiled_matches_sympy(a, b, k):
    text = f"cos(x1) * x2^{k} + exp(-x1^2)"
    e = parse_kernel_dsl(text, 2)
    f = compile_expr(e, 2)
    got = f(np.array([[a], [b]]))[0]
    ref = float(e.subs({x1: a, x2: b}))
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-12)
