import pytest
from hypothesis import given
from hypothesis import strategies as st

from stekit import ste
from stekit.planner import CSV_COLUMNS, ladder_table, plan, to_csv
from stekit.specstr import parse_stack


def test_three_halvings_with_patches():
    pl = plan(32, 4, 1152, parse_stack("(2:1)-(2:1)-(2:1)"))
    assert [lp.t_out for lp in pl.layers] == [16, 8, 4]
    assert pl.final_frames == 4
    assert pl.tokens_in == 128 and pl.tokens_out == 16
    assert pl.compression_fraction == 0.875


def test_odd_length_pads_once():
    pl = plan(31, 1, 8, parse_stack("(2:1)"))
    (lp,) = pl.layers
    assert (lp.t_in, lp.k, lp.units, lp.t_out) == (31, 1, 16, 16)
    assert pl.reduction_fraction == pytest.approx(1 - 16 / 31)
    assert pl.compression_fraction == 0.5  # always measured at 32 frames


@pytest.mark.parametrize("text,frac", [
    ("(4:3)", 0.25), ("(4:3)-(4:3)", 0.4375), ("(2:1)", 0.5), ("(2:1)-(2:1)", 0.75),
    ("(2:1)-(2:1)-(2:1)", 0.875), ("(2:1)-(2:1)-(2:1)-(2:1)", 0.9375), ("(2:2)", 0.0),
])
def test_ladder_fractions(text, frac):
    assert plan(32, 1, 1152, parse_stack(text)).compression_fraction == frac


def test_csv_golden():
    text = ladder_table([parse_stack("(2:2)"), parse_stack("(2:1)-(2:1)")], 1152)
    assert text == ("spec,reduction_pct,final_frames,tokens_out,params\n"
                    "(2:2),0.00,32,32,2655360\n"
                    "(2:1)-(2:1),75.00,8,8,2655360\n")


def test_empty_table_is_header_only():
    assert ladder_table([], 1152) == ",".join(CSV_COLUMNS) + "\n"
    assert to_csv([]) == ladder_table([], 8)


def test_rejects_empty_video():
    with pytest.raises(ValueError):
        plan(0, 1, 8, parse_stack("(2:1)"))


@given(depth=st.integers(1, 5), ratio=st.sampled_from([(2, 1), (2, 2), (4, 3), (4, 1)]),
       exponent=st.integers(5, 8))
def test_divisible_length_follows_power_law(depth, ratio, exponent):
    a, b = ratio
    t = 4 ** exponent  # divisible by every a**depth used here
    pl = plan(t, 1, 8, parse_stack("-".join([f"({a}:{b})"] * depth)))
    assert pl.final_frames == t * b ** depth // a ** depth


@given(t=st.integers(1, 200), p=st.integers(1, 6),
       text=st.sampled_from(["(2:1)", "(4:3)-(2:1)", "(2:1)|(2:2)", "(2:1)@after"]))
def test_consistent_with_param_count_and_frames(t, p, text):
    stack = parse_stack(text)
    pl = plan(t, p, 8, stack, 12)
    assert pl.total_params == ste.param_count(stack, 8, 12).total
    assert [lp.params for lp in pl.layers] == ste.param_count(stack, 8, 12).per_layer
    assert pl.final_frames == stack.out_frames(t)
    assert pl.tokens_out == pl.final_frames * p
    for lp in pl.layers:
        assert (lp.t_in + lp.k) % (lp.units) == 0
