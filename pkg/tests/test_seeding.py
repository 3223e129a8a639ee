from fractions import Fraction

from hypothesis import given, strategies as st

from winhalt.seeding import MASK64, derive_seed, draw, history_path, make_rng, splitmix64

u64 = st.integers(min_value=0, max_value=MASK64)


def test_splitmix64_reference_stream():
    # the first two outputs of the reference SplitMix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


@given(u64, st.lists(u64, max_size=4))
def test_derive_seed_is_u64_and_pure(master, path):
    s = derive_seed(master, *path)
    assert 0 <= s <= MASK64
    assert s == derive_seed(master, *path)


def test_derive_seed_order_and_length_matter():
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert derive_seed(1, 0) != derive_seed(1)
    assert derive_seed(1, 0) != derive_seed(1, 0, 0)


def test_history_path_is_length_prefixed():
    assert history_path(()) == [0]
    assert history_path(((1, 2), (3, 4))) == [4, 1, 2, 3, 4]
    assert history_path(((0, 0),)) != history_path(())


def test_draw_uses_deficit_and_is_reproducible():
    entries = [(0, Fraction(1, 3)), (1, Fraction(1, 6))]
    a = [draw(make_rng(7), entries) for _ in range(3)]
    assert a == [draw(make_rng(7), entries) for _ in range(3)]
    rng = make_rng(11)
    seen = [draw(rng, entries) for _ in range(6000)]
    assert abs(seen.count(None) / 6000 - 0.5) < 0.03
    assert abs(seen.count(0) / 6000 - 1 / 3) < 0.03


def test_draw_point_mass():
    assert draw(make_rng(0), [("x", Fraction(1))]) == "x"
    assert draw(make_rng(0), []) is None
