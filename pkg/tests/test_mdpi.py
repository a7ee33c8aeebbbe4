"""Design-problem interfaces: evaluate/h/h', composition laws."""

import numpy as np
import pytest

from avcodesign.mdpi import (
    AdderMdpi,
    Front,
    MdpiError,
    Mdpi,
    TableMdpi,
    check_h_antitone,
    identity_mdpi,
    parallel,
    series,
)
from avcodesign.order import Antichain, Product, Reals, pareto_min

R = Reals()
R1 = Product(components=(("r", R),))


def scalar_mdpi(rows):
    """Rows of (label, provide_scalar, require_scalar) over bare reals."""
    return TableMdpi(functionality=R, resource=R, rows=tuple(rows))


ABC = scalar_mdpi([("a", 1.0, 3.0), ("b", 2.0, 5.0), ("c", 1.0, 4.0)])


class TestEvaluate:
    def test_filtering(self):
        assert ABC.evaluate(1.0, 4.0) == ["a", "c"]
        assert ABC.evaluate(2.0, 5.0) == ["b"]
        assert ABC.evaluate(2.0, 4.0) == []

    def test_monotone_in_budget(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            f = float(rng.integers(0, 3))
            r1 = float(rng.integers(0, 7))
            r2 = r1 + float(rng.integers(0, 3))
            assert set(ABC.evaluate(f, r1)) <= set(ABC.evaluate(f, r2))

    def test_antitone_in_functionality(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            f1 = float(rng.integers(0, 3))
            f2 = f1 + float(rng.integers(0, 2))
            r = float(rng.integers(0, 7))
            assert set(ABC.evaluate(f2, r)) <= set(ABC.evaluate(f1, r))


class TestH:
    def test_small_table(self):
        assert ABC.h(1.0).points == (3.0,)
        assert ABC.h(2.0).points == (5.0,)

    def test_annotations_merge_equal_resources(self):
        d = scalar_mdpi([("a", 1.0, 3.0), ("a2", 1.0, 3.0), ("b", 2.0, 5.0)])
        front = d.h(1.0)
        assert front.points == (3.0,)
        assert front.labels == (("a", "a2"),)

    def test_infeasible_is_empty(self):
        assert len(ABC.h(99.0)) == 0

    def test_h_prime(self):
        d = scalar_mdpi([("a", 1.0, 3.0), ("b", 2.0, 5.0)])
        assert d.h_prime(4.0).points == (1.0,)
        assert d.h_prime(5.0).points == (2.0,)
        assert len(d.h_prime(0.0)) == 0

    def test_h_antitone_random_tables(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            rows = [(f"i{k}",
                     tuple(rng.integers(0, 4, 2).astype(float)),
                     tuple(rng.integers(0, 4, 2).astype(float)))
                    for k in range(12)]
            fun = Product(components=(("f1", R), ("f2", R)))
            res = Product(components=(("r1", R), ("r2", R)))
            d = TableMdpi(functionality=fun, resource=res, rows=tuple(rows))
            pairs = []
            for _ in range(25):
                lo = rng.integers(0, 4, 2).astype(float)
                hi = lo + rng.integers(0, 2, 2).astype(float)
                pairs.append((tuple(lo), tuple(hi)))
            assert check_h_antitone(d, pairs) == []

    def test_duplicate_labels_rejected(self):
        with pytest.raises(MdpiError):
            scalar_mdpi([("a", 1.0, 3.0), ("a", 2.0, 5.0)])


class TestSeries:
    def test_composite_table(self):
        d1 = scalar_mdpi([("x", 1.0, 2.0), ("y", 2.0, 4.0)])
        d2 = scalar_mdpi([("u", 2.0, 10.0), ("v", 4.0, 20.0)])
        comp = series(d1, d2)
        assert set(comp.labels()) == {("x", "u"), ("x", "v"), ("y", "v")}
        assert comp.h(1.0).points == (10.0,)
        assert comp.h(2.0).points == (20.0,)

    def test_poset_mismatch(self):
        d1 = scalar_mdpi([("x", 1.0, 2.0)])
        d2 = TableMdpi(functionality=R1, resource=R1, rows=((("u"), (2.0,), (1.0,)),))
        with pytest.raises(MdpiError):
            series(d1, d2)

    def test_h_factorizes_through_h_maps(self):
        # h of the composite equals min over r1 in h1(f) of h2(r1)
        rng = np.random.default_rng(21)
        for _ in range(20):
            d1 = scalar_mdpi([(f"a{k}", float(rng.integers(0, 4)), float(rng.integers(0, 6)))
                              for k in range(8)])
            d2 = scalar_mdpi([(f"b{k}", float(rng.integers(0, 6)), float(rng.integers(0, 6)))
                              for k in range(8)])
            comp = series(d1, d2)
            for f in [0.0, 1.0, 2.0, 3.0]:
                via_tables = sorted(comp.h(f).points)
                pool = [r2 for r1 in d1.h(f).points for r2 in d2.h(r1).points]
                via_maps, _ = pareto_min(pool, R)
                assert via_tables == sorted(via_maps)

    def test_identity_leaves_h_unchanged(self):
        d = scalar_mdpi([("a", 1.0, 3.0), ("b", 2.0, 5.0), ("c", 1.0, 4.0)])
        ident = identity_mdpi(R, grid=[0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
        comp = series(d, ident)
        for f in [0.0, 1.0, 2.0]:
            assert sorted(comp.h(f).points) == sorted(d.h(f).points)


class TestParallel:
    def test_sizes_and_pairing(self):
        d1 = scalar_mdpi([("x", 1.0, 2.0), ("y", 2.0, 4.0)])
        d2 = scalar_mdpi([("u", 1.0, 1.0)])
        par = parallel(d1, d2)
        assert len(par.labels()) == 2
        front = par.h((1.0, 1.0))
        assert front.points == ((2.0, 1.0),)

    def test_h_is_product_of_fronts(self):
        rng = np.random.default_rng(31)
        d1 = scalar_mdpi([(f"a{k}", float(rng.integers(0, 3)), float(rng.integers(0, 5)))
                          for k in range(6)])
        d2 = scalar_mdpi([(f"b{k}", float(rng.integers(0, 3)), float(rng.integers(0, 5)))
                          for k in range(6)])
        par = parallel(d1, d2)
        for f1 in [0.0, 1.0, 2.0]:
            for f2 in [0.0, 1.0, 2.0]:
                got = sorted(par.h((f1, f2)).points)
                want = sorted((a, b) for a in d1.h(f1).points for b in d2.h(f2).points)
                assert got == want


class TestAdder:
    def test_sum(self):
        add = AdderMdpi(port_names=("sensor", "computer"))
        front = add.h((39000.0, 15000.0))
        assert front.points == ((54000.0,),)
        assert front.labels == (("sum",),)

    def test_identity_passthrough(self):
        ident = AdderMdpi(port_names=("v",))
        assert ident.h((7.25,)).points == ((7.25,),)

    def test_adder_over_antichain_inputs_is_minkowski(self):
        # Feeding every pair from two 3-point fronts through the adder and
        # Pareto-filtering matches brute-force pairwise sums.
        add = AdderMdpi(port_names=("a", "b"))
        left = [1.0, 2.0, 4.0]
        right = [10.0, 11.0, 13.0]
        sums = [add.respond((a, b))[0][0] for a in left for b in right]
        mins, _ = pareto_min(sums, R)
        assert mins == [min(left) + min(right)]

    def test_no_label_enumeration(self):
        add = AdderMdpi(port_names=("a",))
        with pytest.raises(MdpiError):
            add.labels()

    def test_monotone(self):
        add = AdderMdpi(port_names=("a", "b"))
        assert check_h_antitone(add, [((1.0, 2.0), (3.0, 2.0)), ((0.0, 0.0), (1.0, 1.0))]) == []
