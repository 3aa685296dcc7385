from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from discrete_ainfty.calculus import d_operator, del_operator, wedge_operator
from discrete_ainfty.chains import (BlockLeakError, Chain, GradedOperator, GradeError, block,
                                    enumerate_basis, exact_matmul, tuple_space)
from discrete_ainfty.locality import laplacian_local


def test_chain_arithmetic():
    a = Chain.basis((1,), (1, 2))
    b = Chain(2, {((1,), (1, 2)): Fraction(-1), ((2,), ()): Fraction(1, 3)})
    s = a + b
    assert s.terms == {((2,), ()): Fraction(1, 3)}
    assert (a - a).is_zero()
    assert a.scale(Fraction(1, 2)).coefficient((1,), (1, 2)) == Fraction(1, 2)
    with pytest.raises(GradeError):
        a + Chain.basis((1,))


def test_basis_counts(disc):
    assert len(enumerate_basis(disc, 2)) == 64
    assert len(enumerate_basis(disc, 1)) == 8
    assert enumerate_basis(disc, 2, (1, 2), (2,)) == [((1,), (1, 2)), ((1, 2), (1,))]


def test_basis_order_is_kron_order(disc):
    space = tuple_space(disc, 3)
    for i in (0, 17, 300, 511):
        assert space.encode(space.decode(i)) == i


def test_basis_filter_envelope(star):
    got = enumerate_basis(star, 2, (1, 2))
    assert got and all(set().union(*map(set, t)) == {1, 2} for t in got)


def test_compose_and_transpose(disc):
    d, dl = d_operator(disc), del_operator(disc)
    assert (d @ d).is_zero()
    assert (dl @ dl).is_zero()
    assert d.transpose().equals(dl)
    assert (d @ dl + dl @ d).equals(GradedOperator.identity(disc, 1).scale(3))


def test_grade_mismatch(disc):
    with pytest.raises(GradeError):
        wedge_operator(disc) @ d_operator(disc)
    with pytest.raises(GradeError):
        d_operator(disc) + wedge_operator(disc)


def test_apply(disc):
    d = d_operator(disc)
    x = Chain(1, {((1,),): 2, ((2,),): 1})
    y = d.apply(x)
    assert y.terms == {((1, 2),): -1, ((1, 3),): -2, ((2, 3),): -1}
    with pytest.raises(GradeError):
        d.apply(Chain.basis((1,), (2,)))
    assert d.apply(Chain.zero(1)).is_zero()


def test_overflow_guard():
    big = sp.csr_matrix(np.array([[2**40]], dtype=np.int64))
    with pytest.raises(OverflowError):
        exact_matmul(big, big)


def test_block_extraction(disc):
    basis, mat = block(laplacian_local(disc, 2), (1, 2), {2})
    assert basis == [((1,), (1, 2)), ((1, 2), (1,))]
    assert mat == [[3, -1], [-1, 3]]


def test_block_leak(disc):
    with pytest.raises(BlockLeakError):
        from discrete_ainfty.locality import lifted_d
        block(lifted_d(disc, 2), (1, 2), {2})
