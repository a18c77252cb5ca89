"""Acceptance criteria 1 to 11 at full size.

Each test prints one ``PASS``/``FAIL`` line and asserts the verdict.  Runs
shared by several criteria are computed once per session.  Run with
``pytest -s tests/test_acceptance.py`` to see the lines as they are produced.
"""
import functools

import pytest

from wavefront import acceptance

pytestmark = pytest.mark.slow


@functools.lru_cache(maxsize=None)
def verdicts(group):
    return {v.cid: v for v in acceptance.CHECKS[group]()}


def check(group, cid):
    v = verdicts(group)[cid]
    print(v.line())
    assert v.passed, v.line()


def test_c01_tail_exponent():
    check("tail", "C1")


def test_c02_rate_constant():
    check("tail", "C2")


def test_c03_block_inequality():
    check("blocks", "C3")


def test_c04_spread_bound():
    check("blocks", "C4")


def test_c05_conditional_spacings():
    check("blocks", "C5")


def test_c06_walk_envelope():
    check("q", "C6")


def test_c07_goodness_rate():
    check("q", "C7")


def test_c08_coalescence_position():
    check("coalescence", "C8")


def test_c09_particle_density():
    check("cbm", "C9")


def test_c10_point_process_comparison():
    check("compare", "C10")


def test_c11_structural_invariants():
    check("structure", "C11")
