"""Brute-force reference implementations for the incremental machinery.

Everything here recomputes from an explicit solution set and is meant to be
obviously correct, not fast.  Enumeration refuses domain products larger
than ``cap`` instead of sampling.
"""

from __future__ import annotations

import itertools


class OracleCapacityError(Exception):
    """Requested product enumeration exceeds the configured cap."""


DEFAULT_CAP = 10 ** 6


def _product_size(domains):
    size = 1
    for d in domains:
        size *= len(d)
    return size


def _check_cap(domains, cap):
    size = _product_size(domains)
    if size > cap:
        raise OracleCapacityError(
            f"domain product of size {size} exceeds the cap of {cap}")


def filter_solutions(solutions, domains):
    """Solutions whose every component lies in the current domains."""
    doms = [frozenset(d) for d in domains]
    return {t for t in solutions if all(v in doms[k] for k, v in enumerate(t))}


def oracle_valid_domains(solutions, domains):
    """Per-variable projections of the solutions surviving the current domains."""
    doms = [frozenset(d) for d in domains]
    valid = [set() for _ in doms]
    for t in filter_solutions(solutions, doms):
        for k, v in enumerate(t):
            valid[k].add(v)
    return valid

def oracle_entailed(solutions, domains, cap=DEFAULT_CAP):
    """True iff every assignment over the current domains is a solution.

    Vacuously true when some domain is empty (degenerate product).
    """
    doms = [frozenset(d) for d in domains]
    if any(not d for d in doms):
        return True
    _check_cap(doms, cap)
    sols = set(map(tuple, solutions))
    return all(t in sols for t in itertools.product(*(sorted(d) for d in doms)))


def oracle_solve(domains, solution_sets, scopes, cap=DEFAULT_CAP):
    """Exhaustive search over the domain product for a joint solution.

    ``solution_sets[k]`` is the tuple set of constraint k over variables
    ``scopes[k]`` (1-based global indices).  Returns the first full
    assignment in lexicographic order, or None.
    """
    doms = [frozenset(d) for d in domains]
    if any(not d for d in doms):
        return None
    _check_cap(doms, cap)
    sols = [set(map(tuple, s)) for s in solution_sets]
    for t in itertools.product(*(sorted(d) for d in doms)):
        ok = True
        for k, scope in enumerate(scopes):
            if tuple(t[i - 1] for i in scope) not in sols[k]:
                ok = False
                break
        if ok:
            return t
    return None
