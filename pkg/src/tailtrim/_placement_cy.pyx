# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of tailtrim.placement; must stay bit-identical to the
pure-Python reference (same starts, same node choices)."""

from libc.stdlib cimport free, malloc


cdef long long _kth_smallest(long long *times, Py_ssize_t n, Py_ssize_t k):
    # Insertion sort into a scratch copy; n is a cluster's node count, small.
    cdef long long *scratch = <long long *> malloc(n * sizeof(long long))
    if scratch == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef long long v
    try:
        for i in range(n):
            v = times[i]
            j = i
            while j > 0 and scratch[j - 1] > v:
                scratch[j] = scratch[j - 1]
                j -= 1
            scratch[j] = v
        return scratch[k]
    finally:
        free(scratch)


def forward_plan(avail, requests):
    """See tailtrim.placement._forward_plan_py."""
    cdef Py_ssize_t n = len(avail)
    cdef long long *times = <long long *> malloc(n * sizeof(long long))
    if times == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, req, picked
    cdef long long start, hold
    out = []
    try:
        for i in range(n):
            times[i] = avail[i]
        for req_obj, hold_obj in requests:
            req = req_obj
            hold = hold_obj
            if req < 1 or req > n:
                raise ValueError(
                    f"request for {req} nodes does not fit cluster size {n}")
            start = _kth_smallest(times, n, req - 1)
            chosen = []
            picked = 0
            for i in range(n):
                if times[i] <= start:
                    chosen.append(i)
                    picked += 1
                    if picked == req:
                        break
            for i in chosen:
                times[i] = start + hold
            out.append((int(start), tuple(chosen)))
        return out
    finally:
        free(times)


def earliest_slot(avail, Py_ssize_t req):
    """See tailtrim.placement._earliest_slot_py."""
    return forward_plan(avail, [(req, 0)])[0]
