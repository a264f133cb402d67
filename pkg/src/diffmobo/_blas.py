"""Shared single-thread BLAS limiter.

The hot paths here are thousands of small matrix operations; BLAS worker
threads only contend on them, so compute-heavy sections run under a limit of
one thread. The library scan performed by threadpoolctl is expensive, so one
controller is built lazily and reused.
"""

from __future__ import annotations

from threadpoolctl import ThreadpoolController

_controller: ThreadpoolController | None = None


def single_thread_blas():
    global _controller
    if _controller is None:
        _controller = ThreadpoolController()
    return _controller.limit(limits=1)
