"""Thread-count resolution for the embarrassingly parallel per-mode work.

The STLAB_THREADS environment variable overrides any programmatic setting;
the default is serial.  Results never depend on the thread count: workers
fill slots keyed by mode index.
"""

import os

_threads = 1


def set_threads(n):
    global _threads
    _threads = max(1, int(n))


def thread_count() -> int:
    env = os.environ.get("STLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return _threads
