import os


def n_workers():
    """Worker count for FFTs, capped by ``DARCS_THREADS`` when it is set."""
    cap = os.environ.get("DARCS_THREADS")
    ncpu = os.cpu_count() or 1
    if cap:
        try:
            return max(1, min(int(cap), ncpu))
        except ValueError:
            pass
    return ncpu
