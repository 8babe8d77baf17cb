"""Process-wide counters for expensive setup work (assemblies, hierarchy builds)."""

from collections import Counter

COUNTERS = Counter()


def reset():
    COUNTERS.clear()
