import os
import sys

# tests import `lib.*` relative to the repository root
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size Monte Carlo runs (deselect with -m 'not slow')")
