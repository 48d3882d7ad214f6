"""Shared test configuration."""

import os
import sys

# Make the oracle module importable from any test file.
sys.path.insert(0, os.path.dirname(__file__))
