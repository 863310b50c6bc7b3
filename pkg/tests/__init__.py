"""
Test suite for privsense.
"""
