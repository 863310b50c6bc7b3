"""
Privacy-aware distributed sensing with isothermal fully symmetric Gaussian probes.
"""

__version__ = "0.3.0"
