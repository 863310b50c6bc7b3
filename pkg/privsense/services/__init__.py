"""
Numerical engines: symplectic algebra, the FSG state family, metrology, optimization and homodyne simulation.
"""
