"""
lagrange-bnb - Branch-and-bound for constrained binary quadratic programs with UBQP-oracle Lagrangian bounds
"""
