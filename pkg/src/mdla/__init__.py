"""One-dimensional multi-particle DLA: simulators, mean-field and PDE numerics, growth predictions."""
