"""Polaron-transform fast-forwarding toolkit for fermion-boson lattice models."""
