"""Computation engines for kdr."""
