"""kdr - exact Koszul-De Rham computations on relative charts."""
