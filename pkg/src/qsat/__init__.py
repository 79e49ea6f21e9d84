"""Adiabatic quantum search on random k-SAT: simulator, spectra, baselines, harness."""
