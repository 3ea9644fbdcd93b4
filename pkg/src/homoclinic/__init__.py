"""Homoclinic growth in Markov shifts and hyperbolic model maps."""
