"""Monte Carlo simulation of Stark-tuned Foerster resonance and dipole blockade in few-atom Rydberg ensembles."""

__version__ = "0.1.0"
