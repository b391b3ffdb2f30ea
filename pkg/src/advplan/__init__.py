"""Planning and adversarial perturbation of planning instances."""

__version__ = "0.1.0"
