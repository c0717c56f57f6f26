"""Mean-field simulation and fitting of cavity-mediated collective spin dynamics."""

__version__ = "0.1.0"
