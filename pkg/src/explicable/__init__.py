"""Explicable planning: plan distances, learned explicability scores and
cost-bounded anytime search for plans that match human expectations."""

__version__ = "0.1.0"
