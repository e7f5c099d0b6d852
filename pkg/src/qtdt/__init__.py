"""Sib-pair simulation, phenotype imputation and a multivariate logistic TDT."""

__version__ = "0.1.0"
