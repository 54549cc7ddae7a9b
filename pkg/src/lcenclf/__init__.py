"""LASSO-Clip-EN classification, differentiable-MCC MLPs and the benchmark harness around them."""
__version__ = "0.1.0"
