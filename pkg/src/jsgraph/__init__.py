"""Jenkins-Serrin horizontal graphs of translating solitons: geometry, checks and solver."""
__version__ = "0.1.0"
