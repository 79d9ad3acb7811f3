"""Classification of upper-extremity movement primitives from wearable sensors."""
__version__ = "0.1.0"
