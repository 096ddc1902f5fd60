"""Multiprogramming simulator for tiled surface-code floorplans."""
__version__ = "0.1.0"
