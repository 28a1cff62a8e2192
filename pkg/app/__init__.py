"""
Geodesic convolutional networks on triangle meshes
"""
__version__ = "1.0.0"
