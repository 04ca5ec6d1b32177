"""Q-tensor relaxation dynamics at the nematic-isotropic transition.

Simulates the diffuse-interface relaxation of a traceless symmetric
3x3 order-parameter field whose bulk potential degenerates at the
critical temperature, and monitors the functionals that tie the
dynamics to an exactly shrinking mean-curvature interface and to a
sphere-valued heat flow of the director.
"""

__version__ = "0.1.0"
