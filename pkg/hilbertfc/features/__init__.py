"""
The `features` app turns time-averaged volumes into correlation matrices.

Its core is the 3D Hilbert curve (`features.hilbert`), which orders the voxels of a
cube such that consecutive voxels are neighbours. A region of a seed atlas is the
curve segment centered on its seed, and the correlation of two regions is the Pearson
correlation of the intensities along their segments (`features.extract`). The app also
computes the regional homogeneity of every segment (`features.reho`) and owns the
atlas, matrix and manifest files (`features.ioports`).
"""
