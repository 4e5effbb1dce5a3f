"""
This is the module at the heart of `hilbertfc`.

It turns 4D resting-state fMRI volumes into symmetric region-by-region *spatial*
correlation matrices. Every region of a seed atlas is represented by a segment of a 3D
Hilbert curve centered on the region's seed voxel, and two regions are compared by the
Pearson correlation of their time-averaged intensities read along the curve. The
matrices are classified with two small convolutional networks that are trained from
scratch with the repeated-split protocol of the study.

The functionality is organized as Django apps, each providing its batch commands:

- `volumes`: the volume data model, NIfTI-1 and internal file formats, slice timing
  correction, smoothing, time averaging, the NMI metric and cohort statistics.
- `features`: the Hilbert curve, seed atlases, ROI segments, spatial correlation
  matrices and regional homogeneity (ReHo).
- `network`: the numpy CNN engine with its two architectures, Adam and the gradient
  check.
- `experiments`: splits, training, evaluation and reports.
- `synthcohort`: synthetic cohorts with controllable class separation.

The `settings` tie everything together and `manage` is the command line entry point.
"""
