"""
The `volumes` app holds the imaging side of the pipeline.

It defines the 3D and 4D volume types (`volumes.models`), reads and writes them as
NIfTI-1 or in a small internal format (`volumes.ioports`) and implements the
preprocessing chain of every subject (`volumes.preprocess`): slice timing correction,
Gaussian smoothing and the average over time. The same module computes the normalized
mutual information of two volumes and the intensity statistics of a cohort.
"""
