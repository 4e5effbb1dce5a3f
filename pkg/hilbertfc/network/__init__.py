"""
The `network` app implements the two small CNNs on top of numpy: layers with explicit
forward and backward passes (`network.layers`), the architectures (`network.models`),
the Adam optimizer (`network.optim`), a finite difference gradient check
(`network.gradcheck`) and HDF5 checkpoints (`network.ioports`).
"""
