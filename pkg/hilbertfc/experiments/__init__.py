"""
The `experiments` app runs the repeated evaluation protocol: balanced random splits
(`experiments.splits`), training and evaluation of one model (`experiments.training`),
the repetitions and the published presets (`experiments.protocol`) and the report
files (`experiments.ioports`).
"""
