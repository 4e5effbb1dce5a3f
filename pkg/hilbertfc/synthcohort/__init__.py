"""
Django app that generates synthetic cohorts, either as 4D volumes or directly as
correlation matrices, with a class signal of adjustable strength. See
`synthcohort.generate` for how the signal is built.
"""
